"""``atomsphere`` command line.

Subcommands write CSV (or JSON) artifacts plus a ``<command>_manifest.json``
recording the tool version, the config hash, the parameters, the outputs
with their SHA-256 and the wall time. Outputs are byte-identical for the same
config and flags, whatever ``--threads`` is.

Exit codes: 0 success, 2 configuration/usage error, 3 domain error,
4 convergence failure.
"""

from __future__ import annotations

import argparse
import hashlib
import math
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .boundstates import RadialGrid, default_grid, find_bound_states, write_bound_states
from .config import RunConfig, energies_from_uK, load_config
from .cooling import (ALPHA_C, BathSpec, EnvironmentSpec, ThermalCrossSection,
                      calibrate_recoil_prefactor, cooling_report)
from .errors import ConfigError, ConvergenceError, DomainError
from .io import json_text, write_csv, write_json
from .nearfield import single_beam_intensity, triple_beam_terms
from .potentials import dipole_prefactor, find_well
from .scattering import (classical_cross_section_curve, quantum_cross_section_curve,
                         resonance_scan, write_resonances)
from .selftest import HEADER as SELFTEST_HEADER
from .selftest import run_selftests
from .species import polarizability_at_wavelength
from .units import AMU, KB, MBAR, MICROKELVIN, NM, NM2, PER_CM3

EXIT_OK, EXIT_CONFIG, EXIT_DOMAIN, EXIT_CONVERGENCE = 0, 2, 3, 4
PROFILES = ("single-beam", "triple-beam", "cooling", "binding")


class UsageError(ConfigError):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors raised instead of sys.exit(2) mid-parse."""

    def error(self, message):
        raise UsageError(message)


# --------------------------------------------------------------------------
# helpers


def _opt(cli_value, section: dict, key: str, default=None):
    if cli_value is not None:
        return cli_value
    return section.get(key, default)


def _out_path(args, name: str, ext: str) -> Path:
    return Path(args.out) / f"{name}.{ext}"


def _write_table(args, name, header, rows) -> Path:
    if args.format == "json":
        path = _out_path(args, name, "json")
        records = [dict(zip(header, row)) for row in rows]
        return write_json(path, {"columns": header, "rows": records})
    return write_csv(_out_path(args, name, "csv"), header, rows)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _manifest(args, cfg: RunConfig | None, outputs, wall_time, status="ok", message=""):
    params = {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)}
    # neither changes the content of the outputs
    params.pop("threads", None)
    params.pop("out", None)
    param_bytes = json_text(params).encode()
    config_bytes = cfg.source if cfg is not None else b""
    data = {
        "tool": "atomsphere",
        "tool_version": __version__,
        "command": args.command,
        "parameters": params,
        "threads": args.threads,
        "config_path": str(cfg.path) if cfg is not None and cfg.path else None,
        "config_sha256": hashlib.sha256(config_bytes).hexdigest(),
        "run_hash": hashlib.sha256(config_bytes + b"\0" + param_bytes).hexdigest(),
        "outputs": [{"path": p.name, "sha256": _sha256(p)} for p in outputs],
        "status": status,
        "message": message,
        "wall_time_s": round(wall_time, 3),
    }
    return write_json(Path(args.out) / f"{args.command}_manifest.json", data)


# --------------------------------------------------------------------------
# potential


def _radial_grid(cfg, args, pot_min):
    opts = cfg.command_options("potential")
    rmin = _opt(args.rmin, opts, "rmin_nm")
    rmax = _opt(args.rmax, opts, "rmax_nm", 2000.0)
    points = int(_opt(args.points, opts, "points", 2000))
    if rmin is None:
        rmin = pot_min / NM
    elif args.rmin is None:
        # a preset default never reaches inside the profile's own domain
        rmin = max(float(rmin), pot_min / NM)
    else:
        rmin = float(rmin)
    if points < 2:
        raise UsageError("--points must be >= 2")
    if not float(rmax) > rmin:
        raise UsageError("--rmax must exceed --rmin")
    return np.geomspace(rmin, float(rmax), points) * NM if rmin > 0 else \
        np.linspace(rmin, float(rmax), points) * NM


def cmd_potential(args, cfg: RunConfig):
    profile = _opt(args.profile, cfg.command_options("potential"), "profile", "binding")
    if profile not in PROFILES:
        raise UsageError(f"--profile must be one of {PROFILES}")
    if profile in ("single-beam", "triple-beam") and cfg.model is None:
        beams = cfg.cooling_beams
        if beams is None:
            raise ConfigError("profile needs a cooling_beams section")
        r = _radial_grid(cfg, args, cfg.sphere.radius)
        alpha = abs(polarizability_at_wavelength(cfg.species, beams.wavelength))
        sign = 1.0 if beams.beams[0].role == "repulsive" else -1.0
        scale = sign * alpha * dipole_prefactor()
        if profile == "single-beam":
            b = beams.beams[0]
            i_par = single_beam_intensity(r, 0.0, b, cfg.sphere)
            i_perp = single_beam_intensity(r, 0.5 * math.pi, b, cfg.sphere)
            header = ["r_m", "I_parallel_W_m2", "I_perpendicular_W_m2", "U_parallel_J",
                      "U_perpendicular_J"]
            rows = zip(r, i_par, i_perp, scale * i_par, scale * i_perp)
        else:
            terms = triple_beam_terms(r, beams, cfg.sphere)
            total = sum(terms.values())
            header = ["r_m", "I_total_W_m2"] + [f"I_{k}_W_m2" for k in terms] + ["U_total_J"]
            rows = zip(r, total, *terms.values(), scale * total)
        return [_write_table(args, f"potential_{profile}", header, rows)]

    screened = profile == "cooling"
    pot = cfg.profile(profile, screened=screened)
    r = _radial_grid(cfg, args, pot.inner_start() if not pot.closed_domain else pot.domain_min)
    total = np.asarray(pot(r))
    parts = pot.breakdown(r)
    header = ["r_m", "U_total_J", "U_total_uK"] + [f"U_{k}_J" for k in parts]
    rows = zip(r, total, total / (KB * MICROKELVIN), *parts.values())
    outputs = [_write_table(args, f"potential_{profile}", header, rows)]
    well = find_well(pot)
    if well is not None:
        print(f"well: r = {well.radius / NM:.3f} nm, depth = "
              f"{well.depth / (KB * MICROKELVIN):.3f} uK")
    return outputs


# --------------------------------------------------------------------------
# bound states


def cmd_boundstates(args, cfg: RunConfig):
    opts = cfg.command_options("boundstates")
    max_states = int(_opt(args.max_states, opts, "max_states", 8))
    pot = cfg.binding_potential()
    mass = cfg.reduced_mass
    # confining self-test models are bound above zero; the window top is then explicit
    window = None
    if "e_max_uK" in opts:
        window = (-math.inf, float(opts["e_max_uK"]) * KB * MICROKELVIN)
    if "steps" in opts or "r_max_nm" in opts:
        r_min = float(opts.get("r_min_nm", pot.domain_min / NM)) * NM
        grid = RadialGrid(r_min, float(opts["r_max_nm"]) * NM, int(opts.get("steps", 20000)))
        states = find_bound_states(pot, mass, grid, window, max_states=max_states,
                                   threads=args.threads)
    elif find_well(pot) is None:
        states = []
    else:
        grid = default_grid(pot, mass)
        states = find_bound_states(pot, mass, grid, max_states=max_states,
                                   threads=args.threads)
    stride = max(1, (states[0].grid.n_steps + 1) // 2000) if states else 1
    paths = write_bound_states(states, _out_path(args, "boundstates_energies", "csv"),
                               _out_path(args, "boundstates_wavefunctions", "csv"), stride)
    for s in states:
        print(f"n = {s.n}: E = {s.energy_uK:.6f} uK")
    if not states:
        print("no bound states found")
    return paths


# --------------------------------------------------------------------------
# cross-sections


def cmd_xsection(args, cfg: RunConfig):
    opts = cfg.command_options("xsection")
    kind = _opt(args.kind, opts, "kind", "classical")
    if kind not in ("classical", "quantum"):
        raise UsageError("--kind must be 'classical' or 'quantum'")
    emin = float(_opt(args.emin, opts, "emin_uK", 0.1))
    emax = float(_opt(args.emax, opts, "emax_uK", 100.0))
    points = int(_opt(args.points, opts, "points", 40))
    try:
        energies = energies_from_uK(emin, emax, points)
    except ConfigError as exc:
        raise UsageError(str(exc)) from exc
    profile = _opt(args.profile, opts, "profile", "cooling" if kind == "classical" else "binding")
    pot = cfg.profile(profile, screened=True)
    mass = cfg.reduced_mass
    outputs = []
    if kind == "classical":
        sk = _opt(args.sigma, opts, "sigma", "momentum_transfer")
        curve = classical_cross_section_curve(pot, mass, energies, threads=args.threads,
                                              kind=f"classical_{sk}")
    else:
        # no l_max: truncated per energy by the partial-wave tail criterion
        l_max = _opt(args.l_max, opts, "l_max", None)
        curve = quantum_cross_section_curve(pot, mass, energies,
                                            None if l_max is None else int(l_max),
                                            threads=args.threads)
    outputs.append(curve.write_csv(_out_path(args, f"xsection_{kind}", "csv")))
    if args.resonances:
        if kind != "quantum":
            raise UsageError("--resonances needs --kind quantum")
        l_top = int(_opt(args.l_max, opts, "resonance_l_max", 12))
        res = resonance_scan(pot, mass, energies, range(l_top + 1), threads=args.threads)
        outputs.append(write_resonances(res, _out_path(args, "resonances", "csv")))
        print(f"{len(res)} resonance(s): " + ", ".join(
            f"l={r.l} at {r.energy_uK:.4g} uK" for r in res))
    for e, s in zip(curve.energies, curve.values):
        print(f"E = {e / (KB * MICROKELVIN):10.4g} uK   sigma = {s / NM2:.4e} nm^2")
    return outputs


# --------------------------------------------------------------------------
# cooling


def _thermal_sigma(cfg: RunConfig, args):
    c = cfg.cooling
    if args.sigma_nm2 is not None:
        value = float(args.sigma_nm2) * NM2
        return (lambda T: value), {"sigma_source": "fixed", "sigma_nm2": args.sigma_nm2}
    kind = c.get("cross_section_kind", "classical_momentum_transfer")
    cv = c.get("curve", {})
    energies = energies_from_uK(float(cv.get("emin_uK", 0.002)), float(cv.get("emax_uK", 200.0)),
                                int(cv.get("points", 41)))
    pot = cfg.cooling_potential(screened=True)
    if kind.startswith("classical"):
        curve = classical_cross_section_curve(pot, cfg.reduced_mass, energies,
                                              threads=args.threads, kind=kind)
    else:
        curve = quantum_cross_section_curve(pot, cfg.reduced_mass, energies,
                                            cv.get("l_max"), kind=kind,
                                            threads=args.threads)
    anchor = None
    info = {"sigma_source": "curve", "cross_section_kind": kind}
    if c.get("sigma_anchor"):
        a = c["sigma_anchor"]
        anchor = (float(a["sigma_nm2"]) * NM2, float(a["temperature_uK"]) * MICROKELVIN)
        info.update(sigma_source="anchored_curve", anchor_sigma_nm2=float(a["sigma_nm2"]),
                    anchor_temperature_uK=float(a["temperature_uK"]))
    model = ThermalCrossSection(curve, cfg.species.mass, anchor)
    return model, info


def _bath(cfg, density_cm3=None, temp_uK=None):
    b = cfg.bath
    density = float(_opt(density_cm3, b, "density_cm3", 5e12)) * PER_CM3
    temp = float(_opt(temp_uK, b, "temperature_uK", 10.0)) * MICROKELVIN
    return BathSpec(density, temp, cfg.species)


def cmd_cooling(args, cfg: RunConfig):
    if cfg.cooling_beams is None:
        raise ConfigError("cooling needs a cooling_beams section")
    c = cfg.cooling
    env_d = cfg.environment
    env = EnvironmentSpec(
        float(_opt(args.pressure, env_d, "pressure_mbar", 0.0)) * MBAR,
        float(env_d.get("temperature_K", 300.0)),
        float(env_d.get("molecular_mass_amu", 28.97)) * AMU,
    )
    bath = _bath(cfg, args.bath_density, args.bath_temp)
    trap_f = float(_opt(args.trap_freq, c, "trap_frequency_kHz", 50.0)) * 1e3
    alpha_c = float(c.get("alpha_c", ALPHA_C))
    sigma_of_T, info = _thermal_sigma(cfg, args)
    sigma = sigma_of_T(bath.temperature)

    recoil = c.get("recoil", {}) or {}
    if "calibrate_T_e_uK" in recoil:
        ref_bath = _bath(cfg, temp_uK=float(recoil.get("at_T_C_uK", 10.0)))
        eta = calibrate_recoil_prefactor(
            float(recoil["calibrate_T_e_uK"]) * MICROKELVIN, ref_bath, env, cfg.sphere,
            cfg.cooling_beams, sigma_of_T(ref_bath.temperature), trap_f, alpha_c)
        info.update(recoil_mode="calibrated", calibrate_T_e_uK=float(recoil["calibrate_T_e_uK"]),
                    calibrate_at_T_C_uK=float(recoil.get("at_T_C_uK", 10.0)))
    else:
        eta = float(recoil.get("prefactor", 1.0))
        info.update(recoil_mode="fixed")
    physical = cooling_report(bath, env, cfg.sphere, cfg.cooling_beams, sigma, trap_f, alpha_c, 1.0)
    info["T_e_with_unit_recoil_prefactor_K"] = physical.T_e
    report = cooling_report(bath, env, cfg.sphere, cfg.cooling_beams, sigma, trap_f, alpha_c,
                            eta, info)
    path = write_json(_out_path(args, "cooling_report", "json"), report.to_dict())
    print(f"gamma_C = 2pi x {report.gamma_C / (2 * math.pi):.4g} Hz, "
          f"T_e = {report.T_e / MICROKELVIN:.4g} uK, n_bar = {report.n_bar:.4g}")
    return [path]


# --------------------------------------------------------------------------
# self-test


def cmd_selftest(args, cfg: RunConfig | None):
    checks = run_selftests(cfg)
    path = _write_table(args, "selftest", SELFTEST_HEADER, [c.row() for c in checks])
    failed = [c for c in checks if not c.passed]
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.test} {c.quantity} rel_error={c.rel_error:.2e}")
    if failed:
        raise ConvergenceError(f"{len(failed)} of {len(checks)} self-test checks failed")
    return [path]


COMMANDS = {
    "potential": cmd_potential,
    "boundstates": cmd_boundstates,
    "xsection": cmd_xsection,
    "cooling": cmd_cooling,
    "selftest": cmd_selftest,
}


def _common(suppress: bool) -> argparse.ArgumentParser:
    # subcommands repeat the global flags with suppressed defaults, so a flag
    # given before the subcommand is not reset by the subparser
    def d(value):
        return argparse.SUPPRESS if suppress else value

    common = _Parser(add_help=False)
    common.add_argument("--config", default=d(None),
                        help="run file or preset name (default: 'paper'; also searched in "
                             "$ATOMSPHERE_CONFIG_DIR)")
    common.add_argument("--out", default=d("."), help="output directory")
    common.add_argument("--threads", type=int, default=d(1), help="worker threads")
    common.add_argument("--format", choices=("csv", "json"), default=d("csv"),
                        help="table format for potential/selftest outputs")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="atomsphere", description=__doc__.splitlines()[0],
                     parents=[_common(False)])
    common = _common(True)
    parser.add_argument("--version", action="version", version=f"atomsphere {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("potential", parents=[common], help="radial potential profiles")
    p.add_argument("--profile", choices=PROFILES, default=None)
    p.add_argument("--rmin", type=float, default=None, help="nm")
    p.add_argument("--rmax", type=float, default=None, help="nm")
    p.add_argument("--points", type=int, default=None)

    p = sub.add_parser("boundstates", parents=[common], help="Numerov bound states")
    p.add_argument("--max-states", type=int, default=None)

    p = sub.add_parser("xsection", parents=[common], help="cross-section curves")
    p.add_argument("--kind", choices=("classical", "quantum"), default=None)
    p.add_argument("--profile", choices=("cooling", "binding"), default=None)
    p.add_argument("--sigma", choices=("momentum_transfer", "total"), default=None,
                   help="classical cross-section kind")
    p.add_argument("--emin", type=float, default=None, help="uK")
    p.add_argument("--emax", type=float, default=None, help="uK")
    p.add_argument("--points", type=int, default=None)
    p.add_argument("--l-max", type=int, default=None,
                   help="fixed partial-wave cutoff (default: tail criterion per energy); "
                        "with --resonances, the highest l scanned")
    p.add_argument("--resonances", action="store_true")

    p = sub.add_parser("cooling", parents=[common], help="sympathetic-cooling report")
    p.add_argument("--bath-density", type=float, default=None, help="cm^-3")
    p.add_argument("--bath-temp", type=float, default=None, help="uK")
    p.add_argument("--pressure", type=float, default=None, help="mbar")
    p.add_argument("--trap-freq", type=float, default=None, help="kHz")
    p.add_argument("--sigma-nm2", type=float, default=None,
                   help="use this <sigma> (nm^2) instead of computing it")

    sub.add_parser("selftest", parents=[common], help="analytic-oracle regression suite")
    return parser


def main(argv=None) -> int:
    start = time.perf_counter()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command is None:
        parser.print_help()
        return EXIT_CONFIG
    if args.threads < 1:
        print("usage error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG

    cfg = None
    outputs = []
    code, message = EXIT_OK, ""
    try:
        if args.command == "selftest":
            cfg = load_config(args.config) if args.config else None
        else:
            cfg = load_config(args.config or "paper")
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            outputs = COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        code, message = EXIT_CONFIG, f"configuration error: {exc}"
    except DomainError as exc:
        code, message = EXIT_DOMAIN, f"domain error: {exc}"
    except ConvergenceError as exc:
        code, message = EXIT_CONVERGENCE, f"convergence error: {exc}"
    if message:
        print(message, file=sys.stderr)
    Path(args.out).mkdir(parents=True, exist_ok=True)
    status = "ok" if code == EXIT_OK else "error"
    _manifest(args, cfg, outputs, time.perf_counter() - start, status, message)
    return code


if __name__ == "__main__":
    sys.exit(main())
