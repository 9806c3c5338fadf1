"""Run configuration: one YAML file in human units, converted to SI here.

A run file describes the sphere, the atom, the cooling and binding light
fields, the cold bath and the background gas, plus per-command options.
Self-test files replace the physical potential by an analytic model
(harmonic, square well, Coulomb/Rutherford) with a known answer.

Presets ship under ``atomsphere/data/configs``; a bare name such as
``paper`` is looked up there, after ``$ATOMSPHERE_CONFIG_DIR``.
"""

from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .nearfield import Beam, Nanosphere, TripleBeamConfig
from .potentials import (BindingConfig, CallableTerm, RadialPotential, StepTerm,
                         calibrate_binding_config, composite_bound_potential,
                         repulsive_cooling_potential)
from .species import (AtomSpecies, _pick, _read_yaml, builtin_material, builtin_path,
                      builtin_species, load_material, load_species)
from .units import AMU, KB, MBAR, MICROKELVIN, NM, NM2, PER_CM3, UM, W_PER_CM2

CONFIG_DIR_ENV = "ATOMSPHERE_CONFIG_DIR"
MODELS = ("harmonic", "square_well", "coulomb")


def builtin_config_dir() -> Path:
    return Path(str(resources.files("atomsphere") / "data" / "configs"))


def resolve_config_path(name_or_path) -> Path:
    """A file path, or a preset name searched in $ATOMSPHERE_CONFIG_DIR then the builtins."""
    p = Path(name_or_path)
    if p.is_file():
        return p
    dirs = []
    if os.environ.get(CONFIG_DIR_ENV):
        dirs.append(Path(os.environ[CONFIG_DIR_ENV]))
    dirs.append(builtin_config_dir())
    for d in dirs:
        for cand in (d / str(name_or_path), d / f"{name_or_path}.yaml"):
            if cand.is_file():
                return cand
    raise ConfigError(f"config not found: {name_or_path} (searched {', '.join(map(str, dirs))})")


def list_presets() -> list[str]:
    return sorted(p.stem for p in builtin_config_dir().glob("*.yaml"))


def _section(data: dict, key: str, required: bool = False) -> dict:
    sec = data.get(key)
    if sec is None:
        if required:
            raise ConfigError(f"missing section '{key}'")
        return {}
    if not isinstance(sec, dict):
        raise ConfigError(f"section '{key}' must be a mapping")
    return sec


def _opt(d: dict, key: str, scale: float = 1.0, default=None):
    if key not in d or d[key] is None:
        return default
    try:
        return float(d[key]) * scale
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key} is not a number") from exc


def _lookup(value, base: Path, loader, builtin):
    """Builtin data name or a path relative to the config file."""
    if value is None:
        return builtin()
    value = str(value)
    cand = (base / value) if not Path(value).is_absolute() else Path(value)
    if cand.is_file():
        return loader(cand)
    if builtin_path(value).is_file():
        return builtin(value)
    raise ConfigError(f"data file not found: {value}")


def _beam(d: dict, role: str, what: str) -> Beam:
    return Beam(
        wavelength=_pick(d, {"wavelength_nm": NM, "wavelength_m": 1.0}, what),
        intensity=_opt(d, "intensity_W_cm2", W_PER_CM2, 0.0),
        spot_size=_opt(d, "spot_size_um", UM, 20e-6),
        role=str(d.get("role", role)),
    )


@dataclass(frozen=True)
class ModelPotential:
    """Analytic self-test potential with an exactly known answer."""

    model: str
    mass: float
    params: dict

    def potential(self) -> RadialPotential:
        p = self.params
        if self.model == "harmonic":
            k = self.mass * p["omega"] ** 2
            return RadialPotential((CallableTerm(lambda r: 0.5 * k * r**2, "harmonic"),), 0.0,
                                   0.0, "harmonic")
        if self.model == "square_well":
            return RadialPotential((StepTerm(-p["depth"], p["radius"]),), 0.0, 0.0,
                                   "square_well")
        if self.model == "coulomb":
            # repulsive Coulomb Z/r on r > 0
            z = p["strength"]
            return RadialPotential((CallableTerm(lambda r: z / r, "coulomb", singular=True),),
                                   0.0, 0.0, "coulomb")
        raise ConfigError(f"unknown model {self.model!r}")


def _model(d: dict) -> ModelPotential:
    model = str(d.get("model"))
    if model not in MODELS:
        raise ConfigError(f"model must be one of {MODELS}, got {model!r}")
    mass = _pick(d, {"mass_amu": AMU, "mass_kg": 1.0}, "model")
    if model == "harmonic":
        omega = 2.0 * math.pi * _pick(d, {"frequency_Hz": 1.0}, "harmonic model")
        if not omega > 0:
            raise ConfigError("harmonic frequency must be > 0")
        params = {"omega": omega}
    elif model == "square_well":
        params = {"depth": _pick(d, {"depth_uK": KB * MICROKELVIN, "depth_J": 1.0}, "square well"),
                  "radius": _pick(d, {"radius_nm": NM, "radius_um": UM}, "square well")}
        if not (params["depth"] > 0 and params["radius"] > 0):
            raise ConfigError("square well depth and radius must be > 0")
    else:
        params = {"strength": _pick(d, {"strength_J_m": 1.0, "strength_uK_um": KB * MICROKELVIN * UM},
                                    "coulomb model")}
        if not params["strength"] > 0:
            raise ConfigError("coulomb strength must be > 0")
    return ModelPotential(model, mass, params)


@dataclass(frozen=True)
class BindingSection:
    repulsive: Beam
    attractive: Beam
    ratio: float
    well_depth: float
    include_cp: bool
    include_minor_terms: bool


@dataclass(frozen=True)
class RunConfig:
    """Parsed run file. ``raw`` keeps the original mapping, ``source`` its bytes."""

    sphere: Nanosphere
    species: AtomSpecies
    cooling_beams: TripleBeamConfig | None
    screening_length: float | None
    cooling_include_cp: bool
    cooling_polarizability: float | None
    binding: BindingSection | None
    model: ModelPotential | None
    bath: dict
    environment: dict
    cooling: dict
    commands: dict
    raw: dict = field(repr=False)
    source: bytes = field(repr=False)
    path: Path | None = None

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.source).hexdigest()

    def command_options(self, name: str) -> dict:
        return dict(self.commands.get(name, {}) or {})

    @property
    def reduced_mass(self) -> float:
        if self.model is not None:
            return self.model.mass
        m_a, m_n = self.species.mass, self.sphere.mass
        return m_a * m_n / (m_a + m_n)

    # potentials -------------------------------------------------------

    def cooling_potential(self, screened: bool = True) -> RadialPotential:
        if self.model is not None:
            return self.model.potential()
        if self.cooling_beams is None:
            raise ConfigError("config has no cooling_beams section")
        return repulsive_cooling_potential(
            self.sphere, self.species, self.cooling_beams,
            self.screening_length if screened else None, self.cooling_include_cp,
            self.cooling_polarizability,
        )

    def binding_config(self) -> BindingConfig:
        b = self.binding
        if b is None:
            raise ConfigError("config has no binding section")
        base = BindingConfig.for_sphere(self.sphere, b.repulsive, b.attractive, b.ratio, 1.0)
        return calibrate_binding_config(base, self.sphere, self.species, b.well_depth,
                                        b.include_cp, b.include_minor_terms)

    def binding_potential(self) -> RadialPotential:
        if self.model is not None:
            return self.model.potential()
        b = self.binding
        return composite_bound_potential(self.binding_config(), self.sphere, self.species,
                                         b.include_cp, b.include_minor_terms)

    def profile(self, name: str, screened: bool = True) -> RadialPotential:
        if self.model is not None:
            return self.model.potential()
        if name in ("cooling", "triple-beam"):
            return self.cooling_potential(screened)
        if name == "binding":
            pot = self.binding_potential()
            return pot.screened(self.screening_length) if screened and self.screening_length else pot
        raise ConfigError(f"profile {name!r} has no radial potential")


def config_from_dict(data: dict, source: bytes = b"", base: Path = Path(".")) -> RunConfig:
    kind = data.get("kind", "run")
    if kind not in ("run", "selftest"):
        raise ConfigError(f"config kind must be 'run' or 'selftest', got {kind!r}")
    sph = _section(data, "sphere")
    material = _lookup(sph.get("material"), base, load_material, builtin_material)
    sphere = Nanosphere(
        radius=_opt(sph, "radius_nm", NM, 40e-9),
        refractive_index=_opt(sph, "refractive_index", 1.0, 1.43),
        density=_opt(sph, "density_kg_m3", 1.0, 2000.0),
        charge=int(sph.get("charge_e", 0)),
        permittivity=material,
    )
    species = _lookup(data.get("species"), base, load_species, builtin_species)

    cb = _section(data, "cooling_beams")
    beams = None
    if cb:
        one = _beam(cb, "repulsive", "cooling_beams")
        beams = TripleBeamConfig.orthogonal(one.wavelength, one.intensity, one.spot_size, one.role)
    mu = _opt(data, "screening_length_um", UM)
    if mu is not None and not mu > 0:
        raise ConfigError("screening_length_um must be > 0")
    cp = _section(data, "cooling_potential")

    binding = None
    bd = _section(data, "binding")
    if bd:
        binding = BindingSection(
            repulsive=_beam(_section(bd, "repulsive", True), "repulsive", "binding.repulsive"),
            attractive=_beam(_section(bd, "attractive", True), "attractive", "binding.attractive"),
            ratio=_pick(bd, {"depth_ratio": 1.0}, "binding"),
            well_depth=_pick(bd, {"well_depth_uK": KB * MICROKELVIN}, "binding"),
            include_cp=bool(bd.get("include_cp", True)),
            include_minor_terms=bool(bd.get("include_minor_terms", False)),
        )
        if not binding.ratio > 0 or not binding.well_depth > 0:
            raise ConfigError("binding depth_ratio and well_depth_uK must be > 0")

    model = _model(_section(data, "model")) if data.get("model") is not None else None
    if kind == "selftest" and model is None:
        raise ConfigError("selftest configs need a 'model' section")

    commands = {k: _section(data, k) for k in ("potential", "boundstates", "xsection")}
    return RunConfig(
        sphere=sphere,
        species=species,
        cooling_beams=beams,
        screening_length=mu,
        cooling_include_cp=bool(cp.get("include_cp", True)),
        cooling_polarizability=_opt(cp, "polarizability_SI"),
        binding=binding,
        model=model,
        bath=_section(data, "bath"),
        environment=_section(data, "environment"),
        cooling=_section(data, "cooling"),
        commands=commands,
        raw=data,
        source=source,
    )


def load_config(name_or_path) -> RunConfig:
    path = resolve_config_path(name_or_path)
    data = _read_yaml(path)
    cfg = config_from_dict(data, path.read_bytes(), path.parent)
    object.__setattr__(cfg, "path", path)
    return cfg


# human-unit helpers shared with the CLI
def sigma_nm2_to_m2(value):
    return value * NM2


def mbar_to_pa(value):
    return value * MBAR


def per_cm3_to_m3(value):
    return value * PER_CM3


def energies_from_uK(emin, emax, points, spacing="log") -> np.ndarray:
    if not (emin > 0 and emax > 0):
        raise ConfigError("energies must be > 0")
    if emin > emax:
        raise ConfigError(f"emin ({emin}) must not exceed emax ({emax})")
    if points < 1:
        raise ConfigError("points must be >= 1")
    f = np.geomspace if spacing == "log" else np.linspace
    return f(emin, emax, int(points)) * KB * MICROKELVIN
