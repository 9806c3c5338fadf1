"""Analytic-oracle regression suite behind ``atomsphere selftest``.

Each check runs a solver on a model with a closed-form answer and compares
at a fixed relative tolerance:

* isotropic oscillator, s-wave levels ħω(2n + 3/2);
* Morse oscillator, E_n = −D(1 − (n + ½)/λ)² with λ = √(2mD)/(aħ);
* finite spherical well, s-wave levels from K cot(KR) = −κ;
* hard sphere, δ₀ = −kR;
* repulsive Coulomb deflection χ = 2 arctan(Z/(2Eb));
* Maxwell-Boltzmann average of σ ∝ E^(−1/2), 2c/√(πk_BT).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .boundstates import RadialGrid, find_bound_states
from .config import ModelPotential, load_config
from .cooling import speed_averaged_cross_section
from .potentials import CallableTerm, RadialPotential, StepTerm
from .scattering import CollisionSpec, CrossSectionCurve, deflection_angle, phase_shifts
from .units import AMU, HBAR, KB, MICROKELVIN, NM, UM


@dataclass(frozen=True)
class Check:
    test: str
    quantity: str
    computed: float
    expected: float
    tolerance: float

    @property
    def rel_error(self) -> float:
        return abs(self.computed - self.expected) / abs(self.expected)

    @property
    def passed(self) -> bool:
        return self.rel_error <= self.tolerance

    def row(self):
        return (self.test, self.quantity, self.computed, self.expected, self.rel_error,
                self.tolerance, self.passed)


HEADER = ["test", "quantity", "computed", "expected", "rel_error", "tolerance", "pass"]


def _grid(cfg, default_rmax, default_steps):
    opts = cfg.command_options("boundstates")
    r_max = float(opts.get("r_max_nm", default_rmax / NM)) * NM
    return RadialGrid(0.0, r_max, int(opts.get("steps", default_steps)))


def harmonic_checks(model: ModelPotential, grid: RadialGrid, levels: int = 6, tol=1e-6):
    omega = model.params["omega"]
    states = find_bound_states(model.potential(), model.mass, grid,
                               E_window=(0.0, HBAR * omega * (2 * levels + 1.0)))
    out = []
    for s in states[:levels]:
        exact = HBAR * omega * (2 * s.n + 1.5)
        out.append(Check("harmonic", f"E_{s.n}", s.energy, exact, tol))
    return out


def morse_checks(depth=100.0 * KB * MICROKELVIN, mass=4.0 * AMU, lam=3.3, steps=20000,
                 tol=1e-6):
    a = math.sqrt(2.0 * mass * depth) / (lam * HBAR)
    r_e = 12.0 / a
    pot = RadialPotential(
        (CallableTerm(lambda r: depth * (np.expm1(-a * (r - r_e)) ** 2 - 1.0), "morse"),),
        0.0, 0.0, "morse")
    # inner wall where U ≈ 10⁴ D; ψ is ~e^(−60) there
    r0 = r_e - math.log(101.0) / a
    states = find_bound_states(pot, mass, RadialGrid(r0, r_e + 40.0 / a, steps))
    out = []
    for s in states:
        exact = -depth * (1.0 - (s.n + 0.5) / lam) ** 2
        out.append(Check("morse", f"E_{s.n}", s.energy, exact, tol))
    n_exact = int(math.ceil(lam - 0.5))
    out.append(Check("morse", "n_states", float(len(states)), float(n_exact), 0.0))
    return out


def square_well_levels(depth, radius, mass):
    """s-wave levels of a finite spherical well from K cot(KR) = −κ."""
    k0 = math.sqrt(2.0 * mass * depth) / HBAR
    f = lambda K: K * math.cos(K * radius) + math.sqrt(max(k0**2 - K**2, 0.0)) * math.sin(K * radius)
    levels = []
    n_max = int(k0 * radius / math.pi + 0.5) + 1
    for n in range(1, n_max + 1):
        a = (n - 0.5) * math.pi / radius
        b = min(n * math.pi / radius, k0)
        if a >= k0 or f(a) * f(b) > 0:
            continue
        K = optimize.brentq(f, a, b, xtol=1e-15 * k0, rtol=1e-15)
        levels.append((HBAR * K) ** 2 / (2.0 * mass) - depth)
    return np.array(levels)


def square_well_checks(model: ModelPotential, grid: RadialGrid, tol=1e-6):
    depth, radius = model.params["depth"], model.params["radius"]
    exact = square_well_levels(depth, radius, model.mass)
    states = find_bound_states(model.potential(), model.mass, grid)
    out = []
    for s, e in zip(states, exact):
        kappa = math.sqrt(-2.0 * model.mass * e) / HBAR
        if kappa * (grid.r_max - radius) < 30.0:
            continue  # the outer Dirichlet wall shifts this level
        out.append(Check("square_well", f"E_{s.n}", s.energy, e, tol))
    return out


def hard_sphere_checks(radius=1.0 * UM, mass=4.0 * AMU, tol=1e-8):
    pot = RadialPotential((StepTerm(0.0, radius),), radius, 0.0, "hard_sphere")
    energies = np.array([0.1, 1.0, 10.0]) * KB * MICROKELVIN
    delta = phase_shifts(pot, mass, energies, [0], absolute=True, ppw=120.0,
                         extrapolate=True)[:, 0]
    k = np.sqrt(2.0 * mass * energies) / HBAR
    return [Check("hard_sphere", f"delta0(E={e / (KB * MICROKELVIN):g}uK)", d, -kk * radius, tol)
            for e, d, kk in zip(energies, delta, k)]


def rutherford_checks(model: ModelPotential, tol=1e-6):
    z = model.params["strength"]
    out = []
    for e_uk in (1.0, 10.0):
        energy = e_uk * KB * MICROKELVIN
        spec = CollisionSpec(model.potential(), model.mass, energy)
        b = np.geomspace(0.05, 20.0, 5) * z / energy
        chi = deflection_angle(spec, b, r_far=1e4 * float(b.max()))
        exact = 2.0 * np.arctan(z / (2.0 * energy * b))
        out += [Check("rutherford", f"chi(E={e_uk:g}uK,b={bb:.3e}m)", c, x, tol)
                for bb, c, x in zip(b, chi, exact)]
    return out


def maxwell_boltzmann_checks(temperature=10e-6, mass=4.0 * AMU, tol=5e-3):
    kT = KB * temperature
    c = 1e-12 * math.sqrt(kT)
    e = np.geomspace(1e-6, 60.0, 200) * kT
    curve = CrossSectionCurve(e, c / np.sqrt(e), "classical_momentum_transfer")
    avg = speed_averaged_cross_section(curve, temperature, mass)
    return [Check("maxwell_boltzmann", "<c/sqrt(E)>", avg, 2.0 * c / math.sqrt(math.pi * kT), tol)]


def run_selftests(config=None) -> list[Check]:
    """Run the suite; a selftest ``config`` restricts it to that model."""
    names = [config] if config is not None else ["harmonic", "square_well", "rutherford"]
    checks = []
    for name in names:
        cfg = name if not isinstance(name, (str, bytes)) else load_config(name)
        model = cfg.model
        if model is None:
            continue
        if model.model == "harmonic":
            checks += harmonic_checks(model, _grid(cfg, 4000 * NM, 20000))
        elif model.model == "square_well":
            checks += square_well_checks(model, _grid(cfg, 5000 * NM, 40000))
        elif model.model == "coulomb":
            checks += rutherford_checks(model)
    if config is None:
        checks += morse_checks()
        checks += hard_sphere_checks()
        checks += maxwell_boltzmann_checks()
    return checks
