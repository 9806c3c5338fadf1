"""Radial atom-nanosphere potentials.

A :class:`RadialPotential` is an immutable sum of named terms plus an
asymptote offset. Terms are small callables (inverse powers, a tabulated
Casimir-Polder series, Yukawa wrappers, step functions for test wells), so
the potential can be evaluated as a whole or term by term for CSV export.

Sign convention: the far-detuned optical potential of a beam is
``±½|α|I/(ε₀c)`` with the sign taken from the beam's role (repulsive is
positive), never from the sign of α.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import optimize

from .errors import ConfigError, ConvergenceWarning, DomainError
from .nearfield import (
    Beam,
    Nanosphere,
    TripleBeamConfig,
    coupling_constant,
    nanosphere_trap_depth,
    triple_beam_terms,
)
from .species import (
    AtomSpecies,
    builtin_material,
    permittivity_imag_freq,
    polarizability_at_wavelength,
    polarizability_imag_freq,
)
from .units import C_LIGHT, E_CHARGE, EPS0, HBAR

__all__ = [
    "PowerTerm",
    "CasimirPolderTerm",
    "YukawaTerm",
    "StepTerm",
    "CallableTerm",
    "RadialPotential",
    "Well",
    "BindingConfig",
    "BindingReport",
    "dipole_potential_far",
    "dipole_potential_resonant",
    "dipole_prefactor",
    "casimir_polder",
    "casimir_polder_term",
    "charge_induced_potential",
    "repulsive_cooling_potential",
    "composite_bound_potential",
    "validate_binding_config",
    "calibrate_binding_config",
    "find_well",
    "find_barrier",
    "nanosphere_trap_depth",
]

POWER_KINDS = {
    "constant": 0,
    "inverse_r": 1,
    "inverse_r2": 2,
    "inverse_r4": 4,
    "inverse_r6": 6,
}


# --------------------------------------------------------------------------
# terms


@dataclass(frozen=True)
class PowerTerm:
    kind: str
    coefficient: float

    singular = False

    def __post_init__(self):
        if self.kind not in POWER_KINDS:
            raise ConfigError(f"unknown power-term kind {self.kind!r}")

    @property
    def name(self) -> str:
        return self.kind

    @property
    def power(self) -> int:
        return POWER_KINDS[self.kind]

    def __call__(self, r):
        if self.power == 0:
            return self.coefficient * np.ones_like(r)
        return self.coefficient / r**self.power


@dataclass(frozen=True)
class CasimirPolderTerm:
    """Non-retarded atom-sphere dispersion series.

    ``U(r) = −ħ/(8π²ε₀) · (a/r⁴) · Σ_l (2l+1)(l+1) I_l (a/r)^{2l}`` with
    ``I_l = ∫₀^∞ α(iζ) (ε(iζ)−1)/(ε(iζ)+(l+1)/l) dζ``. Terms up to
    ``l_max`` are summed explicitly; the remainder uses the large-l
    expansion ``I_l ≈ I_∞ − J/l`` in closed form, which keeps the series
    accurate arbitrarily close to the surface.
    """

    radius: float
    integrals: tuple[float, ...]  # I_l for l = 1 .. l_max
    integral_inf: float
    integral_slope: float  # J
    analytic_tail: bool = True
    name: str = "casimir_polder"

    singular = True

    @property
    def l_max(self) -> int:
        return len(self.integrals)

    @property
    def prefactor(self) -> float:
        return HBAR / (8.0 * math.pi**2 * EPS0)

    @property
    def c3(self) -> float:
        """Planar-limit coefficient, U ≈ −C₃/(r−a)³ as r → a."""
        return HBAR / (16.0 * math.pi**2 * EPS0) * self.integral_inf

    def series(self, x, l_max=None):
        """Σ (2l+1)(l+1) I_l x^l up to ``l_max`` (no tail)."""
        L = self.l_max if l_max is None else min(l_max, self.l_max)
        l = np.arange(1, L + 1, dtype=float)
        coeffs = np.concatenate(([0.0], (2 * l + 1) * (l + 1) * np.asarray(self.integrals[:L])))
        return np.polynomial.polynomial.polyval(x, coeffs)

    def tail(self, x):
        """Σ_{l>L} (2l+1)(l+1) (I_∞ − J/l) x^l in closed form."""
        L = self.l_max
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        active = x ** (L + 1) * (L + 1) ** 2 > 1e-18
        if not np.any(active):
            return out
        xa = x[active]
        one_m = 1.0 - xa
        g0 = 1.0 / one_m
        g1 = xa / one_m**2
        g2 = xa * (1.0 + xa) / one_m**3
        m = L + 1
        # Σ_{k≥0} p(k+m) x^k for p(l) = 2l² + 3l + 1
        poly = 2.0 * g2 + (4.0 * m + 3.0) * g1 + (2.0 * m * m + 3.0 * m + 1.0) * g0
        # Σ_{k≥0} q(k+m) x^k for q(l) = 2l + 3 (the 1/l remainder handled below)
        lin = 2.0 * g1 + (2.0 * m + 3.0) * g0
        head = xa ** m
        log_tail = -np.log1p(-xa) - np.sum(
            [xa**j / j for j in range(1, L + 1)], axis=0
        ) if L < 4000 else 0.0
        t1 = head * poly
        t2 = head * lin + log_tail
        out[active] = self.integral_inf * t1 - self.integral_slope * t2
        return out

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r <= self.radius):
            raise DomainError("Casimir-Polder potential is only defined for r > a")
        x = (self.radius / r) ** 2
        total = self.series(x)
        if self.analytic_tail:
            total = total + self.tail(x)
        return -self.prefactor * self.radius / r**4 * total

    def partial(self, r, l_max):
        """Explicit sum to ``l_max`` with no tail (convergence diagnostics)."""
        r = np.asarray(r, dtype=float)
        x = (self.radius / r) ** 2
        return -self.prefactor * self.radius / r**4 * self.series(x, l_max)


@dataclass(frozen=True)
class YukawaTerm:
    inner: object
    screening_length: float

    @property
    def name(self) -> str:
        return self.inner.name

    @property
    def singular(self) -> bool:
        return self.inner.singular

    def __call__(self, r):
        return self.inner(r) * np.exp(-np.asarray(r) / self.screening_length)


@dataclass(frozen=True)
class StepTerm:
    """``height`` for r < edge, 0 beyond (square wells in tests).

    Exactly at the edge the mean ``height/2`` is returned: a jump sitting
    on a Numerov node then costs O(h²) instead of O(h).
    """

    height: float
    edge: float
    name: str = "step"

    singular = False

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        at_edge = np.abs(r - self.edge) <= 1e-12 * abs(self.edge)
        return np.where(at_edge, 0.5 * self.height, np.where(r < self.edge, self.height, 0.0))


@dataclass(frozen=True)
class CallableTerm:
    func: Callable
    name: str = "custom"
    singular: bool = False

    def __call__(self, r):
        return np.asarray(self.func(np.asarray(r, dtype=float)), dtype=float)


# --------------------------------------------------------------------------
# potential container


@dataclass(frozen=True)
class Well:
    radius: float
    value: float

    @property
    def depth(self) -> float:
        return -self.value


@dataclass(frozen=True)
class RadialPotential:
    terms: tuple
    domain_min: float
    asymptote_offset: float = 0.0
    label: str = ""
    breakpoints: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        object.__setattr__(self, "breakpoints", tuple(self.breakpoints))
        if not self.domain_min >= 0:
            raise ConfigError("domain_min must be >= 0")

    @property
    def closed_domain(self) -> bool:
        """True when the potential is finite at ``domain_min`` itself."""
        return not any(t.singular for t in self.terms)

    @property
    def term_names(self) -> list[str]:
        names = []
        for t in self.terms:
            name = t.name
            i = 2
            while name in names:
                name = f"{t.name}_{i}"
                i += 1
            names.append(name)
        return names

    def _check(self, r):
        r = np.asarray(r, dtype=float)
        if self.closed_domain:
            bad = np.any(r < self.domain_min)
        else:
            bad = np.any(r <= self.domain_min)
        if bad:
            raise DomainError(
                f"potential evaluated at r = {np.min(r):.6e} m, below its domain "
                f"minimum {self.domain_min:.6e} m"
            )
        return r

    def __call__(self, r):
        r = self._check(r)
        # constants and the asymptote offset cancel first, exactly when equal
        const = sum(t.coefficient for t in self.terms
                    if isinstance(t, PowerTerm) and t.power == 0)
        total = np.zeros_like(r) + (const - self.asymptote_offset)
        for t in self.terms:
            if not (isinstance(t, PowerTerm) and t.power == 0):
                total = total + t(r)
        return total[()] if total.ndim == 0 else total

    evaluate = __call__

    def breakdown(self, r) -> dict:
        r = self._check(r)
        out = {name: t(r) for name, t in zip(self.term_names, self.terms)}
        if self.asymptote_offset:
            out["asymptote_offset"] = -self.asymptote_offset * np.ones_like(r)
        return out

    def with_terms(self, keep: Callable[[object], bool], **changes) -> "RadialPotential":
        return replace(self, terms=tuple(t for t in self.terms if keep(t)), **changes)

    def screened(self, screening_length: float) -> "RadialPotential":
        """Yukawa-screened copy, U(r)·exp(−r/μ), of the asymptote-free potential.

        Constant terms cancelled by the asymptote offset are dropped first so
        the screened potential still vanishes at infinity.
        """
        if not screening_length > 0:
            raise ConfigError("screening length must be > 0")
        constant = sum(
            t.coefficient for t in self.terms if isinstance(t, PowerTerm) and t.power == 0
        )
        terms = [t for t in self.terms if not (isinstance(t, PowerTerm) and t.power == 0)]
        offset = self.asymptote_offset - constant
        if abs(offset) > 1e-12 * max(abs(constant), abs(self.asymptote_offset), 1e-300):
            terms.append(PowerTerm("constant", -offset))
        return RadialPotential(
            tuple(YukawaTerm(t, screening_length) for t in terms),
            self.domain_min,
            0.0,
            f"{self.label} (screened, mu={screening_length:g} m)".strip(),
            self.breakpoints,
        )

    def scaled(self, factor: float) -> "RadialPotential":
        return RadialPotential(
            tuple(CallableTerm(lambda r, t=t: factor * t(r), t.name, t.singular) for t in self.terms),
            self.domain_min,
            factor * self.asymptote_offset,
            self.label,
            self.breakpoints,
        )

    @property
    def discontinuities(self) -> tuple[float, ...]:
        """Radii where U jumps: declared breakpoints plus step edges."""
        edges = set(self.breakpoints)
        for t in self.terms:
            inner = t.inner if isinstance(t, YukawaTerm) else t
            if isinstance(inner, StepTerm):
                edges.add(inner.edge)
        return tuple(sorted(e for e in edges if e > self.domain_min))

    def inner_start(self) -> float:
        """Smallest radius at which the potential may be evaluated."""
        if self.closed_domain:
            return self.domain_min
        return self.domain_min * (1.0 + 1e-9) if self.domain_min > 0 else 1e-15


# --------------------------------------------------------------------------
# simple closed forms


def dipole_prefactor() -> float:
    """1/(2ε₀c): U = ∓ prefactor · α · I."""
    return 0.5 / (EPS0 * C_LIGHT)


def dipole_potential_far(intensity, alpha):
    """U = −½ α I / (ε₀ c), far-detuned dipole potential in J."""
    intensity = np.asarray(intensity, dtype=float)
    if np.any(intensity < 0):
        raise ValueError("intensity must be non-negative")
    return -0.5 * alpha * intensity / (EPS0 * C_LIGHT)


def dipole_potential_resonant(intensity, omega0, linewidth, detuning):
    """U = (3πc²/2ω₀³)(Γ/Δ) I; repulsive (positive) for blue detuning Δ > 0."""
    if detuning == 0:
        raise DomainError("zero detuning: the near-resonant dipole potential diverges")
    intensity = np.asarray(intensity, dtype=float)
    if np.any(intensity < 0):
        raise ValueError("intensity must be non-negative")
    return 3.0 * math.pi * C_LIGHT**2 / (2.0 * omega0**3) * (linewidth / detuning) * intensity


def charge_induced_potential(r, q, alpha_static):
    """U = −α q² e² / (2 (4πε₀)² r⁴) for ``q`` elementary charges on the sphere."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("r must be > 0")
    charge = q * E_CHARGE
    return -alpha_static * charge**2 / (2.0 * (4.0 * math.pi * EPS0) ** 2 * r**4)


# --------------------------------------------------------------------------
# Casimir-Polder


def _cp_integrand_samples(species, material, nodes):
    """Gauss-Legendre nodes/weights mapped to ζ ∈ (0, ∞) by ζ = ζ₀ t/(1−t)."""
    t, w = np.polynomial.legendre.leggauss(nodes)
    t = 0.5 * (t + 1.0)
    w = 0.5 * w
    z0 = species.lowest_transition_frequency
    zeta = z0 * t / (1.0 - t)
    jac = z0 / (1.0 - t) ** 2
    alpha = polarizability_imag_freq(species, zeta)
    eps = permittivity_imag_freq(material, zeta)
    return w * jac * alpha, eps


def _cp_integrals(species, material, l_max, nodes):
    weight, eps = _cp_integrand_samples(species, material, nodes)
    l = np.arange(1, l_max + 1, dtype=float)
    ratio = (l + 1.0) / l
    ints = ((eps - 1.0)[None, :] / (eps[None, :] + ratio[:, None])) @ weight
    i_inf = float(np.sum(weight * (eps - 1.0) / (eps + 1.0)))
    slope = float(np.sum(weight * (eps - 1.0) / (eps + 1.0) ** 2))
    return ints, i_inf, slope


@lru_cache(maxsize=64)
def _cp_term_cached(radius, species, material, l_max, nodes, tol, analytic_tail):
    if nodes is None:
        n = 64
        prev = _cp_integrals(species, material, l_max, n)
        while True:
            n *= 2
            cur = _cp_integrals(species, material, l_max, n)
            change = max(
                float(np.max(np.abs(cur[0] - prev[0]) / np.abs(cur[0]))),
                abs(cur[1] - prev[1]) / abs(cur[1]),
            )
            prev = cur
            if change < tol or n >= 8192:
                if change >= tol:
                    warnings.warn(
                        f"Casimir-Polder quadrature not converged ({change:.2e})",
                        ConvergenceWarning,
                    )
                break
        ints, i_inf, slope = prev
    else:
        ints, i_inf, slope = _cp_integrals(species, material, l_max, nodes)
    return CasimirPolderTerm(
        radius, tuple(float(v) for v in ints), i_inf, slope, analytic_tail
    )


def casimir_polder_term(
    sphere: Nanosphere,
    species: AtomSpecies,
    l_max: int = 200,
    quadrature_nodes: int | None = None,
    quadrature_tol: float = 1e-10,
    analytic_tail: bool = True,
    l_min: int = 1,
) -> CasimirPolderTerm:
    """Build (and cache) the Casimir-Polder term for a sphere/atom pair.

    ``l_min`` selects the convention for the l = 0 multipole, whose
    dielectric factor contains (l+1)/l → ∞; either choice gives a vanishing
    monopole, so l_min ∈ {0, 1} yield identical values.
    """
    if l_max < 1:
        raise ValueError("l_max must be >= 1")
    if l_min not in (0, 1):
        raise ValueError("l_min must be 0 or 1")
    material = sphere.permittivity or builtin_material()
    return _cp_term_cached(
        sphere.radius, species, material, int(l_max), quadrature_nodes, quadrature_tol,
        analytic_tail,
    )


def casimir_polder(r, sphere: Nanosphere, species: AtomSpecies, l_max: int = 200,
                   quadrature_nodes: int | None = None):
    """Casimir-Polder energy (J) at distance ``r`` from the sphere centre.

    Warns with :class:`ConvergenceWarning` when doubling ``l_max`` (explicit
    terms only, no analytic tail) changes the value by more than 0.1 %.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= sphere.radius):
        raise DomainError("Casimir-Polder potential requires r > a")
    term = casimir_polder_term(sphere, species, 2 * l_max, quadrature_nodes)
    value = term.partial(r, l_max) + _tail_beyond(term, r, l_max)
    coarse = term.partial(r, l_max)
    fine = term.partial(r, 2 * l_max)
    if np.any(np.abs(fine - coarse) > 1e-3 * np.abs(fine)):
        warnings.warn(
            f"Casimir-Polder l-sum not converged at l_max={l_max}; analytic tail applied",
            ConvergenceWarning,
        )
    return value[()] if value.ndim == 0 else value


def _tail_beyond(term, r, l_max):
    """Tail beyond ``l_max`` using a term computed to a larger cut-off."""
    reduced = replace(term, integrals=term.integrals[:l_max])
    x = (term.radius / np.asarray(r)) ** 2
    return -term.prefactor * term.radius / np.asarray(r) ** 4 * reduced.tail(x)


# --------------------------------------------------------------------------
# optical potentials around the sphere


def _signed(role):
    return 1.0 if role == "repulsive" else -1.0


def repulsive_cooling_potential(
    sphere: Nanosphere,
    species: AtomSpecies,
    beams: TripleBeamConfig,
    screening: float | None = None,
    include_cp: bool = True,
    polarizability: float | None = None,
    subtract_asymptote: bool = True,
    l_max: int = 200,
) -> RadialPotential:
    """Three-beam optical potential plus Casimir-Polder, optionally screened.

    The optical part is ``±½|α| I_T(r)/(ε₀c)`` with the sign from the beam
    role. ``polarizability`` overrides the species model (its magnitude is
    used). With ``screening`` the asymptote-free potential is multiplied by
    ``exp(−r/μ)``.
    """
    if polarizability is None:
        alpha = abs(polarizability_at_wavelength(species, beams.wavelength))
    else:
        alpha = abs(polarizability)
    sign = _signed(beams.beams[0].role)
    scale = sign * alpha * dipole_prefactor()
    # coefficients: evaluate the per-power intensity terms at r = 1 m
    unit = triple_beam_terms(np.array(max(1.0, sphere.radius)), beams, sphere)
    ref = max(1.0, sphere.radius)
    terms = [
        PowerTerm(kind, float(scale * np.asarray(val) * ref ** POWER_KINDS[kind]))
        for kind, val in unit.items()
    ]
    constant = terms[0].coefficient
    if include_cp:
        terms.append(casimir_polder_term(sphere, species, l_max))
    potential = RadialPotential(
        tuple(terms),
        sphere.radius,
        constant if subtract_asymptote else 0.0,
        "cooling",
    )
    if screening is not None:
        potential = potential.screened(screening)
    if beams.intensity > 0 and sign > 0:
        barrier = find_barrier(potential)
        if barrier is None or barrier.value <= 0:
            raise ConfigError("repulsive cooling potential has no positive barrier")
    return potential


@dataclass(frozen=True)
class BindingConfig:
    """Repulsive plus attractive three-beam fields; depths are per-beam, in J."""

    repulsive: Beam
    attractive: Beam
    U_R: float
    U_A: float
    C_R: float
    C_A: float

    def __post_init__(self):
        if self.U_R < 0 or self.U_A < 0:
            raise ConfigError("well depths U_R, U_A are magnitudes and must be >= 0")
        if self.C_R < 0 or self.C_A < 0:
            raise ConfigError("coupling constants must be >= 0")

    @classmethod
    def for_sphere(cls, sphere, repulsive, attractive, U_R, U_A, n_R=None, n_A=None):
        return cls(
            repulsive, attractive, U_R, U_A,
            coupling_constant(sphere, n_R), coupling_constant(sphere, n_A),
        )

    @property
    def k_R(self) -> float:
        return self.repulsive.wavevector

    @property
    def k_A(self) -> float:
        return self.attractive.wavevector

    @property
    def ratio(self) -> float:
        return self.U_R / self.U_A if self.U_A > 0 else math.inf

    @property
    def ratio_upper_bound(self) -> float:
        return (self.repulsive.wavelength / self.attractive.wavelength) ** 2

    def scaled_depths(self, U_A: float) -> "BindingConfig":
        """Same ratio, new attractive depth."""
        return replace(self, U_R=self.ratio * U_A, U_A=U_A)


@dataclass(frozen=True)
class BindingReport:
    passed: bool
    violations: tuple[str, ...]
    ratio: float
    ratio_upper_bound: float

    def __bool__(self):
        return self.passed


def validate_binding_config(config: BindingConfig) -> BindingReport:
    """Check short-range repulsion, long-range attraction and the ratio window."""
    violations = []
    if not config.U_R * config.C_R**2 > config.U_A * config.C_A**2:
        violations.append("short-range dominance: need U_R*C_R^2 > U_A*C_A^2")
    if not config.U_R * config.C_R * config.k_R**2 < config.U_A * config.C_A * config.k_A**2:
        violations.append("long-range attraction: need U_R*C_R*k_R^2 < U_A*C_A*k_A^2")
    ratio = config.ratio
    bound = config.ratio_upper_bound
    if not 1.0 < ratio < bound:
        violations.append(f"ratio window: need 1 < U_R/U_A < {bound:.4f}, got {ratio:.4f}")
    return BindingReport(not violations, tuple(violations), ratio, bound)


def composite_bound_potential(
    config: BindingConfig,
    sphere: Nanosphere,
    species: AtomSpecies,
    include_cp: bool = True,
    include_minor_terms: bool = False,
    subtract_asymptote: bool = True,
    validate: bool = True,
    l_max: int = 200,
) -> RadialPotential:
    """Repulsive-minus-attractive optical potential plus Casimir-Polder.

    Canonical terms: constant ``3(U_R−U_A)``, ``6(U_R C_R² − U_A C_A²)/r⁶``
    and ``4(U_R C_R k_R² − U_A C_A k_A²)/r``. ``include_minor_terms`` adds the
    ``1/r⁴`` and ``1/r²`` terms of the full three-beam intensity.
    """
    if validate:
        report = validate_binding_config(config)
        if not report:
            raise ConfigError("invalid binding configuration: " + "; ".join(report.violations))
    UR, UA, CR, CA, kR, kA = config.U_R, config.U_A, config.C_R, config.C_A, config.k_R, config.k_A
    terms = [
        PowerTerm("constant", 3.0 * (UR - UA)),
        PowerTerm("inverse_r6", 6.0 * (UR * CR**2 - UA * CA**2)),
        PowerTerm("inverse_r", 4.0 * (UR * CR * kR**2 - UA * CA * kA**2)),
    ]
    if include_minor_terms:
        terms.append(PowerTerm("inverse_r4", 2.0 * (UR * CR**2 * kR**2 - UA * CA**2 * kA**2)))
        terms.append(PowerTerm("inverse_r2", 2.0 * (UR * CR**2 * kR**4 - UA * CA**2 * kA**4)))
    if include_cp:
        terms.append(casimir_polder_term(sphere, species, l_max))
    return RadialPotential(
        tuple(terms),
        sphere.radius,
        3.0 * (UR - UA) if subtract_asymptote else 0.0,
        "binding",
    )


# --------------------------------------------------------------------------
# well / barrier location


def _probe(potential, r_hi, points):
    r_lo = potential.inner_start()
    if r_lo <= 0:
        r_lo = 1e-12
    r = np.geomspace(r_lo, r_hi, points)
    return r, potential(r)


def find_well(potential: RadialPotential, r_hi: float | None = None,
              points: int = 4000) -> Well | None:
    """Deepest interior local minimum, or ``None`` if there is none."""
    r_hi = r_hi or max(1000.0 * potential.domain_min, 1e-6)
    r, u = _probe(potential, r_hi, points)
    idx = np.where((u[1:-1] < u[:-2]) & (u[1:-1] <= u[2:]))[0] + 1
    if len(idx) == 0:
        return None
    best = None
    for i in idx:
        res = optimize.minimize_scalar(
            lambda x: float(potential(x)), bounds=(r[i - 1], r[i + 1]), method="bounded",
            options={"xatol": 1e-6 * r[i]},
        )
        cand = Well(float(res.x), float(res.fun))
        if best is None or cand.value < best.value:
            best = cand
    return best


def find_barrier(potential: RadialPotential, r_hi: float | None = None,
                 points: int = 4000) -> Well | None:
    """Highest point of the potential beyond the inner edge (interior maximum
    or, for a closed domain, the value at the wall)."""
    r_hi = r_hi or max(1000.0 * potential.domain_min, 1e-6)
    r, u = _probe(potential, r_hi, points)
    idx = np.where((u[1:-1] > u[:-2]) & (u[1:-1] >= u[2:]))[0] + 1
    if len(idx) == 0:
        if potential.closed_domain and u[0] > u[1]:
            return Well(float(r[0]), float(u[0]))
        return None
    i = idx[np.argmax(u[idx])]
    res = optimize.minimize_scalar(
        lambda x: -float(potential(x)), bounds=(r[i - 1], r[i + 1]), method="bounded",
        options={"xatol": 1e-6 * r[i]},
    )
    return Well(float(res.x), float(-res.fun))


def calibrate_binding_config(
    base: BindingConfig,
    sphere: Nanosphere,
    species: AtomSpecies,
    depth: float,
    include_cp: bool = True,
    include_minor_terms: bool = False,
    U_A_range: tuple[float, float] = (1e-30, 1e-21),
) -> BindingConfig:
    """Rescale ``base`` at fixed U_R/U_A so the interior well has ``depth`` (J).

    Raises :class:`ConfigError` when no attractive depth in ``U_A_range``
    produces an interior minimum of the requested depth.
    """

    def depth_at(UA):
        cfg = base.scaled_depths(UA)
        pot = composite_bound_potential(
            cfg, sphere, species, include_cp, include_minor_terms, validate=False
        )
        well = find_well(pot)
        return None if well is None else well.depth

    if not include_cp:
        d1 = depth_at(1.0)
        if d1 is None or d1 <= 0:
            raise ConfigError("optical binding potential has no interior minimum")
        return base.scaled_depths(depth / d1)

    grid = np.geomspace(*U_A_range, 121)
    depths = [depth_at(u) for u in grid]
    first_well = next((i for i, d in enumerate(depths) if d is not None), None)
    for i in range(len(grid) - 1):
        d0, d1 = depths[i], depths[i + 1]
        if d0 is not None and d1 is not None and (d0 - depth) * (d1 - depth) <= 0:
            UA = optimize.brentq(lambda u: depth_at(u) - depth, grid[i], grid[i + 1],
                                 xtol=1e-14 * grid[i], rtol=1e-10)
            return base.scaled_depths(UA)
    if first_well is None:
        detail = "no interior minimum anywhere in the scanned range"
    else:
        detail = (
            f"an interior minimum first appears at U_A = {grid[first_well]:.3e} J "
            f"with depth {depths[first_well]:.3e} J"
        )
    raise ConfigError(
        f"cannot reach a {depth:.3e} J well at U_R/U_A = {base.ratio:.4g} with Casimir-Polder "
        f"included: {detail}"
    )
