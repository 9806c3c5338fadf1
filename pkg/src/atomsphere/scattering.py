"""Classical and partial-wave scattering off a radial potential.

Classical part: deflection function χ(b) from the outermost turning point
and the momentum-transfer cross-section σ_mt = 2π∫(1−cos χ) b db. When the
radial motion has no turning point outside the domain edge (the atom would
reach the sphere) the edge acts as a hard, specularly reflecting wall.

Quantum part: Johnson's log-derivative propagation of ψ'' = −Q ψ with
Q = k² − l(l+1)/r² − 2μU/ħ², chained over sectors of varying step and
batched over (E, l) channels, matched to Riccati-Bessel functions.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.special import spherical_jn, spherical_yn

from . import kernels
from .errors import ConfigError, ConvergenceError, ConvergenceWarning, DomainError
from .io import write_csv
from .parallel import chunked, ordered_map
from .potentials import RadialPotential, YukawaTerm
from .units import HBAR, KB, MICROKELVIN

HARD_WALL_LOGDERIV = 1e30
GL_NODES = 16
PHASE_FLOOR = 1e-6


@dataclass(frozen=True)
class CollisionSpec:
    potential: RadialPotential
    reduced_mass: float
    energy: float

    def __post_init__(self):
        if not self.energy > 0:
            raise ConfigError("collision energy must be > 0")
        if not self.reduced_mass > 0:
            raise ConfigError("reduced mass must be > 0")

    @classmethod
    def at_temperature(cls, potential, reduced_mass, temperature):
        """Collision energy E = k_B·T."""
        return cls(potential, reduced_mass, KB * temperature)

    @property
    def wavenumber(self) -> float:
        return math.sqrt(2.0 * self.reduced_mass * self.energy) / HBAR

    @property
    def energy_uK(self) -> float:
        return self.energy / (KB * MICROKELVIN)


@dataclass(frozen=True)
class CrossSectionCurve:
    energies: np.ndarray
    values: np.ndarray
    kind: str
    metadata: dict = field(default_factory=dict)
    partials: np.ndarray | None = field(default=None, repr=False)

    KINDS = ("classical_momentum_transfer", "classical_total", "quantum_total",
             "quantum_momentum_transfer")

    def __post_init__(self):
        e = np.asarray(self.energies, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if e.shape != v.shape:
            raise ValueError("energies and values must have the same length")
        if np.any(v < 0):
            raise ValueError("cross-sections must be non-negative")
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown cross-section kind {self.kind!r}")
        object.__setattr__(self, "energies", e)
        object.__setattr__(self, "values", v)

    def __call__(self, energy):
        """Log-log interpolation of the tabulated curve."""
        e = np.asarray(energy, dtype=float)
        lv = np.log(np.maximum(self.values, 1e-300))
        return np.exp(np.interp(np.log(e), np.log(self.energies), lv))

    def dominant_partial_wave(self) -> np.ndarray | None:
        if self.partials is None:
            return None
        return np.argmax(self.partials, axis=1)

    def write_csv(self, path):
        key, val = _convergence_param(self.metadata)
        vals = np.broadcast_to(np.asarray(val, dtype=object), self.energies.shape)
        rows = [(e / (KB * MICROKELVIN), s, self.kind, v)
                for e, s, v in zip(self.energies, self.values, vals)]
        return write_csv(path, ["energy_uK", "sigma_m2", "kind", key], rows)


def _convergence_param(meta):
    for key in ("l_max", "b_max"):
        if key in meta:
            return key, meta[key]
    return "l_max", ""


@dataclass(frozen=True)
class Resonance:
    energy: float
    l: int
    width: float
    peak_sigma: float

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError("resonance width must be > 0")
        if self.l < 0:
            raise ValueError("partial wave must be >= 0")

    @property
    def energy_uK(self) -> float:
        return self.energy / (KB * MICROKELVIN)

    @property
    def width_uK(self) -> float:
        return self.width / (KB * MICROKELVIN)


def write_resonances(resonances, path):
    rows = [(r.energy_uK, r.l, r.width_uK, r.peak_sigma) for r in resonances]
    return write_csv(path, ["E_res_uK", "l", "width_uK", "peak_sigma_m2"], rows)


def screening_length(potential: RadialPotential) -> float | None:
    mus = [t.screening_length for t in potential.terms if isinstance(t, YukawaTerm)]
    return max(mus) if mus else None


def reduced_mass(m1: float, m2: float) -> float:
    return m1 * m2 / (m1 + m2)


# --------------------------------------------------------------------------
# classical


def _gl_panels(edges, nodes=GL_NODES):
    x, w = np.polynomial.legendre.leggauss(nodes)
    edges = np.asarray(edges, dtype=float)
    lo, hi = edges[:-1, None], edges[1:, None]
    pts = 0.5 * (hi - lo) * x[None, :] + 0.5 * (hi + lo)
    wts = 0.5 * (hi - lo) * w[None, :]
    return pts.ravel(), wts.ravel()


def _phi_rule(nodes=GL_NODES, far=40, near=40):
    """Quadrature on φ ∈ (0, π/2) for w = r₀/r = sin φ, with panels refined
    geometrically toward r → ∞ (w → 0) and toward the turning point (w → 1)."""
    w_edges = np.concatenate((
        [0.0],
        2.0 ** -np.arange(far, 0, -1.0),
        1.0 - 2.0 ** -np.arange(2, near + 1.0),
        [1.0],
    ))
    return _gl_panels(np.arcsin(np.unique(w_edges)), nodes)


def _turning_points(potential, energy, b, r_far, scan_points=4000):
    """Outermost root of F(r) = 1 − b²/r² − U(r)/E for each b.

    Returns (r0, wall) where ``wall`` marks impact parameters with no
    classical turning point outside the inner edge (hard reflection there).
    """
    r_lo = potential.inner_start()
    if r_lo <= 0:
        r_lo = 1e-15
    grid = np.geomspace(r_lo, r_far, scan_points)
    u_over_e = np.asarray(potential(grid)) / energy
    r0 = np.empty_like(b)
    wall = np.zeros(b.shape, dtype=bool)
    for sl in chunked(np.arange(len(b)), max(1, len(b) // 256)):
        bb = b[sl][:, None]
        f = 1.0 - (bb / grid[None, :]) ** 2 - u_over_e[None, :]
        neg = f < 0
        has = neg.any(axis=1)
        last = np.where(has, grid.size - 1 - np.argmax(neg[:, ::-1], axis=1), 0)
        lo = grid[np.minimum(last, grid.size - 2)]
        hi = grid[np.minimum(last + 1, grid.size - 1)]
        bsl = b[sl]
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            fm = 1.0 - (bsl / mid) ** 2 - np.asarray(potential(mid)) / energy
            lo = np.where(fm < 0, mid, lo)
            hi = np.where(fm < 0, hi, mid)
            if np.all(hi - lo <= 4e-16 * hi):
                break
        r0[sl] = np.where(has, hi, r_lo)
        wall[sl] = ~has
        if np.any(has & (last >= grid.size - 1)):
            raise ConvergenceError(
                "turning point lies beyond the scan range; increase r_far "
                f"(r_far = {r_far:.3e} m)"
            )
    return r0, wall


def deflection_angle(spec: CollisionSpec, b, r_far: float | None = None,
                     return_turning_points: bool = False):
    """Classical deflection angle χ(b) in rad (vectorized over ``b``).

    χ = π − 2b∫_{r₀}^∞ dr /(r²√(1 − b²/r² − U/E)), evaluated in the variable
    sin φ = r₀/r, which removes the inverse-square-root singularity at the
    turning point.
    """
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if np.any(b < 0):
        raise ValueError("impact parameters must be >= 0")
    pot, E = spec.potential, spec.energy
    if r_far is None:
        mu = screening_length(pot) or 0.0
        r_far = max(10.0 * float(np.max(b)), 1e3 * pot.domain_min, 50.0 * mu, 1e-9)
    r0, wall = _turning_points(pot, E, b, r_far)
    phi, wts = _phi_rule()
    sphi = np.sin(phi)
    cphi = np.cos(phi)
    # F at the inner point: zero at a turning point, positive at a reflecting wall
    f0 = np.where(wall, 1.0 - (b / r0) ** 2 - np.asarray(pot(r0)) / E, 0.0)
    u0 = np.asarray(pot(r0)) / E
    chi = np.empty_like(b)
    for sl in chunked(np.arange(len(b)), max(1, len(b) // 64)):
        rr = r0[sl][:, None] / sphi[None, :]
        du = np.asarray(pot(rr.ravel())).reshape(rr.shape) / E - u0[sl][:, None]
        # F(r) − F(r₀) = (b/r₀)² cos²φ − (U(r) − U(r₀))/E, free of cancellation in 1 − b²/r²
        f = f0[sl][:, None] + (b[sl] / r0[sl])[:, None] ** 2 * cphi[None, :] ** 2 - du
        bad = f < -1e-9 * np.maximum(1.0, np.abs(du))
        if np.any(bad):
            raise ConvergenceError(
                "classically forbidden point beyond the located turning point "
                f"(b = {b[sl][np.any(bad, axis=1)][0]:.4e} m); refine the turning-point scan"
            )
        f = np.maximum(f, np.finfo(float).tiny)
        integral = (cphi[None, :] / np.sqrt(f)) @ wts
        chi[sl] = math.pi - 2.0 * b[sl] / r0[sl] * integral
    if return_turning_points:
        return chi, r0, wall
    return chi


def _b_rule(b_max, b_min, nodes=GL_NODES):
    edges = np.concatenate(([0.0], np.geomspace(b_min, b_max, int(math.ceil(math.log2(b_max / b_min))) + 1)))
    return _gl_panels(edges, nodes)


def _default_b_max(potential):
    mu = screening_length(potential)
    return 10.0 * mu if mu else 1e3 * max(potential.domain_min, 1e-9)


def momentum_transfer_cross_section(spec: CollisionSpec, b_max: float | None = None,
                                    check: bool = True, tol: float = 0.01) -> float:
    """σ_mt = 2π∫₀^{b_max}(1 − cos χ) b db in m².

    With ``check`` the integral is repeated with 2·b_max; a relative change
    above ``tol`` raises :class:`ConvergenceError`.
    """
    return _sigma_classical(spec, b_max, check, tol, "momentum_transfer")[0]


def classical_total_cross_section(spec: CollisionSpec, chi_min: float = 0.01,
                                  b_max: float | None = None) -> float:
    """Area of impact parameters deflected by more than ``chi_min`` rad.

    The boundaries b_i where |χ| crosses ``chi_min`` are root-found, and the
    area is π Σ ±b_i² (entering minus leaving the deflected set).
    """
    b_max = b_max or _default_b_max(spec.potential)
    b_min = _b_min(spec.potential, b_max)
    b = np.geomspace(b_min, b_max, 400)
    g = np.abs(deflection_angle(spec, b)) - chi_min
    area = math.pi * b_min**2 if g[0] > 0 else 0.0
    f = lambda x: abs(float(deflection_angle(spec, np.array([x]))[0])) - chi_min
    for i in np.where(np.sign(g[:-1]) != np.sign(g[1:]))[0]:
        root = optimize.brentq(f, b[i], b[i + 1], xtol=1e-12 * b[i + 1], rtol=1e-12)
        area += math.pi * root**2 * (1.0 if g[i] > 0 else -1.0)
    if g[-1] > 0:
        raise ConvergenceError(
            f"b_max criterion failed: |chi| = {g[-1] + chi_min:.3e} rad > chi_min at "
            f"b_max = {b_max:.3e} m"
        )
    return area


def _b_min(potential, b_max):
    base = potential.domain_min if potential.domain_min > 0 else b_max * 1e-6
    return min(base, b_max) * 1e-3


def _sigma_classical(spec, b_max, check, tol, kind):
    b_max = b_max or _default_b_max(spec.potential)
    b_min = _b_min(spec.potential, b_max)
    b_hi = 2.0 * b_max if check else b_max
    b, w = _b_rule(b_hi, b_min)
    chi = deflection_angle(spec, b)
    integrand = 2.0 * math.pi * (1.0 - np.cos(chi)) * b * w
    inner = b <= b_max * (1 + 1e-12)
    sigma = float(np.sum(integrand[inner]))
    if check:
        sigma2 = float(np.sum(integrand))
        change = abs(sigma2 - sigma) / max(abs(sigma2), 1e-300)
        if change > tol:
            raise ConvergenceError(
                f"b_max criterion failed: doubling b_max = {b_max:.3e} m changes sigma_mt by "
                f"{100 * change:.2f}% (> {100 * tol:.2f}%)"
            )
    return sigma, b_max


def classical_cross_section_curve(potential, reduced_mass, energies, b_max=None,
                                  threads: int = 1, check: bool = True,
                                  kind: str = "classical_momentum_transfer",
                                  chi_min: float = 0.01) -> CrossSectionCurve:
    energies = np.asarray(energies, dtype=float)
    b_max = b_max or _default_b_max(potential)
    if kind == "classical_momentum_transfer":
        def one(e):
            return _sigma_classical(CollisionSpec(potential, reduced_mass, e), b_max, check,
                                    0.01, "momentum_transfer")[0]
        meta = {"b_max": b_max}
    elif kind == "classical_total":
        def one(e):
            return classical_total_cross_section(CollisionSpec(potential, reduced_mass, e),
                                                 chi_min, b_max)
        meta = {"b_max": b_max, "chi_min": chi_min}
    else:
        raise ConfigError(f"unknown classical cross-section kind {kind!r}")
    values = ordered_map(one, list(energies), threads)
    return CrossSectionCurve(energies, np.array(values), kind, meta)


# --------------------------------------------------------------------------
# log-derivative propagation


@dataclass(frozen=True)
class PropagationGrid:
    """Chain of uniform sectors (r0, h, n_steps) with even step counts."""

    sectors: tuple[tuple[float, float, int], ...]

    @property
    def r_start(self) -> float:
        return self.sectors[0][0]

    @property
    def r_end(self) -> float:
        r0, h, n = self.sectors[-1]
        return r0 + h * n

    @property
    def n_steps(self) -> int:
        return sum(s[2] for s in self.sectors)

    @classmethod
    def uniform(cls, r_start, r_end, n_steps):
        n = int(n_steps) + (int(n_steps) % 2)
        return cls(((float(r_start), (r_end - r_start) / n, n),))

    @classmethod
    def from_radial_grid(cls, grid):
        return cls.uniform(grid.r_min, grid.r_max, grid.n_steps)

    def refined(self, factor: int = 2) -> "PropagationGrid":
        """Same sectors with the step divided by ``factor``."""
        return PropagationGrid(tuple((r0, h / factor, n * factor) for r0, h, n in self.sectors))

    def extended(self, r_new_end, potential, reduced_mass, k2_max, ll_max, ppw=40.0):
        """The same sectors followed by new ones out to ``r_new_end``."""
        extra = _build_sectors(potential, reduced_mass, self.r_end, r_new_end, k2_max, ll_max,
                               ppw, first_offset=None)
        return PropagationGrid(self.sectors + extra)


def _build_sectors(potential, reduced_mass, r_start, r_end, k2_max, ll_max, ppw=40.0,
                   first_offset=None, growth=1.25, min_steps=2):
    c = 2.0 * reduced_mass / HBAR**2
    span = r_end - r_start
    d0 = first_offset or min(1e-3 * r_start if r_start > 0 else span * 1e-6, span / 4)
    offsets = [0.0]
    d = d0
    while d < span:
        offsets.append(d)
        d *= growth
    offsets.append(span)
    # jumps in U sit on sector boundaries so each sector sees a smooth integrand
    offsets.extend(e - r_start for e in potential.discontinuities if r_start < e < r_end)
    offsets = np.unique(np.asarray(offsets))
    sectors = []
    for a, b in zip(offsets[:-1], offsets[1:]):
        r0 = r_start + a
        width = b - a
        probe = r0 + width * np.linspace(0, 1, 9)
        if probe[0] <= potential.domain_min and not potential.closed_domain:
            probe[0] = potential.inner_start()
        vq = np.abs(c * np.asarray(potential(probe)))
        qmax = k2_max + float(np.max(vq)) + ll_max / float(np.min(probe)) ** 2
        n = int(math.ceil(width * math.sqrt(qmax) * ppw / (2.0 * math.pi)))
        n = max(min_steps, n + (n % 2))
        sectors.append((float(r0), float(width / n), n))
    return tuple(sectors)


def propagation_grid(potential: RadialPotential, reduced_mass: float, e_max: float, l_max: int,
                     r_start: float, r_end: float, points_per_wavelength: float = 40.0
                     ) -> PropagationGrid:
    """Sector grid resolving ``points_per_wavelength`` steps per local wavelength
    at the largest energy and centrifugal term, with sector widths growing
    geometrically away from ``r_start``."""
    k2 = 2.0 * reduced_mass * e_max / HBAR**2
    ll = l_max * (l_max + 1.0)
    return PropagationGrid(_build_sectors(potential, reduced_mass, r_start, r_end, k2, ll,
                                          points_per_wavelength))


def inner_wall(potential: RadialPotential, cap: float = KB * 1.0) -> float:
    """Hard-wall radius for scattering: the domain edge for a closed domain;
    otherwise the outermost radius near the surface where U drops to −``cap``."""
    if potential.closed_domain:
        return potential.domain_min
    a = potential.domain_min
    x = np.geomspace(1e-12, 10.0, 4000) * a
    u = np.asarray(potential(a + x))
    deep = np.where(u < -cap)[0]
    if len(deep) == 0:
        return float(potential.inner_start())
    i = deep[-1]
    if i + 1 >= len(x):
        raise DomainError("potential is below the wall cap throughout the scan range")
    f = lambda r: float(potential(r)) + cap
    return float(optimize.brentq(f, a + x[i], a + x[i + 1], xtol=1e-14 * a))


def _riccati(l, x):
    j = spherical_jn(l, x)
    jp = spherical_jn(l, x, derivative=True)
    y = spherical_yn(l, x)
    yp = spherical_yn(l, x, derivative=True)
    return x * j, j + x * jp, x * y, y + x * yp


def _tan_delta(y, k, l, r):
    x = k * r
    jh, jhp, nh, nhp = _riccati(l, x)
    return (y * jh - k * jhp) / (y * nh - k * nhp)


class _Propagator:
    """Sector chain with the potential pre-sampled; propagates channel batches."""

    def __init__(self, potential, reduced_mass, grid: PropagationGrid):
        self.potential = potential
        self.mass = reduced_mass
        self.grid = grid
        c = 2.0 * reduced_mass / HBAR**2
        self.vq = []
        for r0, h, n in grid.sectors:
            r = r0 + h * np.arange(n + 1)
            # sample the end points from inside the sector so a step placed on
            # a sector boundary is seen with its one-sided limits
            r[0] += 1e-7 * h
            r[-1] -= 1e-7 * h
            if r[0] <= potential.domain_min and not potential.closed_domain:
                r[0] = potential.inner_start()
            self.vq.append(np.ascontiguousarray(c * np.asarray(potential(r), dtype=float)))

    def logderiv(self, k2, ll, start=0, stop=None, y0=None, nodes0=None):
        """Log-derivative and accumulated node count after sectors [start, stop).

        Without ``y0`` the chain starts from a hard wall, or, when the domain
        reaches the origin, from the regular solution u ~ r^(l+1), whose
        log-derivative (l+1)/r avoids the −k·r_start shift a wall would add.
        """
        if y0 is not None:
            y = np.asarray(y0, dtype=float)
        elif self.potential.domain_min == 0.0 and self.grid.r_start > 0.0:
            l = 0.5 * (np.sqrt(1.0 + 4.0 * np.asarray(ll, dtype=float)) - 1.0)
            y = (l + 1.0) / self.grid.r_start
        else:
            y = np.full(len(k2), HARD_WALL_LOGDERIV)
        nodes = np.zeros(len(k2), dtype=np.int64) if nodes0 is None else nodes0.copy()
        for (r0, h, n), vq in zip(self.grid.sectors[start:stop], self.vq[start:stop]):
            y, dn = kernels.logderiv_propagate(vq, r0, h, k2, ll, y)
            nodes += dn
        return y, nodes


def _absolute_phase(d_mod, y, nodes, k, l, r):
    """Lift δ mod π onto the branch selected by the wavefunction's node count.

    The Prüfer phase of ψ at r is π·nodes + arccot(y/k); that of the free
    Riccati-Bessel function is ≈ kr − lπ/2 + l(l+1)/(2kr). Their difference
    fixes δ to within π/2, which is enough to choose the branch.
    """
    theta = math.pi * nodes + (0.5 * math.pi - np.arctan(y / k))
    x = k * r
    approx = theta - (x - 0.5 * math.pi * l + l * (l + 1) / (2.0 * x))
    return d_mod + math.pi * np.round((approx - d_mod) / math.pi)


def _wrap(d):
    """Map onto (−π/2, π/2]."""
    return -((-d + 0.5 * math.pi) % math.pi - 0.5 * math.pi)


def _match_phases(potential, reduced_mass, grid, n_base, k, l_values, check, absolute,
                  threads):
    """δ matched at the end of sector ``n_base − 1`` and, with ``check``, at
    the end of the grid. Returns (δ(r1), δ(r2), r1) as flat channel arrays."""
    prop = _Propagator(potential, reduced_mass, grid)
    r0, h, n = grid.sectors[n_base - 1]
    r1 = r0 + h * n
    kk = np.repeat(k, len(l_values))
    ll_int = np.tile(l_values, len(k))
    k2 = kk**2
    ll = ll_int * (ll_int + 1.0)

    def run(idx):
        y1, n1 = prop.logderiv(k2[idx], ll[idx], 0, n_base)
        d1 = np.arctan(_tan_delta(y1, kk[idx], ll_int[idx], r1))
        if absolute:
            d1 = _absolute_phase(d1, y1, n1, kk[idx], ll_int[idx], r1)
        if not check:
            return d1, d1
        y2, _ = prop.logderiv(k2[idx], ll[idx], n_base, None, y1, n1)
        return d1, np.arctan(_tan_delta(y2, kk[idx], ll_int[idx], grid.r_end))

    n_threads = max(1, threads)
    parts = ordered_map(run, chunked(np.arange(len(kk)), n_threads * 4 if n_threads > 1 else 1),
                        n_threads)
    return (np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]), r1)


def phase_shifts(potential: RadialPotential, reduced_mass: float, energies, l_values,
                 grid: PropagationGrid | None = None, r_max: float | None = None,
                 check_r_max: bool = True, tol: float = 1e-3, threads: int = 1,
                 strict: bool = True, ppw: float = 60.0, absolute: bool = False,
                 extrapolate: bool | None = None) -> np.ndarray:
    """Phase shifts δ_l(E), shape (len(energies), len(l_values)).

    By default δ is reduced modulo π onto (−π/2, π/2]. With ``absolute`` the
    branch is fixed by the node count of the propagated wavefunction, so
    δ_l(E) is continuous in E even across resonances narrower than the
    energy grid (and δ → −kR for a hard sphere of radius R).

    With ``extrapolate`` the propagation is repeated with half the step and
    the two results are Richardson-combined, removing the O(h⁴) error of
    the log-derivative recursion. Without it the phase error grows with the
    number of wavelengths propagated (≈10⁻² rad over 10⁴ wavelengths at the
    default 60 points per wavelength). It defaults to ``check_r_max``, since
    that drift alone would otherwise exceed ``tol``.

    With ``check_r_max`` the propagation continues to 2·r_max and the
    phase shifts are recomputed there; a change above ``tol`` rad raises
    :class:`ConvergenceError` (``strict``) or warns.
    """
    energies = np.atleast_1d(np.asarray(energies, dtype=float))
    l_values = np.atleast_1d(np.asarray(l_values, dtype=int))
    if extrapolate is None:
        extrapolate = check_r_max
    if np.any(energies <= 0):
        raise ConfigError("collision energies must be > 0")
    k = np.sqrt(2.0 * reduced_mass * energies) / HBAR
    if grid is None:
        # for r = 0 domains the regular solution ~ r^(l+1) makes a tiny core negligible
        grid = scan_grid(potential, reduced_mass, energies, int(l_values.max()), r_max, ppw)
    n_base = len(grid.sectors)
    if check_r_max:
        k2_max = float(k.max() ** 2)
        ll_max = float(l_values.max() * (l_values.max() + 1))
        grid = grid.extended(2.0 * grid.r_end - grid.r_start, potential, reduced_mass, k2_max,
                             ll_max, ppw)
    args = (potential, reduced_mass)
    d1, d2, r1 = _match_phases(*args, grid, n_base, k, l_values, check_r_max,
                               absolute or extrapolate, threads)
    if extrapolate:
        f1, f2, _ = _match_phases(*args, grid.refined(), n_base, k, l_values, check_r_max, True,
                                  threads)
        d1 = f1 + (f1 - d1) / 15.0
        d2 = f2 + _wrap(f2 - d2) / 15.0
        if not absolute:
            d1 = _wrap(d1)
    if check_r_max:
        change = np.abs(_wrap(d2 - d1))
        if np.any(change > tol):
            i = int(np.argmax(change))
            msg = (
                f"r_max criterion failed: doubling r_max = {r1:.3e} m shifts "
                f"delta_{l_values[i % len(l_values)]} at "
                f"E = {energies[i // len(l_values)] / (KB * MICROKELVIN):.4g} uK by "
                f"{change[i]:.2e} rad (> {tol:.0e})"
            )
            if strict:
                raise ConvergenceError(msg)
            warnings.warn(msg, ConvergenceWarning)
    return d1.reshape(len(energies), len(l_values))


def default_r_max(potential, k_min, l_max):
    """Matching radius: beyond the screening range and the centrifugal region."""
    mu = screening_length(potential) or 0.0
    return max(30.0 * mu, 100.0 * potential.domain_min, 3.0 * (l_max + 10) / k_min,
               20.0 * 2 * math.pi / k_min)


def scan_grid(potential, reduced_mass, energies, l_max, r_max=None, ppw=60.0):
    """Propagation grid valid for every energy in ``energies`` up to ``l_max``."""
    energies = np.asarray(energies, dtype=float)
    k_min = math.sqrt(2.0 * reduced_mass * float(energies.min())) / HBAR
    if r_max is None:
        r_max = default_r_max(potential, k_min, l_max)
    r_start = inner_wall(potential)
    if r_start <= 0:
        r_start = 1e-9 * r_max
    return propagation_grid(potential, reduced_mass, float(energies.max()), l_max, r_start,
                            r_max, ppw)


def log_derivative_phase_shift(spec: CollisionSpec, l: int, grid=None, **kwargs) -> float:
    """δ_l at one energy (mod π, in (−π/2, π/2]), step-extrapolated by default."""
    if grid is not None and not isinstance(grid, PropagationGrid):
        grid = PropagationGrid.from_radial_grid(grid)
    return float(phase_shifts(spec.potential, spec.reduced_mass, [spec.energy], [l], grid=grid,
                              **kwargs)[0, 0])


def unwrap_phases(delta, axis=0):
    """Continuous δ_l(E) along ``axis``, anchored at the highest energy."""
    d = np.flip(np.asarray(delta, dtype=float), axis=axis)
    d = np.unwrap(d, period=math.pi, axis=axis)
    return np.flip(d, axis=axis)


def partial_cross_sections(k, delta, l_values):
    """(4π/k²)(2l+1) sin²δ_l for each energy (rows) and partial wave (columns)."""
    l_values = np.asarray(l_values)
    return 4.0 * math.pi / np.asarray(k)[:, None] ** 2 * (2 * l_values + 1)[None, :] * np.sin(delta) ** 2


def cross_sections_from_phases(k, delta, l_values):
    """Total and momentum-transfer cross-sections from a phase-shift table."""
    k = np.asarray(k)
    total = partial_cross_sections(k, delta, l_values).sum(axis=1)
    l_values = np.asarray(l_values)
    d = delta[:, 1:] - delta[:, :-1]
    mt = 4.0 * math.pi / k**2 * np.sum((l_values[:-1] + 1)[None, :] * np.sin(d) ** 2, axis=1)
    return total, mt


def total_quantum_cross_section(spec: CollisionSpec, l_max: int | None = None,
                                tail_tol: float = 1e-4, l_cap: int = 400, **kwargs) -> float:
    """σ = (4π/k²) Σ (2l+1) sin²δ_l.

    Without ``l_max`` partial waves are added in blocks until the last one
    contributes less than ``tail_tol`` of the running sum; with an explicit
    ``l_max`` a failing tail criterion only warns.
    """
    return _quantum_sigma(spec, l_max, tail_tol, l_cap, **kwargs)[0]


def quantum_momentum_transfer_cross_section(spec: CollisionSpec, l_max: int | None = None,
                                            tail_tol: float = 1e-4, l_cap: int = 400,
                                            **kwargs) -> float:
    """σ_mt = (4π/k²) Σ (l+1) sin²(δ_l − δ_{l+1})."""
    return _quantum_sigma(spec, l_max, tail_tol, l_cap, **kwargs)[1]


def _quantum_sigma(spec, l_max, tail_tol, l_cap, **kwargs):
    k = spec.wavenumber
    pot, mu, E = spec.potential, spec.reduced_mass, spec.energy
    if l_max is not None:
        ls = np.arange(l_max + 2)
        d = phase_shifts(pot, mu, [E], ls, **kwargs)
        total, mt = cross_sections_from_phases(np.array([k]), d, ls)
        partial = partial_cross_sections(np.array([k]), d, ls)[0]
        if partial[l_max] > tail_tol * partial[: l_max + 1].sum():
            warnings.warn(f"l_max = {l_max} fails the partial-wave tail criterion",
                          ConvergenceWarning)
        return float(partial[: l_max + 1].sum()), float(mt[0])
    block = 16
    top = block
    while True:
        ls = np.arange(top + 1)
        d = phase_shifts(pot, mu, [E], ls, **kwargs)
        partial = partial_cross_sections(np.array([k]), d, ls)[0]
        running = np.cumsum(partial)
        ok = np.where(partial < tail_tol * np.maximum(running, 1e-300))[0]
        # require a converged run of several consecutive partial waves
        for i in ok:
            if i + 3 <= top and np.all(partial[i:i + 4] < tail_tol * running[i:i + 4]):
                total, mt = cross_sections_from_phases(np.array([k]), d[:, : i + 2], ls[: i + 2])
                return float(running[i]), float(mt[0])
        if top >= l_cap:
            raise ConvergenceError(f"partial-wave sum not converged by l = {l_cap}")
        top = min(2 * top, l_cap)


def quantum_cross_section_curve(potential, reduced_mass, energies, l_max: int | None = None,
                                kind: str = "quantum_total", threads: int = 1,
                                strict: bool = True, tail_tol: float = 1e-4,
                                l_cap: int = 6000, block: int = 64,
                                **kwargs) -> CrossSectionCurve:
    """σ(E) on an energy grid.

    With a fixed ``l_max`` all energies share one batched propagation over
    l = 0..l_max+1 and a failing tail criterion (last partial wave above
    ``tail_tol`` of the sum) raises or warns. Without it every energy adds
    blocks of partial waves until four consecutive ones each fall below
    ``tail_tol`` of the running sum while the node-resolved |δ_l| is below
    1/2 and falling (or below 10⁻⁶ rad). The phase condition keeps a sin²δ_l that merely passes
    through zero (δ_l near a multiple of π inside the interaction range) from
    ending the sum early. The chosen l_max is per energy and ``partials`` is
    zero-padded.
    """
    energies = np.asarray(energies, dtype=float)
    k = np.sqrt(2.0 * reduced_mass * energies) / HBAR
    if l_max is not None:
        ls = np.arange(l_max + 2)
        d = phase_shifts(potential, reduced_mass, energies, ls, threads=threads, strict=strict,
                         **kwargs)
        partial = partial_cross_sections(k, d[:, : l_max + 1], ls[: l_max + 1])
        total, mt = cross_sections_from_phases(k, d, ls)
        tail = partial[:, -1] / np.maximum(partial.sum(axis=1), 1e-300)
        if np.any(tail > tail_tol):
            msg = (f"l_max = {l_max} fails the tail criterion at "
                   f"{int(np.sum(tail > tail_tol))} of {len(energies)} energies")
            if strict:
                raise ConvergenceError(msg)
            warnings.warn(msg, ConvergenceWarning)
        values = partial.sum(axis=1) if kind == "quantum_total" else mt
        return CrossSectionCurve(energies, values, kind, {"l_max": l_max}, partial)

    # the r_max test doubles the propagation, so it runs on the first block only
    check = kwargs.pop("check_r_max", True)
    rows, l_used = [], []
    for e, kk in zip(energies, k):
        deltas = np.empty(0)
        while True:
            top = len(deltas)
            if top >= l_cap:
                raise ConvergenceError(
                    f"partial-wave tail criterion not met by l = {l_cap} at "
                    f"E = {e / (KB * MICROKELVIN):.4g} uK")
            ls = np.arange(top, min(top + block, l_cap + 1))
            deltas = np.concatenate((deltas, phase_shifts(
                potential, reduced_mass, [e], ls, threads=threads, strict=strict,
                absolute=True, check_r_max=check and top == 0, extrapolate=True,
                **kwargs)[0]))
            ls = np.arange(len(deltas))
            partial = partial_cross_sections(np.array([kk]), deltas[None, :], ls)[0]
            mag = np.abs(deltas)
            # phases at the propagation noise floor count as falling
            falling = np.concatenate(([False], (mag[1:] <= mag[:-1]) | (mag[1:] < PHASE_FLOOR)))
            small = ((partial < tail_tol * np.maximum(np.cumsum(partial), 1e-300))
                     & (mag < 0.5) & falling)
            run = np.convolve(small, np.ones(4, dtype=int), "valid") == 4
            hits = np.where(run[: len(deltas) - 4])[0]  # keep one δ beyond for σ_mt
            if len(hits):
                lm = int(hits[0]) + 3
                break
        rows.append(deltas[: lm + 2])
        l_used.append(lm)
    n = max(l_used) + 1
    partials = np.zeros((len(energies), n))
    values = np.empty(len(energies))
    for i, (d, lm) in enumerate(zip(rows, l_used)):
        ls = np.arange(lm + 2)
        p = partial_cross_sections(k[i:i + 1], d[None, : lm + 1], ls[: lm + 1])[0]
        partials[i, : lm + 1] = p
        total, mt = cross_sections_from_phases(k[i:i + 1], d[None, :], ls)
        values[i] = p.sum() if kind == "quantum_total" else mt[0]
    return CrossSectionCurve(energies, values, kind, {"l_max": np.array(l_used)}, partials)


# --------------------------------------------------------------------------
# resonances


def _refine_energy_grid(potential, mass, energies, l, max_depth=40, **kw):
    """Node-resolved δ_l on a grid refined until neighbours differ by < π/4."""
    e = np.asarray(energies, dtype=float)
    d = phase_shifts(potential, mass, e, [l], absolute=True, **kw)[:, 0]
    for _ in range(max_depth):
        jump = np.abs(np.diff(d)) > 0.25 * math.pi
        if not jump.any():
            break
        idx = np.where(jump)[0]
        mids = np.sqrt(e[idx] * e[idx + 1])
        dm = phase_shifts(potential, mass, mids, [l], absolute=True, **kw)[:, 0]
        e = np.concatenate((e, mids))
        d = np.concatenate((d, dm))
        order = np.argsort(e)
        e, d = e[order], d[order]
    return e, d


def resonance_scan(potential: RadialPotential, reduced_mass: float, energies, l_values,
                   min_rise: float = 0.6 * math.pi, delay_threshold: float = 1.0,
                   **kwargs) -> list[Resonance]:
    """Resonances where δ_l(E) rises steeply by about π.

    For every partial wave δ_l is tracked on an adaptively refined energy
    grid. Regions where the dimensionless time delay E·dδ/dE exceeds
    ``delay_threshold`` are candidates; a candidate whose total rise exceeds
    ``min_rise`` is a resonance. Its energy is where δ crosses π/2 (mod π)
    inside the rise, the maximum of sin²δ_l; its width is the distance
    between the neighbouring π/4 and 3π/4 crossings. All crossings are
    root-found on δ_l(E). The propagation drift is smooth in E and hardly
    moves crossings, so the r_max check (and the step extrapolation it
    implies) is off unless requested.
    """
    energies = np.sort(np.asarray(energies, dtype=float))
    kwargs.setdefault("strict", False)
    kwargs.setdefault("check_r_max", False)
    if kwargs.get("grid") is None:
        # one grid for every evaluation keeps refined values on the same branch
        kwargs["grid"] = scan_grid(potential, reduced_mass, energies, int(np.max(l_values)),
                                   kwargs.pop("r_max", None), kwargs.get("ppw", 60.0))
    found = []
    for l in np.atleast_1d(l_values):
        l = int(l)
        e, d = _refine_energy_grid(potential, reduced_mass, energies, l, **kwargs)
        em = np.sqrt(e[1:] * e[:-1])
        tau = em * np.diff(d) / np.diff(e)
        hot = tau > delay_threshold
        if not hot.any():
            continue
        # contiguous candidate regions, widened to where the delay has decayed
        starts = np.where(hot & ~np.concatenate(([False], hot[:-1])))[0]
        ends = np.where(hot & ~np.concatenate((hot[1:], [False])))[0]
        for s, t in zip(starts, ends):
            i0, i1 = s, t + 1
            while i0 > 0 and tau[i0 - 1] > 0.25 * delay_threshold:
                i0 -= 1
            while i1 < len(tau) and tau[i1] > 0.25 * delay_threshold:
                i1 += 1
            rise = d[i1] - d[i0]
            if rise < min_rise:
                continue
            # the crossing of π/2 (mod π) inside the rise, i.e. the sin²δ maximum
            mid = 0.5 * math.pi + math.pi * math.ceil((d[i0] - 0.5 * math.pi) / math.pi)
            if mid > d[i1]:
                continue
            levels = {}
            for key, target in (("lo", mid - 0.25 * math.pi), ("mid", mid),
                                ("hi", mid + 0.25 * math.pi)):
                j = _crossing_index(d, target, i0, i1)
                levels[key] = None if j is None else _solve_phase(
                    potential, reduced_mass, l, target, e[j - 1], e[j], d[j - 1], d[j], kwargs)
            if None in levels.values():
                continue
            width = levels["hi"] - levels["lo"]
            if not width > 0:
                continue
            found.append((levels["mid"], l, width))
    found.sort(key=lambda x: (x[0], x[1]))
    out = []
    lmax = int(np.max(l_values))
    for e_res, l, width in found:
        ls = np.arange(lmax + 1)
        d = phase_shifts(potential, reduced_mass, [e_res], ls, **kwargs)
        k = np.array([math.sqrt(2.0 * reduced_mass * e_res) / HBAR])
        peak = float(partial_cross_sections(k, d, ls).sum())
        out.append(Resonance(float(e_res), l, float(width), peak))
    return out


def _crossing_index(d, target, i0, i1):
    """Index j with d[j−1] < target <= d[j], nearest the rise [i0, i1]."""
    up = np.where((d[:-1] < target) & (d[1:] >= target))[0] + 1
    if len(up) == 0:
        return None
    centre = 0.5 * (i0 + i1)
    return int(up[np.argmin(np.abs(up - centre))])


def _solve_phase(potential, mass, l, target, e_lo, e_hi, d_lo, d_hi, kw):
    def g(e):
        return _wrap(float(phase_shifts(potential, mass, [e], [l], **kw)[0, 0]) - target)

    g_lo, g_hi = g(e_lo), g(e_hi)
    if g_lo == 0:
        return e_lo
    if g_hi == 0:
        return e_hi
    if g_lo * g_hi > 0:
        # fall back to linear interpolation on the tracked branch
        return e_lo + (target - d_lo) * (e_hi - e_lo) / (d_hi - d_lo)
    return optimize.brentq(g, e_lo, e_hi, xtol=1e-14 * e_hi, rtol=1e-12)
