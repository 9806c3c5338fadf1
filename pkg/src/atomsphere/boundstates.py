"""Radial bound states by Numerov shooting.

Every eigenvalue in an energy window is bracketed by counting the nodes of
the outward solution (a Sturm sequence: the node count at energy E equals
the number of levels below E), then polished by a root search on the
scale-free Wronskian of the outward and inward solutions at a matching
point. Both ends carry Dirichlet conditions, so the eigenvalues are those of
the same discrete problem the node count describes.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.linalg import eigh_tridiagonal

from . import kernels
from .errors import ConfigError, DomainError
from .io import write_csv
from .potentials import RadialPotential, find_well
from .units import HBAR, KB, MICROKELVIN

MIN_STEPS = 1000


@dataclass(frozen=True)
class RadialGrid:
    """Uniform grid r_i = r_min + i·h, i = 0..n_steps."""

    r_min: float
    r_max: float
    n_steps: int

    def __post_init__(self):
        if not self.r_max > self.r_min:
            raise ConfigError("grid needs r_max > r_min")
        if int(self.n_steps) != self.n_steps or self.n_steps < MIN_STEPS:
            raise ConfigError(f"grid needs an integer number of steps >= {MIN_STEPS}")
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @classmethod
    def with_step(cls, r_min, r_max, h):
        """Grid whose step is at most ``h`` (rounded so the span divides evenly)."""
        n = max(MIN_STEPS, int(math.ceil((r_max - r_min) / h - 1e-9)))
        return cls(r_min, r_max, n)

    @property
    def h(self) -> float:
        return (self.r_max - self.r_min) / self.n_steps

    @property
    def r(self) -> np.ndarray:
        return self.r_min + self.h * np.arange(self.n_steps + 1)

    def refined(self, factor: int = 2) -> "RadialGrid":
        return RadialGrid(self.r_min, self.r_max, self.n_steps * factor)


@dataclass(frozen=True)
class BoundState:
    n: int
    energy: float
    wavefunction: np.ndarray = field(repr=False, compare=False)
    grid: RadialGrid = field(repr=False)
    near_threshold: bool = False

    @property
    def energy_uK(self) -> float:
        return self.energy / (KB * MICROKELVIN)

    @property
    def nodes(self) -> int:
        return count_nodes(self.wavefunction)


def _q(potential_values, energy, reduced_mass):
    return (2.0 * reduced_mass / HBAR**2) * (energy - potential_values)


def count_nodes(psi, rel_tol: float = 1e-8) -> int:
    """Interior sign changes, ignoring samples below ``rel_tol``·max|ψ|."""
    psi = np.asarray(psi, dtype=float)
    cut = rel_tol * np.max(np.abs(psi))
    s = np.sign(psi[np.abs(psi) > cut])
    return int(np.count_nonzero(s[1:] != s[:-1]))


def normalize_wavefunction(psi, grid: RadialGrid) -> np.ndarray:
    """Unit trapezoidal norm with the first antinode made positive."""
    psi = np.asarray(psi, dtype=float)
    if psi.shape != (grid.n_steps + 1,):
        raise ValueError("wavefunction length does not match the grid")
    peak = np.max(np.abs(psi))
    if not peak > 0 or not np.isfinite(peak):
        raise DomainError("cannot normalize a wavefunction with zero norm")
    psi = psi / peak
    norm2 = np.trapezoid(psi * psi, dx=grid.h)
    out = psi / math.sqrt(norm2)
    a = np.abs(out)
    big = a > 1e-3 * a.max()
    peaks = np.where(big[1:-1] & (a[1:-1] >= a[:-2]) & (a[1:-1] >= a[2:]))[0]
    i = peaks[0] + 1 if len(peaks) else int(np.argmax(a))
    if out[i] < 0:
        out = -out
    return out


def numerov_integrate(potential: RadialPotential, energy: float, reduced_mass: float,
                      grid: RadialGrid, direction: str = "outward",
                      seed: str = "dirichlet") -> np.ndarray:
    """Raw Numerov solution on ``grid`` (not normalized).

    Outward runs start from ψ(r_min) = 0. Inward runs start at r_max either
    from ψ(r_max) = 0 (``seed='dirichlet'``) or from a decaying exponential
    ``exp(−κ r)`` when the energy is classically forbidden there
    (``seed='decay'``). Values that grow past 1e150 trigger an in-place
    rescaling of the already computed samples.
    """
    q = _q(potential(grid.r), energy, reduced_mass)
    return _numerov(q, grid.h, direction, seed)


def _numerov(q, h, direction="outward", seed="dirichlet"):
    tiny = 1e-10
    if direction == "outward":
        return kernels.numerov_wave(q, h, 0.0, tiny)
    if direction != "inward":
        raise ValueError("direction must be 'outward' or 'inward'")
    rev = np.ascontiguousarray(q[::-1])
    if seed == "decay" and rev[0] < 0:
        kappa = math.sqrt(-rev[0])
        psi = kernels.numerov_wave(rev, h, tiny, tiny * math.exp(kappa * h))
    elif seed in ("decay", "dirichlet"):
        psi = kernels.numerov_wave(rev, h, 0.0, tiny)
    else:
        raise ValueError("seed must be 'dirichlet' or 'decay'")
    return psi[::-1].copy()


def _match_index(q):
    """Outermost classically allowed point, kept away from the grid ends."""
    n = len(q)
    allowed = np.where(q > 0)[0]
    m = int(allowed[-1]) if len(allowed) else n // 2
    return min(max(m, n // 20), n - n // 20 - 2)


def _wronskian(q, h, m):
    out = _numerov(q, h, "outward")
    inn = _numerov(q, h, "inward")
    a0, a1, b0, b1 = out[m], out[m + 1], inn[m], inn[m + 1]
    return (a0 * b1 - a1 * b0) / (math.hypot(a0, a1) * math.hypot(b0, b1)), out, inn


def _assemble(out, inn, m):
    # renormalization during either run can leave one piece near the bottom
    # of the floating-point range; bring both to unit size before matching
    out = out / np.max(np.abs(out[: m + 2]))
    inn = inn / np.max(np.abs(inn[m:]))
    den = inn[m] ** 2 + inn[m + 1] ** 2
    scale = (out[m] * inn[m] + out[m + 1] * inn[m + 1]) / den
    psi = np.empty_like(out)
    psi[: m + 1] = out[: m + 1]
    psi[m + 1:] = scale * inn[m + 1:]
    return psi


class _Problem:
    def __init__(self, u, grid, reduced_mass):
        self.u = u
        self.grid = grid
        self.h = grid.h
        self.c = 2.0 * reduced_mass / HBAR**2

    def q(self, energy):
        return self.c * (energy - self.u)

    def nodes(self, energies):
        energies = np.atleast_1d(np.asarray(energies, dtype=float))
        q = self.c * (energies[:, None] - self.u[None, :])
        return kernels.numerov_nodes(q, self.h)

    def bracket(self, n, lo, hi, c_lo, c_hi, sections=16):
        """Narrow [lo, hi] until its node counts are exactly n and n+1."""
        while not (c_lo == n and c_hi == n + 1):
            e = np.linspace(lo, hi, sections + 1)[1:-1]
            counts = self.nodes(e)
            below = np.where(counts <= n)[0]
            above = np.where(counts >= n + 1)[0]
            if len(below):
                lo, c_lo = e[below[-1]], counts[below[-1]]
            if len(above):
                hi, c_hi = e[above[0]], counts[above[0]]
            if hi - lo <= 4 * np.finfo(float).eps * max(abs(lo), abs(hi)):
                break
        return lo, hi

    def solve(self, n, lo, hi):
        def w(e):
            q = self.q(e)
            return _wronskian(q, self.h, _match_index(q))[0]

        wa, wb = w(lo), w(hi)
        if wa * wb > 0:
            # the Wronskian's sign change sits within the bracket's floating-point
            # resolution; fall back to pure bisection on the node count
            while hi - lo > 1e-15 * max(abs(lo), abs(hi)):
                mid = 0.5 * (lo + hi)
                if self.nodes([mid])[0] <= n:
                    lo = mid
                else:
                    hi = mid
                if mid in (lo, hi):
                    break
            energy = 0.5 * (lo + hi)
        else:
            energy = optimize.brentq(w, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps,
                                     maxiter=400)
        q = self.q(energy)
        m = _match_index(q)
        _, out, inn = _wronskian(q, self.h, m)
        return energy, _assemble(out, inn, m)


def find_bound_states(potential: RadialPotential, reduced_mass: float, grid: RadialGrid,
                      E_window: tuple[float, float] | None = None,
                      max_states: int | None = None, threads: int = 1,
                      well_depth: float | None = None) -> list[BoundState]:
    """All bound states with energies in ``E_window``, sorted by energy.

    The default window is (min U on the grid, 0). An empty list is a valid
    result. ``threads`` > 1 polishes the bracketed levels concurrently; the
    brackets come from a fixed sequence of energies so the result does not
    depend on scheduling.
    """
    if grid.r_min < potential.domain_min or (
        grid.r_min == potential.domain_min and not potential.closed_domain
    ):
        raise DomainError("grid starts below the potential's domain")
    u = np.asarray(potential(grid.r), dtype=float)
    prob = _Problem(u, grid, reduced_mass)
    u_min = float(np.min(u))
    if E_window is None:
        if u_min >= 0:
            return []
        E_window = (u_min, 0.0)
    lo, hi = map(float, E_window)
    lo = max(lo, u_min)
    if not hi > lo:
        return []
    hi_eff = hi - 1e-12 * (hi - lo)
    n_lo, n_hi = (int(v) for v in prob.nodes([lo, hi_eff]))
    levels = list(range(n_lo, n_hi))
    if max_states is not None:
        levels = levels[:max_states]
    if not levels:
        return []
    depth = well_depth if well_depth is not None else -min(u_min, lo)

    def work(n):
        a, b = prob.bracket(n, lo, hi_eff, n_lo, n_hi)
        energy, psi = prob.solve(n, a, b)
        psi = normalize_wavefunction(psi, grid)
        return BoundState(n, energy, psi, grid, abs(energy) < 1e-3 * abs(depth))

    if threads > 1 and len(levels) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            states = list(pool.map(work, levels))
    else:
        states = [work(n) for n in levels]
    return sorted(states, key=lambda s: s.energy)


def fd_eigenvalues(potential: RadialPotential, reduced_mass: float, grid: RadialGrid,
                   E_window: tuple[float, float] | None = None) -> np.ndarray:
    """Eigenvalues of the three-point finite-difference Hamiltonian (Dirichlet ends)."""
    r = grid.r[1:-1]
    u = np.asarray(potential(r), dtype=float)
    t = HBAR**2 / (2.0 * reduced_mass * grid.h**2)
    diag = u + 2.0 * t
    off = np.full(len(r) - 1, -t)
    if E_window is None:
        E_window = (float(np.min(u)), 0.0)
    if not E_window[1] > E_window[0]:
        return np.array([])
    return eigh_tridiagonal(diag, off, eigvals_only=True, select="v",
                            select_range=E_window)


def default_grid(potential: RadialPotential, reduced_mass: float, r_min: float | None = None,
                 r_max: float | None = None, points_per_wavelength: float = 20.0,
                 max_steps: int = 400_000) -> RadialGrid:
    """Grid resolving the deepest point of the well and the inner wall.

    The step is the smaller of λ_dB(deepest point)/``points_per_wavelength``
    and 1/200 of the distance from the inner edge to the well minimum; the
    outer edge defaults to 40 times the well position.
    """
    well = find_well(potential)
    if well is None:
        raise DomainError("potential has no interior minimum")
    if r_min is None:
        r_min, _ = choose_inner_wall(potential, well)
    if r_max is None:
        r_max = 40.0 * well.radius
    k_max = math.sqrt(2.0 * reduced_mass * well.depth) / HBAR
    h = min(2.0 * math.pi / k_max / points_per_wavelength, (well.radius - r_min) / 200.0)
    n = int(math.ceil((r_max - r_min) / h))
    return RadialGrid(r_min, r_max, min(max(n, MIN_STEPS), max_steps))


def choose_inner_wall(potential: RadialPotential, well=None, factor: float = 10.0,
                      points: int = 20000) -> tuple[float, bool]:
    """Inner Dirichlet radius where U first exceeds ``factor`` × well depth
    going inward from the minimum.

    Returns ``(r_min, flagged)``; ``flagged`` is True when the potential never
    reaches that height inside the well, in which case r_min is the domain
    edge (closed domain) or the top of the inner barrier (open domain).
    """
    well = well or find_well(potential)
    if well is None:
        raise DomainError("potential has no interior minimum")
    start = potential.inner_start()
    r = np.linspace(start, well.radius, points)
    u = np.asarray(potential(r))
    above = np.where(u >= factor * well.depth)[0]
    if len(above):
        i = above[-1]
        if i + 1 < len(r):
            f = lambda x: float(potential(x)) - factor * well.depth
            return float(optimize.brentq(f, r[i], r[i + 1], xtol=1e-15 * r[i])), False
        return float(r[i]), False
    if potential.closed_domain:
        return float(potential.domain_min), True
    return float(r[int(np.argmax(u))]), True


def refinement_order(potential, reduced_mass, grid: RadialGrid, levels: int = 4) -> np.ndarray:
    """Observed convergence order of the lowest ``levels`` eigenvalues under
    successive step halving, log2(|E_h − E_{h/2}| / |E_{h/2} − E_{h/4}|)."""
    runs = []
    g = grid
    for _ in range(3):
        states = find_bound_states(potential, reduced_mass, g, max_states=levels)
        runs.append(np.array([s.energy for s in states]))
        g = g.refined(2)
    n = min(len(x) for x in runs)
    e = np.array([x[:n] for x in runs])
    return np.log2(np.abs(e[0] - e[1]) / np.abs(e[1] - e[2]))


def write_bound_states(states, energies_path, wavefunctions_path=None, stride: int = 1):
    """Energies CSV (n, E_J, E_uK, near_threshold) and optional wavefunction CSV
    sampled on every ``stride``-th grid point."""
    if states:
        rows = [(s.n, s.energy, s.energy_uK, s.near_threshold) for s in states]
    else:
        rows = [("none found", "", "", "")]
    paths = [write_csv(energies_path, ["n", "E_J", "E_uK", "near_threshold"], rows)]
    if wavefunctions_path is not None:
        header = ["r_m"] + [f"psi_{s.n}" for s in states]
        if states:
            r = states[0].grid.r[::stride]
            cols = [r] + [s.wavefunction[::stride] for s in states]
            rows = zip(*cols)
        else:
            rows = []
        paths.append(write_csv(wavefunctions_path, header, rows))
    return paths
