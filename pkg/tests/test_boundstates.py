import dataclasses
import math

import mpmath as mp
import numpy as np
import pytest
from scipy import constants, integrate

from atomsphere.boundstates import (RadialGrid, choose_inner_wall, count_nodes, default_grid,
                                    fd_eigenvalues, find_bound_states, normalize_wavefunction,
                                    numerov_integrate, refinement_order, write_bound_states)
from atomsphere.config import load_config
from atomsphere.errors import ConfigError, DomainError
from atomsphere.potentials import (BindingConfig, CallableTerm, PowerTerm, RadialPotential,
                                   StepTerm, calibrate_binding_config, composite_bound_potential,
                                   find_well)

from conftest import AMU, UK, approx

HBAR = constants.hbar
MASS = 4.0 * AMU


@pytest.fixture(scope="module")
def paper_states(paper_config, binding_potential):
    grid = default_grid(binding_potential, paper_config.reduced_mass)
    return grid, find_bound_states(binding_potential, paper_config.reduced_mass, grid)


# analytic models -------------------------------------------------------


def test_harmonic_spectrum():
    cfg = load_config("harmonic")
    omega = cfg.model.params["omega"]
    grid = RadialGrid(0.0, 4e-6, 20000)
    states = find_bound_states(cfg.model.potential(), cfg.model.mass, grid,
                               E_window=(0.0, 13 * HBAR * omega))
    assert len(states) == 6
    for n, s in enumerate(states):
        # s-wave levels of the isotropic oscillator
        assert s.n == n
        assert s.energy == approx(HBAR * omega * (2 * n + 1.5), rel=1e-6)


def _square_well_oracle(depth, radius, mass):
    """Roots of K cot(KR) + κ = 0 in 50-digit arithmetic."""
    mp.mp.dps = 50
    k0 = mp.sqrt(2 * mp.mpf(mass) * depth) / mp.mpf(HBAR)
    R = mp.mpf(radius)
    out = []
    n = 1
    while (n - 0.5) * mp.pi / R < k0:
        lo, hi = (n - 0.5) * mp.pi / R, min(n * mp.pi / R, k0)
        K = mp.findroot(lambda K: K * mp.cos(K * R) + mp.sqrt(k0**2 - K**2) * mp.sin(K * R),
                        (lo, hi), solver="anderson")
        out.append(float((mp.mpf(HBAR) * K) ** 2 / (2 * mp.mpf(mass)) - depth))
        n += 1
    return out


def _square_well():
    depth, radius = 100 * UK, 1e-6
    pot = RadialPotential((StepTerm(-depth, radius),), 0.0, 0.0)
    return pot, _square_well_oracle(depth, radius, MASS)


def test_square_well_spectrum():
    pot, exact = _square_well()
    states = find_bound_states(pot, MASS, RadialGrid(0.0, 8e-6, 80000))
    assert len(states) == len(exact) >= 2
    for s, e in zip(states, exact):
        assert s.energy == approx(e, rel=1e-6)


def test_square_well_second_order_at_step():
    # the step in U breaks Numerov's fourth order: errors fall as h² there
    pot, exact = _square_well()
    err = [abs(find_bound_states(pot, MASS, RadialGrid(0.0, 8e-6, n))[-1].energy / exact[-1] - 1)
           for n in (40000, 80000)]
    assert math.log2(err[0] / err[1]) == approx(2.0, rel=0.05)


def test_wide_box_keeps_deep_states():
    # renormalized growth through a long forbidden region must not underflow ψ
    pot, exact = _square_well()
    states = find_bound_states(pot, MASS, RadialGrid(0.0, 16e-6, 160000))
    assert len(states) == len(exact)
    assert all(np.isfinite(s.wavefunction).all() for s in states)
    assert states[0].energy == approx(exact[0], rel=1e-6)


def test_morse_exactly_three_states():
    depth, lam = 100 * UK, 3.3
    a = math.sqrt(2 * MASS * depth) / (lam * HBAR)
    r_e = 12 / a
    pot = RadialPotential((CallableTerm(lambda r: depth * (np.exp(-2 * a * (r - r_e))
                                                             - 2 * np.exp(-a * (r - r_e)))),),
                          0.0, 0.0)
    r0 = r_e - math.log(101.0) / a
    states = find_bound_states(pot, MASS, RadialGrid(r0, r_e + 40 / a, 20000))
    assert len(states) == 3
    for n, s in enumerate(states):
        assert s.energy == approx(-depth * (1 - (n + 0.5) / lam) ** 2, rel=1e-6)


def test_harmonic_matching_residual_crosses_zero():
    cfg = load_config("harmonic")
    omega = cfg.model.params["omega"]
    pot, grid = cfg.model.potential(), RadialGrid(0.0, 4e-6, 20000)
    e0 = 1.5 * HBAR * omega
    below = numerov_integrate(pot, e0 * (1 - 1e-4), cfg.model.mass, grid)
    above = numerov_integrate(pot, e0 * (1 + 1e-4), cfg.model.mass, grid)
    # the outward solution diverges with opposite signs on either side of E₀
    i = np.searchsorted(grid.r, 2.5e-6)
    assert below[i] * above[i] < 0


def test_purely_repulsive_empty():
    pot = RadialPotential((PowerTerm("inverse_r6", 1e-60),), 40e-9)
    assert find_bound_states(pot, MASS, RadialGrid(41e-9, 1e-6, 5000)) == []


# normalization -----------------------------------------------------------


def test_normalize_constant_vector():
    grid = RadialGrid(0.0, 1.0, 1000)
    psi = normalize_wavefunction(np.full(1001, 3.0), grid)
    assert np.trapezoid(psi**2, dx=grid.h) == approx(1.0, rel=1e-14)
    assert np.all(psi > 0)


def test_normalize_idempotent_and_sign():
    grid = RadialGrid(0.0, math.pi, 2000)
    raw = -np.sin(grid.r)
    once = normalize_wavefunction(raw, grid)
    assert once[1000] > 0
    assert np.max(np.abs(normalize_wavefunction(once, grid) - once)) < 1e-12


def test_normalize_zero_norm():
    with pytest.raises(DomainError):
        normalize_wavefunction(np.zeros(1001), RadialGrid(0.0, 1.0, 1000))


def test_ground_state_norm_quadrature(paper_states):
    grid, states = paper_states
    psi = states[0].wavefunction
    assert np.trapezoid(psi**2, dx=grid.h) == approx(1.0, abs=1e-12)
    # an independent higher-order rule on the same samples agrees to 10⁻⁶
    assert integrate.simpson(psi**2, dx=grid.h) == approx(1.0, abs=1e-6)


# the binding potential ---------------------------------------------------


def test_paper_well_depth(binding_potential):
    assert find_well(binding_potential).depth / UK == approx(340.0, rel=0.15)


def test_paper_at_least_four_states(paper_states, binding_potential):
    _, states = paper_states
    depth = find_well(binding_potential).depth
    energies = np.array([s.energy for s in states])
    assert len(states) >= 4
    assert np.all(np.diff(energies) > 0)
    assert np.all((energies > -depth) & (energies < 0))


def test_node_theorem(paper_states):
    _, states = paper_states
    for n, s in enumerate(states):
        assert s.n == n
        assert count_nodes(s.wavefunction) == n


def test_orthogonality(paper_states):
    grid, states = paper_states
    psi = np.array([s.wavefunction for s in states[:4]])
    overlap = np.trapezoid(psi[:, None, :] * psi[None, :, :], dx=grid.h, axis=-1)
    off = overlap[~np.eye(4, dtype=bool)]
    assert np.max(np.abs(off)) < 1e-4
    assert np.allclose(np.diag(overlap), 1.0, atol=1e-6)


def test_finite_difference_agreement(paper_config, binding_potential, paper_states):
    grid, states = paper_states
    depth = find_well(binding_potential).depth
    fd = fd_eigenvalues(binding_potential, paper_config.reduced_mass, grid.refined(4))
    assert len(fd) == len(states)
    numerov = np.array([s.energy for s in states])
    assert np.max(np.abs(fd - numerov)) < 0.01 * depth


def test_refinement_order(paper_config, binding_potential):
    g = default_grid(binding_potential, paper_config.reduced_mass)
    base = RadialGrid(g.r_min, g.r_max, 2000)
    order = refinement_order(binding_potential, paper_config.reduced_mass, base, levels=4)
    assert np.all(order >= 3.5)


def test_minus_300uK_solution_finite(paper_config, binding_potential, paper_states):
    grid, _ = paper_states
    psi = numerov_integrate(binding_potential, -300 * UK, paper_config.reduced_mass, grid)
    assert np.all(np.isfinite(psi))
    # Sturm property: the sign changes of the raw outward solution (which grows
    # by ~10³⁷ beyond the well, hence no amplitude cut) count the levels below E
    fd = fd_eigenvalues(binding_potential, paper_config.reduced_mass, grid)
    assert count_nodes(psi, rel_tol=0.0) == np.count_nonzero(fd < -300 * UK)
    psi = numerov_integrate(binding_potential, -100 * UK, paper_config.reduced_mass, grid)
    assert count_nodes(psi, rel_tol=0.0) == np.count_nonzero(fd < -100 * UK) > 0


def test_inner_wall_at_surface_flagged(binding_potential):
    # the optical-only barrier at the surface stays below 10× the well depth,
    # so the Dirichlet wall sits on the sphere and is flagged
    r_min, flagged = choose_inner_wall(binding_potential, factor=10.0)
    assert flagged and r_min == binding_potential.domain_min
    assert binding_potential(r_min) < 10 * find_well(binding_potential).depth


def test_inner_wall_sensitivity(paper_config):
    # a steeper binding ratio whose barrier passes 10× the depth: moving the
    # wall from the 10× point to the 30× point changes E_n by < 0.1%
    b = paper_config.binding
    base = BindingConfig.for_sphere(paper_config.sphere, b.repulsive, b.attractive, 6.0, 1.0)
    cfg = calibrate_binding_config(base, paper_config.sphere, paper_config.species, 340 * UK,
                                   include_cp=False)
    pot = composite_bound_potential(cfg, paper_config.sphere, paper_config.species,
                                    include_cp=False)
    mu = paper_config.reduced_mass
    r10, flag10 = choose_inner_wall(pot, factor=10.0)
    r30, flag30 = choose_inner_wall(pot, factor=30.0)
    assert not flag10 and not flag30 and r30 < r10
    grid = default_grid(pot, mu)
    assert grid.r_min == r10
    near = find_bound_states(pot, mu, grid, max_states=4)
    deep = find_bound_states(pot, mu, RadialGrid.with_step(r30, grid.r_max, grid.h),
                             max_states=4)
    assert len(near) == len(deep) == 4
    for a, c in zip(near, deep):
        assert abs(c.energy / a.energy - 1) < 1e-3


def test_threads_deterministic(paper_config, binding_potential, paper_states):
    grid, states = paper_states
    again = find_bound_states(binding_potential, paper_config.reduced_mass, grid, threads=3)
    assert [s.energy for s in again] == [s.energy for s in states]
    for a, b in zip(again, states):
        assert np.array_equal(a.wavefunction, b.wavefunction)


def test_near_threshold_flag():
    depth, radius = 100 * UK, 1e-6
    pot = RadialPotential((StepTerm(-depth, radius),), 0.0, 0.0)
    states = find_bound_states(pot, MASS, RadialGrid(0.0, 8e-6, 40000), well_depth=depth)
    flags = [abs(s.energy) < 1e-3 * depth for s in states]
    assert [s.near_threshold for s in states] == flags


def test_binding_with_casimir_polder(paper_config):
    # the composite well including the Casimir-Polder term at the stated depth
    # and U_R/U_A; calibration cannot reach 340 µK at this ratio
    binding = dataclasses.replace(paper_config.binding, include_cp=True)
    cfg = dataclasses.replace(paper_config, binding=binding)
    pot = cfg.binding_potential()
    grid = default_grid(pot, cfg.reduced_mass)
    assert find_well(pot).depth / UK == approx(340.0, rel=0.15)
    assert len(find_bound_states(pot, cfg.reduced_mass, grid)) >= 4


# validation and output ---------------------------------------------------


def test_grid_validation():
    with pytest.raises(ConfigError):
        RadialGrid(1.0, 1.0, 1000)
    with pytest.raises(ConfigError):
        RadialGrid(0.0, 1.0, 999)
    g = RadialGrid.with_step(0.0, 1.0, 1e-4)
    assert g.n_steps == 10000 and g.h <= 1e-4


def test_grid_below_domain():
    pot = RadialPotential((PowerTerm("inverse_r6", 1e-60),), 40e-9)
    with pytest.raises(DomainError):
        find_bound_states(pot, MASS, RadialGrid(39e-9, 1e-6, 5000))


def test_write_none_found(tmp_path):
    (path,) = write_bound_states([], tmp_path / "e.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "n,E_J,E_uK,near_threshold"
    assert lines[1].startswith("none found")


def test_write_states(tmp_path, paper_states):
    grid, states = paper_states
    e, w = write_bound_states(states[:4], tmp_path / "e.csv", tmp_path / "w.csv", stride=10)
    assert len(e.read_text().splitlines()) == 5
    rows = w.read_text().splitlines()
    assert rows[0] == "r_m,psi_0,psi_1,psi_2,psi_3"
    assert len(rows) == 1 + len(grid.r[::10])
