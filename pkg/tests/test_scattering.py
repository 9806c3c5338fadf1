import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import constants, integrate, optimize
from scipy.special import spherical_jn, spherical_yn

from atomsphere.boundstates import RadialGrid
from atomsphere.config import load_config
from atomsphere.errors import ConfigError, ConvergenceError
from atomsphere.potentials import CallableTerm, PowerTerm, RadialPotential, StepTerm
from atomsphere.scattering import (CollisionSpec, CrossSectionCurve, Resonance,
                                   classical_cross_section_curve, classical_total_cross_section,
                                   cross_sections_from_phases, deflection_angle,
                                   log_derivative_phase_shift, momentum_transfer_cross_section,
                                   partial_cross_sections, phase_shifts,
                                   quantum_cross_section_curve,
                                   quantum_momentum_transfer_cross_section, resonance_scan,
                                   total_quantum_cross_section, unwrap_phases, write_resonances)

from conftest import AMU, SPHERE_RADIUS, UK, approx

HBAR = constants.hbar
MASS = 4.0 * AMU


def wavenumber(energy, mass=MASS):
    return np.sqrt(2 * mass * np.asarray(energy)) / HBAR


@pytest.fixture(scope="module")
def cooling(paper_config):
    return paper_config.cooling_potential(), paper_config.reduced_mass


# classical -----------------------------------------------------------------


def test_rutherford_four_decades():
    cfg = load_config("rutherford")
    z = cfg.model.params["strength"]
    energy = 5 * UK
    spec = CollisionSpec(cfg.model.potential(), cfg.model.mass, energy)
    b = np.geomspace(0.01, 100.0, 9) * z / energy
    chi = deflection_angle(spec, b, r_far=1e4 * b.max())
    exact = 2 * np.arctan(z / (2 * energy * b))
    assert np.allclose(chi, exact, rtol=1e-6, atol=0)


def test_distant_flyby(cooling):
    pot, mu = cooling
    spec = CollisionSpec.at_temperature(pot, mu, 10e-6)
    assert abs(deflection_angle(spec, 1e3 * 20e-6)[0]) < 1e-6


def _deflection_oracle(pot, energy, b):
    """χ by adaptive quadrature after r = r₀/(1 − u²), with an independent
    turning-point search."""
    F = lambda r: 1 - (b / r) ** 2 - float(pot(r)) / energy
    r = np.geomspace(pot.domain_min * 1.0001, 1e3 * b, 20001)
    f = np.array([F(x) for x in r])
    i = np.where(f < 0)[0][-1]
    r0 = optimize.brentq(F, r[i], r[i + 1], xtol=1e-16 * r[i], rtol=1e-15)

    def integrand(u):
        if u == 0.0:
            # F ≈ F'(r₀)·r₀u² near the turning point
            return 2 * r0 / (r0 * r0 * math.sqrt(r0 * derivative))
        rr = r0 / (1 - u * u)
        return 2 * u * r0 / (1 - u * u) ** 2 / (rr * rr * math.sqrt(F(rr)))

    h = 1e-6 * r0
    derivative = (F(r0 + h) - F(r0 - h)) / (2 * h)
    val, _ = integrate.quad(integrand, 0.0, 1.0, epsabs=0, epsrel=1e-12, limit=1000,
                            points=[0.5, 0.9, 0.99, 0.999])
    return math.pi - 2 * b * val


def test_deflection_quadrature_oracle(cooling):
    pot, mu = cooling
    spec = CollisionSpec.at_temperature(pot, mu, 10e-6)
    chi = deflection_angle(spec, 1e-6)[0]
    assert chi == approx(_deflection_oracle(pot, spec.energy, 1e-6), rel=1e-4)


def test_deflection_decreasing_on_tail(cooling):
    pot, mu = cooling
    spec = CollisionSpec.at_temperature(pot, mu, 10e-6)
    b = np.geomspace(50e-9, 200e-6, 400)
    chi = np.abs(deflection_angle(spec, b))
    peak = int(np.argmax(chi))
    assert np.all(np.diff(chi[peak:]) < 0)
    assert np.all(np.abs(np.diff(chi)) < 0.2)


def test_no_interaction_zero_sigma():
    # on a domain reaching the origin nothing deflects; with an inner edge the
    # edge itself reflects like a hard sphere of that radius
    pot = RadialPotential((PowerTerm("inverse_r", 0.0),), 0.0)
    spec = CollisionSpec(pot, MASS, 10 * UK)
    assert momentum_transfer_cross_section(spec, b_max=1e-5) < 1e-12 * math.pi * 1e-10
    edge = RadialPotential((PowerTerm("inverse_r", 0.0),), 1e-9)
    sigma = momentum_transfer_cross_section(CollisionSpec(edge, MASS, 10 * UK), b_max=1e-5)
    assert sigma == approx(math.pi * 1e-18, rel=0.01)


def test_hard_sphere_geometric():
    R = 1e-6
    pot = RadialPotential((StepTerm(0.0, R),), R, 0.0)
    spec = CollisionSpec(pot, MASS, 10 * UK)
    assert momentum_transfer_cross_section(spec, b_max=2 * R) == approx(math.pi * R**2,
                                                                               rel=0.01)


def test_b_max_doubling(cooling):
    pot, mu = cooling
    spec = CollisionSpec.at_temperature(pot, mu, 10e-6)
    s1 = momentum_transfer_cross_section(spec, check=False)
    s2 = momentum_transfer_cross_section(spec, b_max=2 * 10 * 20e-6, check=False)
    assert abs(s2 / s1 - 1) < 0.01
    assert momentum_transfer_cross_section(spec) == approx(s1, rel=1e-8)


def test_b_max_too_small_flagged(cooling):
    pot, mu = cooling
    spec = CollisionSpec.at_temperature(pot, mu, 10e-6)
    with pytest.raises(ConvergenceError, match="b_max"):
        momentum_transfer_cross_section(spec, b_max=100e-9)


def test_paper_classical_cross_section(cooling):
    # stated: σ_mt ≈ 6.6×10¹¹ nm² at 10 µK, eight orders above the geometric value
    pot, mu = cooling
    sigma = momentum_transfer_cross_section(CollisionSpec.at_temperature(pot, mu, 10e-6))
    assert 0.5 * 6.6e-7 <= sigma <= 2 * 6.6e-7
    assert sigma > 1e8 * math.pi * SPHERE_RADIUS**2


def test_classical_total_exceeds_momentum_transfer(cooling):
    pot, mu = cooling
    spec = CollisionSpec.at_temperature(pot, mu, 10e-6)
    assert classical_total_cross_section(spec) > momentum_transfer_cross_section(spec)


def test_classical_curve_threads(cooling):
    pot, mu = cooling
    e = np.array([1.0, 10.0, 100.0]) * UK
    c1 = classical_cross_section_curve(pot, mu, e)
    c3 = classical_cross_section_curve(pot, mu, e, threads=3)
    assert np.array_equal(c1.values, c3.values)
    assert c1.metadata["b_max"] == approx(200e-6)
    assert np.all(np.diff(c1.values) < 0)


# quantum: analytic oracles -------------------------------------------------


def test_hard_sphere_s_wave():
    R = 1e-6
    pot = RadialPotential((StepTerm(0.0, R),), R, 0.0)
    e = np.array([0.1, 1.0, 10.0]) * UK
    d = phase_shifts(pot, MASS, e, [0], absolute=True, ppw=120.0, extrapolate=True)[:, 0]
    kR = wavenumber(e) * R
    assert np.all(np.abs(d + kR) <= 1e-8 * kR)


def _square_well_tan_delta(l, E, V0, R, mass=MASS):
    k = math.sqrt(2 * mass * E) / HBAR
    K = math.sqrt(2 * mass * (E + V0)) / HBAR
    jl, djl = spherical_jn(l, K * R), spherical_jn(l, K * R, derivative=True)
    a, da = spherical_jn(l, k * R), spherical_jn(l, k * R, derivative=True)
    b, db = spherical_yn(l, k * R), spherical_yn(l, k * R, derivative=True)
    gamma = K * djl / jl
    return (k * da - gamma * a), (k * db - gamma * b)


def test_square_well_s_wave():
    V0, R = 50 * UK, 500e-9
    pot = RadialPotential((StepTerm(-V0, R),), 0.0, 0.0)
    e = np.geomspace(0.01, 10, 7) * UK
    d = phase_shifts(pot, MASS, e, [0])[:, 0]
    for E, got in zip(e, d):
        num, den = _square_well_tan_delta(0, E, V0, R)
        exact = math.atan(num / den)
        assert abs(math.remainder(got - exact, math.pi)) < 1e-6


@settings(max_examples=15, deadline=None)
@given(st.floats(0.01, 20.0), st.integers(0, 6))
def test_square_well_any_l(e_uK, l):
    V0, R = 50 * UK, 500e-9
    pot = RadialPotential((StepTerm(-V0, R),), 0.0, 0.0)
    got = phase_shifts(pot, MASS, [e_uK * UK], [l])[0, 0]
    num, den = _square_well_tan_delta(l, e_uK * UK, V0, R)
    assert abs(math.remainder(got - math.atan2(num, den), math.pi)) < 1e-6


def test_zero_potential_zero_phases():
    pot = RadialPotential((PowerTerm("inverse_r", 0.0),), 0.0, 0.0)
    d = phase_shifts(pot, MASS, np.array([0.1, 10.0]) * UK, range(5), r_max=20e-6)
    assert np.max(np.abs(d)) < 1e-7


def test_all_phases_zero_cross_section():
    k = np.array([1e7, 2e7])
    total, mt = cross_sections_from_phases(k, np.zeros((2, 8)), np.arange(8))
    assert np.all(total == 0) and np.all(mt == 0)


def test_s_wave_unitarity_limit():
    k = np.array([1.3e7])
    total, _ = cross_sections_from_phases(k, np.array([[math.pi / 2]]), np.array([0]))
    assert total[0] == approx(4 * math.pi / k[0] ** 2, rel=1e-15)


def test_unitarity_every_partial_wave(paper_config):
    pot = paper_config.profile("binding")
    e = np.geomspace(0.1, 100, 6) * UK
    ls = np.arange(0, 40)
    d = phase_shifts(pot, paper_config.reduced_mass, e, ls, check_r_max=False)
    k = wavenumber(e, paper_config.reduced_mass)
    part = partial_cross_sections(k, d, ls)
    bound = 4 * math.pi * (2 * ls + 1)[None, :] / k[:, None] ** 2
    assert np.all(part >= 0)
    assert np.all(part <= bound * (1 + 1e-12))


def test_unwrap_continuous():
    raw = np.array([2.9, 0.1, -2.9, 0.2])  # a rising branch folded into (−π/2, π/2]
    out = unwrap_phases(np.mod(raw + math.pi / 2, math.pi) - math.pi / 2)
    assert np.all(np.abs(np.diff(out)) <= math.pi / 2)
    assert out[-1] == approx(np.mod(0.2 + math.pi / 2, math.pi) - math.pi / 2)


# quantum: Numerov phase-shift oracle and resonances -------------------------


GAUSS_DEPTH, GAUSS_RANGE = 80 * UK, 1e-6


def gaussian_well():
    return RadialPotential(
        (CallableTerm(lambda r: -GAUSS_DEPTH * np.exp(-(r / GAUSS_RANGE) ** 2), "gauss"),),
        0.0, 0.0)


def _numerov_tan_delta(pot, l, E, r_max=10e-6, n=20000):
    """tan δ_l as (numerator, denominator) from outward Numerov and matching to
    Riccati-Bessel functions at two outer points."""
    h = r_max / n
    r = h * np.arange(n + 1)
    r[0] = 1e-30
    k = math.sqrt(2 * MASS * E) / HBAR
    q = k**2 - l * (l + 1) / r**2 - 2 * MASS * np.asarray(pot(r)) / HBAR**2
    u = np.zeros(n + 1)
    u[1], u[2] = h ** (l + 1), (2 * h) ** (l + 1)
    c = h * h / 12
    for i in range(2, n):
        u[i + 1] = (2 * (1 - 5 * c * q[i]) * u[i] - (1 + c * q[i - 1]) * u[i - 1]) \
            / (1 + c * q[i + 1])
    i1, i2 = n - 400, n
    x1, x2 = k * r[i1], k * r[i2]
    j1, j2 = x1 * spherical_jn(l, x1), x2 * spherical_jn(l, x2)
    y1, y2 = x1 * spherical_yn(l, x1), x2 * spherical_yn(l, x2)
    # u ∝ ĵ cos δ − ŷ sin δ
    num = u[i2] * j1 - u[i1] * j2
    den = u[i2] * y1 - u[i1] * y2
    return num, den


@pytest.mark.parametrize("e_uK", [0.005, 0.02, 0.3, 3.0])
def test_numerov_oracle_phases(e_uK):
    pot = gaussian_well()
    got = phase_shifts(pot, MASS, [e_uK * UK], [3], r_max=10e-6)[0, 0]
    num, den = _numerov_tan_delta(pot, 3, e_uK * UK)
    assert abs(math.remainder(got - math.atan2(num, den), math.pi)) < 1e-5


def test_gaussian_l3_resonance_numerov_oracle():
    pot = gaussian_well()
    res = resonance_scan(pot, MASS, np.geomspace(0.01, 20, 60) * UK, range(6), r_max=10e-6)
    assert [r.l for r in res] == [3]
    e_res = res[0].energy
    # the resonance sits where cot δ₃ = 0 (sin²δ₃ = 1)
    g = lambda e: (lambda nd: nd[1] / math.hypot(*nd))(_numerov_tan_delta(pot, 3, e))
    oracle = optimize.brentq(g, 0.8 * e_res, 1.2 * e_res, xtol=1e-14 * e_res, rtol=1e-10)
    assert e_res == approx(oracle, rel=0.01)
    # δ₃ rises by about π across the resonance
    w = res[0].width
    d = phase_shifts(pot, MASS, [e_res - 5 * w, e_res + 5 * w], [3], absolute=True,
                     r_max=10e-6)[:, 0]
    assert 0.6 * math.pi < d[1] - d[0] < 1.2 * math.pi


def test_square_well_shape_resonance():
    V0, R = 50 * UK, 500e-9
    pot = RadialPotential((StepTerm(-V0, R),), 0.0, 0.0)
    res = resonance_scan(pot, MASS, np.geomspace(0.01, 10, 30) * UK, [5])
    assert len(res) == 1
    g = lambda e: (lambda nd: nd[1] / math.hypot(*nd))(_square_well_tan_delta(5, e, V0, R))
    e0 = res[0].energy
    oracle = optimize.brentq(g, 0.8 * e0, 1.2 * e0, xtol=1e-14 * e0, rtol=1e-12)
    assert res[0].energy == approx(oracle, rel=0.01)


def test_pure_attraction_no_s_wave_resonance():
    pot = gaussian_well()
    assert resonance_scan(pot, MASS, np.geomspace(0.01, 20, 60) * UK, [0], r_max=10e-6) == []


def test_paper_resonances_l3_l7(paper_config):
    # stated: narrow resonances from the l = 3 and l = 7 partial waves over 0.1–100 µK
    pot = paper_config.profile("binding")
    res = resonance_scan(pot, paper_config.reduced_mass, np.geomspace(0.1, 100, 40) * UK,
                         range(13))
    ls = {r.l for r in res}
    assert {3, 7} <= ls


# quantum: totals, convergence and cross-method sanity -----------------------


def test_quantum_total_square_well_tail():
    V0, R = 50 * UK, 500e-9
    pot = RadialPotential((StepTerm(-V0, R),), 0.0, 0.0)
    spec = CollisionSpec(pot, MASS, 1 * UK)
    ls = np.arange(30)
    k = spec.wavenumber
    exact = 0.0
    for l in ls:
        num, den = _square_well_tan_delta(int(l), spec.energy, V0, R)
        exact += 4 * math.pi / k**2 * (2 * l + 1) * num**2 / (num**2 + den**2)
    assert total_quantum_cross_section(spec) == approx(exact, rel=1e-5)


def test_cross_method_total_vs_classical(cooling):
    # stated band: quantum total within 10× of classical momentum transfer at 10 µK
    pot, mu = cooling
    spec = CollisionSpec.at_temperature(pot, mu, 10e-6)
    ratio = total_quantum_cross_section(spec, l_cap=6000) / momentum_transfer_cross_section(spec)
    assert 0.1 < ratio < 10


def test_cross_method_momentum_transfer(cooling):
    pot, mu = cooling
    spec = CollisionSpec.at_temperature(pot, mu, 10e-6)
    q = quantum_momentum_transfer_cross_section(spec, l_cap=6000)
    c = momentum_transfer_cross_section(spec)
    assert 0.5 < q / c < 2


def test_r_max_check(paper_config):
    pot = paper_config.profile("binding")
    with pytest.raises(ConvergenceError, match="r_max"):
        phase_shifts(pot, paper_config.reduced_mass, [10 * UK], [0, 1], r_max=2e-6)


def test_phase_shifts_threads_identical(paper_config):
    pot = paper_config.profile("binding")
    e = np.geomspace(0.1, 100, 5) * UK
    a = phase_shifts(pot, paper_config.reduced_mass, e, range(8), check_r_max=False)
    b = phase_shifts(pot, paper_config.reduced_mass, e, range(8), check_r_max=False, threads=3)
    assert np.array_equal(a, b)


def test_log_derivative_wrapper_with_radial_grid():
    V0, R = 50 * UK, 500e-9
    pot = RadialPotential((StepTerm(-V0, R),), 0.0, 0.0)
    spec = CollisionSpec(pot, MASS, 1 * UK)
    grid = RadialGrid(0.0, 20e-6, 200000)
    got = log_derivative_phase_shift(spec, 0, grid, check_r_max=False, extrapolate=True)
    num, den = _square_well_tan_delta(0, spec.energy, V0, R)
    assert abs(math.remainder(got - math.atan(num / den), math.pi)) < 1e-6


def test_quantum_curve_records_l_max():
    V0, R = 50 * UK, 500e-9
    pot = RadialPotential((StepTerm(-V0, R),), 0.0, 0.0)
    e = np.geomspace(0.1, 10, 4) * UK
    fixed = quantum_cross_section_curve(pot, MASS, e, l_max=24)
    assert fixed.metadata["l_max"] == 24
    adaptive = quantum_cross_section_curve(pot, MASS, e)
    assert len(adaptive.metadata["l_max"]) == 4
    assert np.allclose(adaptive.values, fixed.values, rtol=1e-4, atol=0.0)


# types and output ----------------------------------------------------------


def test_collision_spec_validation():
    pot = RadialPotential((PowerTerm("inverse_r", 1.0),), 1e-9)
    with pytest.raises(ConfigError):
        CollisionSpec(pot, MASS, 0.0)
    with pytest.raises(ConfigError):
        CollisionSpec(pot, -1.0, 1.0)
    assert CollisionSpec.at_temperature(pot, MASS, 1e-5).energy_uK == approx(10.0)


def test_curve_and_resonance_validation(tmp_path):
    with pytest.raises(ValueError):
        CrossSectionCurve(np.ones(3), -np.ones(3), "quantum_total")
    with pytest.raises(ValueError):
        CrossSectionCurve(np.ones(3), np.ones(2), "quantum_total")
    with pytest.raises(ValueError):
        Resonance(1e-29, 3, 0.0, 1e-12)
    with pytest.raises(ValueError):
        Resonance(1e-29, -1, 1e-31, 1e-12)
    curve = CrossSectionCurve(np.array([1, 2]) * UK, np.array([2e-12, 1e-12]),
                              "classical_momentum_transfer", {"b_max": 2e-4})
    text = curve.write_csv(tmp_path / "c.csv").read_text().splitlines()
    assert text[0] == "energy_uK,sigma_m2,kind,b_max"
    assert len(text) == 3
    path = write_resonances([Resonance(3 * UK, 5, 0.1 * UK, 1e-12)], tmp_path / "r.csv")
    assert path.read_text().splitlines()[0] == "E_res_uK,l,width_uK,peak_sigma_m2"
