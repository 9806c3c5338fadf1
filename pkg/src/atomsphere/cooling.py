"""Sympathetic cooling of the trapped nanosphere by a cold atomic bath.

The steady-state centre-of-mass temperature is the rate-weighted mean of
three reservoirs: the cold atoms (γ_C, T_C), the room-temperature background
gas (γ_H, T_H) and the photon-recoil heating of the sphere by the light that
shapes the potential (γ_R, T_R).

Models
------
γ_C = (ξ/α_c) N ⟨σ⟩ v_th, ξ = 4 m_n m_a/(m_n + m_a)², α_c = 2.7.

γ_H is the Epstein free-molecular drag rate for diffuse reflection,
γ_H = (1 + π/8) (P/(a ρ)) √(8 m_g/(π k_B T_H)).

Recoil: a Rayleigh sphere scatters P_i = σ_scat(λ_i) I_i from each beam.
Per photon the sphere gains 2·(ħk)²/2m of kinetic energy (absorption plus
emission). Three orthogonal beams with orthogonal polarizations give
isotropic kicks, so the heating power per motional axis is
``Ė = η (1/3) Σ ħω_i P_i/(m c²)`` with prefactor η (1 by default).
The same light damps the motion at γ_R = Σ P_i/(m c²). T_R = Ė/(k_B γ_R) is
then ≈ η ħω/(3k_B), and γ_R·T_R = Ė/k_B is what enters T_e.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import gammainc

from .errors import ConfigError, CoverageError, DomainError
from .io import write_json
from .nearfield import Nanosphere, TripleBeamConfig, rayleigh_scattering_cross_section
from .species import AtomSpecies
from .units import AMU, C_LIGHT, HBAR, KB

ALPHA_C = 2.7
AIR_MASS = 28.97 * AMU
EPSTEIN_DIFFUSE = 1.0 + math.pi / 8.0


@dataclass(frozen=True)
class BathSpec:
    number_density: float
    temperature: float
    species: AtomSpecies

    def __post_init__(self):
        if not self.number_density >= 0:
            raise ConfigError("bath number density must be >= 0")
        if not self.temperature > 0:
            raise ConfigError("bath temperature must be > 0")


@dataclass(frozen=True)
class EnvironmentSpec:
    background_pressure: float = 0.0
    background_temperature: float = 300.0
    background_mean_molecular_mass: float = AIR_MASS

    def __post_init__(self):
        if not self.background_pressure >= 0:
            raise ConfigError("background pressure must be >= 0")
        if not self.background_temperature > 0:
            raise ConfigError("background temperature must be > 0")
        if not self.background_mean_molecular_mass > 0:
            raise ConfigError("background molecular mass must be > 0")


@dataclass(frozen=True)
class CoolingReport:
    gamma_C: float
    gamma_H: float
    gamma_R: float
    T_C: float
    T_H: float
    T_R: float
    T_e: float
    v_th: float
    xi: float
    sigma_avg: float
    n_bar: float
    trap_frequency: float
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("gamma_C", "gamma_H", "gamma_R"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)

    def write_json(self, path):
        return write_json(path, self.to_dict())


def thermal_speed(T_a: float, m_a: float, T_n: float = 0.0, m_n: float = math.inf) -> float:
    """Mean relative speed √((8k_B/π)(T_a/m_a + T_n/m_n))."""
    if not (T_a > 0 and m_a > 0 and T_n >= 0 and m_n > 0):
        raise ConfigError("thermal_speed needs T_a, m_a, m_n > 0 and T_n >= 0")
    return math.sqrt(8.0 * KB / math.pi * (T_a / m_a + T_n / m_n))


def mass_mismatch_factor(m_n: float, m_a: float) -> float:
    """Energy-transfer efficiency ξ = 4 m_n m_a/(m_n + m_a)², in (0, 1]."""
    if not (m_n > 0 and m_a > 0):
        raise ConfigError("masses must be > 0")
    return 4.0 * m_n * m_a / (m_n + m_a) ** 2


def collision_temperature(T_a: float, m_a: float, T_n: float = 0.0, m_n: float = math.inf) -> float:
    """Temperature of the relative-motion Maxwell-Boltzmann distribution."""
    mu = m_a if math.isinf(m_n) else m_a * m_n / (m_a + m_n)
    return mu * (T_a / m_a + (0.0 if math.isinf(m_n) else T_n / m_n))


def maxwell_boltzmann_energy_weight(energy, temperature):
    """Collision-energy density w(E) = 2√E e^(−E/kT)/(√π (kT)^{3/2}), in 1/J."""
    kT = KB * temperature
    e = np.asarray(energy, dtype=float)
    return 2.0 * np.sqrt(e) * np.exp(-e / kT) / (math.sqrt(math.pi) * kT**1.5)


def _power_law_tail(x0, s0, slope, lower):
    """∫ s0 (x/x0)^slope · w(x) dx over [0, x0] (lower) or [x0, ∞), x = E/kT."""
    f = lambda x: s0 * (x / x0) ** slope * 2.0 * math.sqrt(x) * math.exp(-x) / math.sqrt(math.pi)
    if lower:
        if slope <= -1.5:
            return None
        return integrate.quad(f, 0.0, x0, epsabs=0.0, epsrel=1e-8, limit=200)[0]
    return integrate.quad(f, x0, math.inf, epsabs=0.0, epsrel=1e-8, limit=200)[0]


def speed_averaged_cross_section(curve, T_a: float, m_a: float, T_n: float = 0.0,
                                 m_n: float = math.inf, coverage: float = 0.99,
                                 with_tails: bool = True) -> float:
    """Maxwell-Boltzmann average ⟨σ⟩ = ∫σ(E) w(E; T) dE of a tabulated curve.

    The curve is interpolated log-log and integrated in ln E between its
    nodes. Outside its span σ is continued with the end-point power laws
    (when ``with_tails``), which matters only for the uncovered weight.

    Raises
    ------
    CoverageError
        If the curve's energy span holds less than ``coverage`` of the
        Maxwell-Boltzmann weight.
    """
    T = collision_temperature(T_a, m_a, T_n, m_n)
    kT = KB * T
    x = curve.energies / kT
    if len(x) < 2:
        raise CoverageError("need at least two tabulated energies")
    weight = float(gammainc(1.5, x[-1]) - gammainc(1.5, x[0]))
    if weight < coverage:
        raise CoverageError(
            f"curve spans {curve.energies[0] / KB:.3e}-{curve.energies[-1] / KB:.3e} K, "
            f"only {weight:.4f} of the thermal weight at T = {T:.3e} K (need {coverage})"
        )
    lx = np.log(x)
    ls = np.log(np.maximum(curve.values, 1e-300))

    def integrand(u):
        xx = math.exp(u)
        sig = math.exp(float(np.interp(u, lx, ls)))
        return sig * 2.0 * xx**1.5 * math.exp(-xx) / math.sqrt(math.pi)

    total = 0.0
    for a, b in zip(lx[:-1], lx[1:]):
        total += integrate.quad(integrand, a, b, epsabs=0.0, epsrel=1e-9, limit=100)[0]
    if with_tails:
        lo_slope = (ls[1] - ls[0]) / (lx[1] - lx[0])
        hi_slope = (ls[-1] - ls[-2]) / (lx[-1] - lx[-2])
        lo = _power_law_tail(x[0], curve.values[0], lo_slope, lower=True)
        if lo is not None:
            total += lo
        total += _power_law_tail(x[-1], curve.values[-1], hi_slope, lower=False)
    return total


def collisional_cooling_rate(bath: BathSpec, sphere: Nanosphere, sigma_avg: float,
                             v_th: float, alpha_c: float = ALPHA_C) -> float:
    """γ_C = (ξ/α_c) N ⟨σ⟩ v_th in s⁻¹."""
    if sigma_avg < 0 or v_th < 0 or not alpha_c > 0:
        raise ConfigError("cross-section and thermal speed must be >= 0, alpha_c > 0")
    xi = mass_mismatch_factor(sphere.mass, bath.species.mass)
    return xi / alpha_c * bath.number_density * sigma_avg * v_th


def background_gas_damping(env: EnvironmentSpec, sphere: Nanosphere) -> tuple[float, float]:
    """Epstein drag rate of the sphere in the background gas, and T_H."""
    m_g = env.background_mean_molecular_mass
    T = env.background_temperature
    gamma = (EPSTEIN_DIFFUSE * env.background_pressure / (sphere.radius * sphere.density)
             * math.sqrt(8.0 * m_g / (math.pi * KB * T)))
    return gamma, T


def scattered_power(beams: TripleBeamConfig, sphere: Nanosphere) -> np.ndarray:
    """Rayleigh-scattered power from each beam, W."""
    return np.array([b.intensity * rayleigh_scattering_cross_section(b.wavelength, sphere)
                     for b in beams.beams])


def recoil_heating_power(beams: TripleBeamConfig, sphere: Nanosphere,
                         prefactor: float = 1.0) -> float:
    """Recoil heating power per motional axis, W."""
    p = scattered_power(beams, sphere)
    hw = np.array([HBAR * b.angular_frequency for b in beams.beams])
    return prefactor * float(np.sum(hw * p)) / (3.0 * sphere.mass * C_LIGHT**2)


def recoil_heating_rate(beams: TripleBeamConfig, sphere: Nanosphere, trap_frequency: float,
                        prefactor: float = 1.0) -> tuple[float, float]:
    """Radiation damping rate γ_R and the recoil reservoir temperature T_R.

    ``trap_frequency`` does not change the classical heating power; it is
    validated here because the phonon-number heating rate Ė/(ħΩ) reported
    by :func:`cooling_report` uses it.
    """
    if not trap_frequency > 0:
        raise ConfigError("trap frequency must be > 0")
    if prefactor < 0:
        raise ConfigError("recoil prefactor must be >= 0")
    gamma = float(np.sum(scattered_power(beams, sphere))) / (sphere.mass * C_LIGHT**2)
    hw = np.array([HBAR * b.angular_frequency for b in beams.beams])
    if gamma > 0:
        T = recoil_heating_power(beams, sphere, prefactor) / (KB * gamma)
    else:
        T = prefactor * float(np.mean(hw)) / (3.0 * KB)
    return gamma, T


def effective_temperature(channels) -> float:
    """T_e = Σγ_i T_i / Σγ_i over (γ, T) pairs."""
    g = np.array([c[0] for c in channels], dtype=float)
    t = np.array([c[1] for c in channels], dtype=float)
    if np.any(g < 0) or np.any(t < 0):
        raise ConfigError("rates and temperatures must be >= 0")
    if not np.sum(g) > 0:
        raise DomainError("effective temperature undefined: all rates are zero")
    w = g / np.max(g)  # scale-free weights: no underflow for tiny rates
    return float(np.sum(w * t) / np.sum(w))


def phonon_occupancy(T: float, trap_frequency: float) -> float:
    """Bose factor 1/(exp(ħω/k_BT) − 1)."""
    if not (T > 0 and trap_frequency > 0):
        raise ConfigError("temperature and trap frequency must be > 0")
    x = HBAR * 2.0 * math.pi * trap_frequency / (KB * T)
    # e^(−x)/(1 − e^(−x)) stays finite as T → 0
    return math.exp(-x) / -math.expm1(-x)


def cooling_report(bath: BathSpec, env: EnvironmentSpec, sphere: Nanosphere,
                   beams: TripleBeamConfig | None, sigma_avg: float, trap_frequency: float,
                   alpha_c: float = ALPHA_C, recoil_prefactor: float = 1.0,
                   details: dict | None = None) -> CoolingReport:
    """Evaluate all channels and the steady state for a given ⟨σ⟩."""
    m_a = bath.species.mass
    v_th = thermal_speed(bath.temperature, m_a)
    xi = mass_mismatch_factor(sphere.mass, m_a)
    g_c = collisional_cooling_rate(bath, sphere, sigma_avg, v_th, alpha_c)
    g_h, t_h = background_gas_damping(env, sphere)
    if beams is None:
        g_r, t_r, heat = 0.0, 0.0, 0.0
    else:
        g_r, t_r = recoil_heating_rate(beams, sphere, trap_frequency, recoil_prefactor)
        heat = recoil_heating_power(beams, sphere, recoil_prefactor)
    t_e = effective_temperature([(g_c, bath.temperature), (g_h, t_h), (g_r, t_r)])
    info = {
        "alpha_c": alpha_c,
        "recoil_prefactor": recoil_prefactor,
        "recoil_heating_power_W": heat,
        "recoil_phonon_rate_per_s": heat / (HBAR * 2.0 * math.pi * trap_frequency),
        "bath_number_density_m3": bath.number_density,
        "background_pressure_Pa": env.background_pressure,
        "sphere_mass_kg": sphere.mass,
        "atom_mass_kg": m_a,
    }
    info.update(details or {})
    return CoolingReport(g_c, g_h, g_r, bath.temperature, t_h, t_r, t_e, v_th, xi, sigma_avg,
                         phonon_occupancy(t_e, trap_frequency), trap_frequency, info)


def calibrate_recoil_prefactor(target_T_e: float, bath: BathSpec, env: EnvironmentSpec,
                               sphere: Nanosphere, beams: TripleBeamConfig, sigma_avg: float,
                               trap_frequency: float, alpha_c: float = ALPHA_C) -> float:
    """Recoil prefactor η for which T_e equals ``target_T_e``.

    T_e is linear in η through γ_R·T_R only (γ_R does not depend on η), so
    the solution is closed-form.
    """
    base = cooling_report(bath, env, sphere, beams, sigma_avg, trap_frequency, alpha_c, 0.0)
    g_sum = base.gamma_C + base.gamma_H + base.gamma_R
    unit = recoil_heating_power(beams, sphere, 1.0) / KB
    if unit <= 0:
        raise ConfigError("no recoil heating to calibrate: beam intensities are zero")
    need = target_T_e * g_sum - base.gamma_C * base.T_C - base.gamma_H * base.T_H
    if need < 0:
        raise ConfigError(
            f"target T_e = {target_T_e:.3e} K is below what the other channels allow"
        )
    return need / unit


@dataclass(frozen=True)
class ThermalCrossSection:
    """⟨σ⟩(T) from a computed curve, optionally pinned to a reference value.

    Without an anchor this is the plain Maxwell-Boltzmann average of
    ``curve``. With ``anchor = (σ_ref, T_ref)`` the curve supplies only the
    temperature dependence: ⟨σ⟩(T) = σ_ref ⟨σ⟩_curve(T)/⟨σ⟩_curve(T_ref).
    """

    curve: object
    atom_mass: float
    anchor: tuple[float, float] | None = None

    def raw(self, temperature: float) -> float:
        return speed_averaged_cross_section(self.curve, temperature, self.atom_mass)

    def __call__(self, temperature: float) -> float:
        value = self.raw(temperature)
        if self.anchor is None:
            return value
        sigma_ref, t_ref = self.anchor
        return sigma_ref * value / self.raw(t_ref)
