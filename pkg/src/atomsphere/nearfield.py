"""Incident plus scattered optical fields around a Rayleigh nanosphere.

A sphere of radius ``a`` and index ``n`` acts as a point dipole with
coupling constant ``C = a³ (n²−1)/(n²+2)`` (its polarizability over 4πε₀).
The single-beam intensity and the incoherent three-beam sum are closed-form
polynomials in ``1/r``; the three-beam sum is isotropic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError
from .species import PermittivityModel
from .units import C_LIGHT, EPS0

ROLES = ("repulsive", "attractive")


@dataclass(frozen=True)
class Nanosphere:
    radius: float
    refractive_index: float
    density: float
    charge: int = 0
    permittivity: PermittivityModel | None = None

    def __post_init__(self):
        if not self.radius > 0:
            raise ConfigError("sphere radius must be > 0")
        if not self.refractive_index >= 1.0:
            raise ConfigError("refractive index must be >= 1")
        if not self.density > 0:
            raise ConfigError("sphere density must be > 0")
        if self.charge < 0 or int(self.charge) != self.charge:
            raise ConfigError("charge must be a non-negative integer number of e")

    @property
    def mass(self) -> float:
        return 4.0 / 3.0 * math.pi * self.radius**3 * self.density

    @property
    def volume(self) -> float:
        return 4.0 / 3.0 * math.pi * self.radius**3


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ConfigError("axis vector must be non-zero")
    return v / norm


@dataclass(frozen=True)
class Beam:
    wavelength: float
    intensity: float
    spot_size: float = 20e-6
    propagation: tuple[float, float, float] = (1.0, 0.0, 0.0)
    polarization: tuple[float, float, float] = (0.0, 0.0, 1.0)
    role: str = "repulsive"

    def __post_init__(self):
        if not self.wavelength > 0:
            raise ConfigError("beam wavelength must be > 0")
        if not self.intensity >= 0:
            raise ConfigError("beam intensity must be >= 0")
        if not self.spot_size > 0:
            raise ConfigError("beam spot size must be > 0")
        if self.role not in ROLES:
            raise ConfigError(f"beam role must be one of {ROLES}")
        k = _unit(self.propagation)
        p = _unit(self.polarization)
        if abs(float(k @ p)) > 1e-12:
            raise ConfigError("beam propagation and polarization axes must be orthogonal")
        object.__setattr__(self, "propagation", tuple(k))
        object.__setattr__(self, "polarization", tuple(p))

    @property
    def wavevector(self) -> float:
        return 2.0 * math.pi / self.wavelength

    @property
    def angular_frequency(self) -> float:
        return 2.0 * math.pi * C_LIGHT / self.wavelength

    @property
    def field_amplitude(self) -> float:
        """E₀ from I₀ = ½ε₀cE₀²."""
        return math.sqrt(2.0 * self.intensity / (EPS0 * C_LIGHT))


@dataclass(frozen=True)
class TripleBeamConfig:
    beams: tuple[Beam, Beam, Beam]
    shared_wavevector_tolerance: float = 1e-6

    def __post_init__(self):
        beams = tuple(self.beams)
        object.__setattr__(self, "beams", beams)
        if len(beams) != 3:
            raise ConfigError("a triple-beam configuration needs exactly 3 beams")
        for i in range(3):
            for j in range(i + 1, 3):
                bi, bj = beams[i], beams[j]
                if abs(np.dot(bi.propagation, bj.propagation)) > 1e-12:
                    raise ConfigError("beam propagation axes must be mutually orthogonal")
                if abs(np.dot(bi.polarization, bj.polarization)) > 1e-12:
                    raise ConfigError("beam polarizations must be mutually orthogonal")
                k_mean = 0.5 * (bi.wavevector + bj.wavevector)
                if abs(bi.wavevector - bj.wavevector) / k_mean > self.shared_wavevector_tolerance:
                    raise ConfigError("beam wavevectors differ by more than the shared tolerance")

    @classmethod
    def orthogonal(cls, wavelength, intensity, spot_size=20e-6, role="repulsive"):
        """Standard triad: x-propagating z-polarized, y/x, z/y."""
        axes = [
            ((1.0, 0.0, 0.0), (0.0, 0.0, 1.0)),
            ((0.0, 1.0, 0.0), (1.0, 0.0, 0.0)),
            ((0.0, 0.0, 1.0), (0.0, 1.0, 0.0)),
        ]
        return cls(
            tuple(
                Beam(wavelength, intensity, spot_size, prop, pol, role) for prop, pol in axes
            )
        )

    @property
    def wavelength(self) -> float:
        return float(np.mean([b.wavelength for b in self.beams]))

    @property
    def intensity(self) -> float:
        """Mean single-beam intensity."""
        return float(np.mean([b.intensity for b in self.beams]))


def clausius_mossotti(n):
    return (n**2 - 1.0) / (n**2 + 2.0)


def coupling_constant(sphere: Nanosphere, refractive_index: float | None = None) -> float:
    """C = α/(4πε₀) = a³(n²−1)/(n²+2) in m³."""
    n = sphere.refractive_index if refractive_index is None else refractive_index
    return sphere.radius**3 * clausius_mossotti(n)


def _check_outside(r, sphere):
    r = np.asarray(r, dtype=float)
    if np.any(r < sphere.radius):
        raise DomainError(
            f"field requested at r = {np.min(r):.4e} m inside the sphere (a = {sphere.radius:.4e} m)"
        )
    return r


def scattered_field_components(r, theta, beam: Beam, sphere: Nanosphere, include_cc=False):
    """Radial and polar field components of incident plus scattered light.

    Returns complex amplitudes ``(E_r, E_θ)`` referenced to the incident
    amplitude ``E₀`` at the sphere centre. With ``include_cc`` the complex
    conjugate is added, giving the real physical field at t = 0.
    """
    r = _check_outside(r, sphere)
    theta = np.asarray(theta, dtype=float)
    C = coupling_constant(sphere)
    k = beam.wavevector
    E = beam.field_amplitude
    kr = k * r
    er = C * E * np.cos(theta) * (2.0 / kr**2 - 2j / kr) * k**2 / r + E * np.cos(theta)
    et = C * E * np.sin(theta) * (1.0 / kr**2 - 1j / kr - 1.0) * k**2 / r - E * np.sin(theta)
    if include_cc:
        return er + np.conj(er), et + np.conj(et)
    return er, et


def field_intensity(r, theta, beam: Beam, sphere: Nanosphere):
    """Diagnostic intensity ½ε₀c(|E_r|²+|E_θ|²) from the field components.

    Not used downstream; :func:`single_beam_intensity` is canonical.
    """
    er, et = scattered_field_components(r, theta, beam, sphere)
    return 0.5 * EPS0 * C_LIGHT * (np.abs(er) ** 2 + np.abs(et) ** 2)


def single_beam_intensity(r, theta, beam: Beam, sphere: Nanosphere):
    """Near-field irradiance around the sphere for one linearly polarized beam.

    ``theta`` is measured from the beam's polarization axis.
    """
    r = _check_outside(r, sphere)
    theta = np.asarray(theta, dtype=float)
    C = coupling_constant(sphere)
    k2r2 = (beam.wavevector * r) ** 2
    r3 = r**3
    r6 = r3 * r3
    along = (4.0 * C * r3 + r6 + 4.0 * C**2 * (1.0 + k2r2)) / r6
    across = (r6 - 2.0 * C * r3 * (1.0 - k2r2) + C**2 * (1.0 - k2r2 + k2r2**2)) / r6
    return beam.intensity * (along * np.cos(theta) ** 2 + across * np.sin(theta) ** 2)


def single_beam_intensity_at(points, beam: Beam, sphere: Nanosphere):
    """Single-beam intensity at Cartesian points of shape (..., 3)."""
    points = np.asarray(points, dtype=float)
    r = np.linalg.norm(points, axis=-1)
    cos_t = np.clip(points @ np.asarray(beam.polarization) / r, -1.0, 1.0)
    return single_beam_intensity(r, np.arccos(cos_t), beam, sphere)


def triple_beam_terms(r, config: TripleBeamConfig, sphere: Nanosphere) -> dict:
    """Per-power contributions to the isotropic three-beam intensity (W/m²)."""
    r = _check_outside(r, sphere)
    C = coupling_constant(sphere)
    terms = {"constant": 0.0, "inverse_r6": 0.0, "inverse_r4": 0.0, "inverse_r2": 0.0,
             "inverse_r": 0.0}
    for b in config.beams:
        k = b.wavevector
        w = b.intensity / 3.0
        terms["constant"] = terms["constant"] + w * 3.0 * np.ones_like(r)
        terms["inverse_r6"] = terms["inverse_r6"] + w * 6.0 * C**2 / r**6
        terms["inverse_r4"] = terms["inverse_r4"] + w * 2.0 * C**2 * k**2 / r**4
        terms["inverse_r2"] = terms["inverse_r2"] + w * 2.0 * C**2 * k**4 / r**2
        terms["inverse_r"] = terms["inverse_r"] + w * 4.0 * C * k**2 / r
    return terms


def triple_beam_intensity(r, config: TripleBeamConfig, sphere: Nanosphere):
    """Isotropic intensity of three incoherent orthogonal beams.

    With equal beams this is ``I₀[3 + 6C²/r⁶ + 2C²k²/r⁴ + 2C²k⁴/r² + 4Ck²/r]``;
    unequal intensities or wavevectors are averaged beam by beam.
    """
    terms = triple_beam_terms(r, config, sphere)
    return (
        terms["constant"]
        + terms["inverse_r6"]
        + terms["inverse_r4"]
        + terms["inverse_r2"]
        + terms["inverse_r"]
    )


def nanosphere_trap_depth(intensity: float, sphere: Nanosphere) -> float:
    """Three-beam optical trap depth for the sphere itself, 3·½α_ns I₀/(ε₀c), in J."""
    alpha_ns = 4.0 * math.pi * EPS0 * coupling_constant(sphere)
    return 3.0 * 0.5 * alpha_ns * intensity / (EPS0 * C_LIGHT)


def rayleigh_scattering_cross_section(wavelength: float, sphere: Nanosphere) -> float:
    """σ_scat = (8π/3) k⁴ C²."""
    k = 2.0 * math.pi / wavelength
    return 8.0 * math.pi / 3.0 * k**4 * coupling_constant(sphere) ** 2
