"""Atomic and material optical-response models.

The atom is described by a sum-over-states oscillator model: a handful of
resolved electric-dipole transitions plus one "remainder" oscillator placed
at the photo-ionization threshold that carries whatever static polarizability
the resolved lines do not. This keeps ``α(0)`` equal to the tabulated static
value while giving the correct dispersion near the resolved lines.

The dielectric sphere is described on the imaginary frequency axis by a sum
of Lorentz oscillators, which is what the Casimir-Polder integral needs.

Configuration files are YAML. Two kinds exist, distinguished by ``kind``::

    schema_version: 1
    kind: atom
    name: He* 2^3S_1
    mass_amu: 4.002602
    static_polarizability_SI: 5.2040e-39
    continuum_wavelength_nm: 260.05
    transitions:
      - {label: 2^3S_1-2^3P, wavelength_nm: 1083.331,
         linewidth_MHz: 1.6216, oscillator_strength: 0.53907}

    schema_version: 1
    kind: material
    name: fused silica
    static_permittivity: 3.801
    lorentz_oscillators:
      - {frequency_rad_s: 1.88e14, strength: 1.703, damping_rad_s: 0.0}

Human units (``mass_amu``, ``wavelength_nm``, ``linewidth_MHz``) and SI
spellings (``mass_kg``, ``wavelength_m``, ``linewidth_rad_s``) are both
accepted; :func:`dump_species` writes SI so that a round trip is bit exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError, ResonanceError
from .units import AMU, C_LIGHT, E_CHARGE, M_ELECTRON, NM

SCHEMA_VERSION = 1

# e²/mₑ: converts Σ f/(ω₀²−ω²) into an SI polarizability (C·m²·V⁻¹)
_OSCILLATOR_UNIT = E_CHARGE**2 / M_ELECTRON


@dataclass(frozen=True)
class Transition:
    wavelength: float
    linewidth: float
    oscillator_strength: float
    label: str = ""

    def __post_init__(self):
        if not self.wavelength > 0:
            raise ConfigError(f"transition {self.label!r}: wavelength must be > 0")
        if not self.linewidth > 0:
            raise ConfigError(f"transition {self.label!r}: linewidth must be > 0")
        if not self.oscillator_strength > 0:
            raise ConfigError(f"transition {self.label!r}: oscillator strength must be > 0")

    @property
    def angular_frequency(self) -> float:
        return 2.0 * math.pi * C_LIGHT / self.wavelength


@dataclass(frozen=True)
class AtomSpecies:
    name: str
    mass: float
    static_polarizability: float
    transitions: tuple[Transition, ...]
    continuum_wavelength: float | None = None
    guard_band: float = 1e-3  # in units of the transition linewidth

    def __post_init__(self):
        object.__setattr__(self, "transitions", tuple(self.transitions))
        if not self.mass > 0:
            raise ConfigError(f"species {self.name!r}: mass must be > 0")
        if not self.static_polarizability > 0:
            raise ConfigError(f"species {self.name!r}: static polarizability must be > 0")
        if not self.transitions:
            raise ConfigError(f"species {self.name!r}: at least one transition is required")
        wavelengths = [t.wavelength for t in self.transitions]
        if len(set(wavelengths)) != len(wavelengths):
            raise ConfigError(f"species {self.name!r}: transition wavelengths must be distinct")
        remainder = self.remainder_polarizability
        if remainder < -1e-12 * self.static_polarizability:
            raise ConfigError(
                f"species {self.name!r}: resolved transitions give α(0) = "
                f"{self.static_polarizability - remainder:.4e}, above the static value"
            )
        if remainder > 1e-12 * self.static_polarizability and self.continuum_wavelength is None:
            raise ConfigError(
                f"species {self.name!r}: static polarizability exceeds the line sum; "
                "continuum_wavelength_nm is needed to place the remainder oscillator"
            )

    @property
    def line_sum_static(self) -> float:
        return _OSCILLATOR_UNIT * sum(
            t.oscillator_strength / t.angular_frequency**2 for t in self.transitions
        )

    @property
    def remainder_polarizability(self) -> float:
        return self.static_polarizability - self.line_sum_static

    @property
    def continuum_frequency(self) -> float | None:
        if self.continuum_wavelength is None:
            return None
        return 2.0 * math.pi * C_LIGHT / self.continuum_wavelength

    @property
    def lowest_transition_frequency(self) -> float:
        return min(t.angular_frequency for t in self.transitions)

    def transition_near(self, wavelength: float) -> Transition:
        """Return the transition closest in wavelength to ``wavelength``."""
        return min(self.transitions, key=lambda t: abs(t.wavelength - wavelength))


@dataclass(frozen=True)
class PermittivityModel:
    """ε(iζ) = 1 + Σⱼ sⱼ ωⱼ² / (ωⱼ² + ζ² + γⱼ ζ)."""

    static_permittivity: float
    lorentz_oscillators: tuple[tuple[float, float, float], ...] = field(default_factory=tuple)
    name: str = ""

    def __post_init__(self):
        object.__setattr__(
            self,
            "lorentz_oscillators",
            tuple(tuple(float(v) for v in osc) for osc in self.lorentz_oscillators),
        )
        if not self.static_permittivity >= 1.0:
            raise ConfigError("static permittivity must be >= 1")
        for freq, strength, damping in self.lorentz_oscillators:
            if not (freq > 0 and strength >= 0 and damping >= 0):
                raise ConfigError(
                    "Lorentz oscillators need frequency > 0, strength >= 0, damping >= 0"
                )
        implied = 1.0 + sum(s for _, s, _ in self.lorentz_oscillators)
        if abs(implied - self.static_permittivity) > 1e-9 * self.static_permittivity:
            raise ConfigError(
                f"static permittivity {self.static_permittivity} inconsistent with "
                f"oscillator strengths (1 + Σs = {implied})"
            )


def dynamic_polarizability(species: AtomSpecies, omega):
    """Real-frequency polarizability α(ω) in C·m²·V⁻¹.

    The linewidth is neglected in the denominators; evaluation closer than
    ``species.guard_band`` linewidths to a transition raises
    :class:`ResonanceError`. The sign is physical: negative above a
    resonance (blue detuning), positive below it.
    """
    omega = np.asarray(omega, dtype=float)
    if np.any(omega < 0):
        raise ValueError("ω must be non-negative")
    w2 = omega**2
    total = np.zeros_like(omega)
    for t in species.transitions:
        w0 = t.angular_frequency
        if np.any(np.abs(omega - w0) < species.guard_band * t.linewidth):
            raise ResonanceError(
                f"ω within {species.guard_band:g} Γ of the {t.label or t.wavelength} resonance"
            )
        total = total + _OSCILLATOR_UNIT * t.oscillator_strength / (w0**2 - w2)
    wc = species.continuum_frequency
    if wc is not None:
        total = total + species.remainder_polarizability / (1.0 - w2 / wc**2)
    # the line sum and remainder add to the static value only up to rounding
    total = np.where(omega == 0.0, species.static_polarizability, total)
    return total[()] if total.ndim == 0 else total


def polarizability_at_wavelength(species: AtomSpecies, wavelength: float) -> float:
    return float(dynamic_polarizability(species, 2.0 * math.pi * C_LIGHT / wavelength))


def polarizability_imag_freq(species: AtomSpecies, zeta):
    """α(iζ), positive and monotonically decreasing in ζ ≥ 0."""
    zeta = np.asarray(zeta, dtype=float)
    if np.any(zeta < 0):
        raise ValueError("ζ must be non-negative")
    z2 = zeta**2
    total = np.zeros_like(zeta)
    for t in species.transitions:
        total = total + _OSCILLATOR_UNIT * t.oscillator_strength / (t.angular_frequency**2 + z2)
    wc = species.continuum_frequency
    if wc is not None:
        total = total + species.remainder_polarizability / (1.0 + z2 / wc**2)
    total = np.where(zeta == 0.0, species.static_polarizability, total)
    return total[()] if total.ndim == 0 else total


def permittivity_imag_freq(model: PermittivityModel, zeta):
    zeta = np.asarray(zeta, dtype=float)
    if np.any(zeta < 0):
        raise ValueError("ζ must be non-negative")
    total = np.ones_like(zeta)
    for freq, strength, damping in model.lorentz_oscillators:
        total = total + strength * freq**2 / (freq**2 + zeta**2 + damping * zeta)
    total = np.where(zeta == 0.0, model.static_permittivity, total)
    return total[()] if total.ndim == 0 else total


# --------------------------------------------------------------------------
# configuration files


def _read_yaml(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"{path}: unsupported schema_version {version!r}")
    return data


def _pick(d: dict, options: dict, what: str) -> float:
    """Return the first present key of ``options`` converted to SI."""
    for key, scale in options.items():
        if key in d:
            try:
                return float(d[key]) * scale
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{what}: {key} is not a number") from exc
    raise ConfigError(f"{what}: one of {sorted(options)} is required")


def species_from_dict(data: dict) -> AtomSpecies:
    if data.get("kind", "atom") != "atom":
        raise ConfigError(f"expected kind 'atom', got {data.get('kind')!r}")
    name = str(data.get("name", "unnamed"))
    raw = data.get("transitions")
    if not isinstance(raw, list):
        raise ConfigError(f"species {name!r}: transitions must be a list")
    transitions = []
    for i, t in enumerate(raw):
        if not isinstance(t, dict):
            raise ConfigError(f"species {name!r}: transition {i} must be a mapping")
        what = f"species {name!r} transition {i}"
        transitions.append(
            Transition(
                wavelength=_pick(t, {"wavelength_m": 1.0, "wavelength_nm": NM}, what),
                linewidth=_pick(
                    t, {"linewidth_rad_s": 1.0, "linewidth_MHz": 2.0 * math.pi * 1e6}, what
                ),
                oscillator_strength=_pick(t, {"oscillator_strength": 1.0}, what),
                label=str(t.get("label", "")),
            )
        )
    continuum = None
    if "continuum_wavelength_m" in data or "continuum_wavelength_nm" in data:
        continuum = _pick(
            data, {"continuum_wavelength_m": 1.0, "continuum_wavelength_nm": NM}, name
        )
    return AtomSpecies(
        name=name,
        mass=_pick(data, {"mass_kg": 1.0, "mass_amu": AMU}, f"species {name!r}"),
        static_polarizability=_pick(
            data, {"static_polarizability_SI": 1.0}, f"species {name!r}"
        ),
        transitions=tuple(transitions),
        continuum_wavelength=continuum,
        guard_band=float(data.get("guard_band_linewidths", 1e-3)),
    )


def species_to_dict(species: AtomSpecies) -> dict:
    out = {
        "schema_version": SCHEMA_VERSION,
        "kind": "atom",
        "name": species.name,
        "mass_kg": species.mass,
        "static_polarizability_SI": species.static_polarizability,
        "guard_band_linewidths": species.guard_band,
        "transitions": [
            {
                "label": t.label,
                "wavelength_m": t.wavelength,
                "linewidth_rad_s": t.linewidth,
                "oscillator_strength": t.oscillator_strength,
            }
            for t in species.transitions
        ],
    }
    if species.continuum_wavelength is not None:
        out["continuum_wavelength_m"] = species.continuum_wavelength
    return out


def material_from_dict(data: dict) -> PermittivityModel:
    if data.get("kind") != "material":
        raise ConfigError(f"expected kind 'material', got {data.get('kind')!r}")
    oscillators = []
    for i, osc in enumerate(data.get("lorentz_oscillators") or []):
        what = f"material oscillator {i}"
        oscillators.append(
            (
                _pick(osc, {"frequency_rad_s": 1.0}, what),
                _pick(osc, {"strength": 1.0}, what),
                float(osc.get("damping_rad_s", 0.0)),
            )
        )
    return PermittivityModel(
        static_permittivity=_pick(data, {"static_permittivity": 1.0}, "material"),
        lorentz_oscillators=tuple(oscillators),
        name=str(data.get("name", "")),
    )


def material_to_dict(model: PermittivityModel) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "material",
        "name": model.name,
        "static_permittivity": model.static_permittivity,
        "lorentz_oscillators": [
            {"frequency_rad_s": f, "strength": s, "damping_rad_s": g}
            for f, s, g in model.lorentz_oscillators
        ],
    }


def load_species(config_path) -> AtomSpecies:
    """Load and validate an atom species file."""
    return species_from_dict(_read_yaml(config_path))


def load_material(config_path) -> PermittivityModel:
    return material_from_dict(_read_yaml(config_path))


def dump_species(species: AtomSpecies, path) -> None:
    Path(path).write_text(yaml.safe_dump(species_to_dict(species), sort_keys=False))


def dump_material(model: PermittivityModel, path) -> None:
    Path(path).write_text(yaml.safe_dump(material_to_dict(model), sort_keys=False))


def builtin_path(name: str) -> Path:
    """Path of a data file shipped with the package (``name`` without suffix)."""
    return Path(str(resources.files("atomsphere") / "data" / f"{name}.yaml"))


def builtin_species(name: str = "helium_metastable") -> AtomSpecies:
    return load_species(builtin_path(name))


def builtin_material(name: str = "silica") -> PermittivityModel:
    return load_material(builtin_path(name))
