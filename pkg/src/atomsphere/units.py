"""Physical constants and the human-unit conversions used at the I/O boundary.

Everything inside the package is SI. Configuration files and the CLI speak
nm, µK, W/cm², mbar and amu; conversion happens once, here.
"""

from scipy import constants as _sc

C_LIGHT = _sc.c
EPS0 = _sc.epsilon_0
HBAR = _sc.hbar
KB = _sc.k
E_CHARGE = _sc.e
M_ELECTRON = _sc.m_e
AMU = _sc.physical_constants["atomic mass constant"][0]
BOHR = _sc.physical_constants["Bohr radius"][0]

# atomic unit of polarizability, 4πε₀a₀³
AU_POLARIZABILITY = 4.0 * _sc.pi * EPS0 * BOHR**3

NM = 1e-9
UM = 1e-6
MICROKELVIN = 1e-6
MBAR = 100.0  # Pa
W_PER_CM2 = 1e4  # W/m²
PER_CM3 = 1e6  # m⁻³
NM2 = 1e-18  # m²


def amu_to_kg(mass_amu):
    return mass_amu * AMU


def kelvin_to_joule(temperature):
    return KB * temperature


def joule_to_kelvin(energy):
    return energy / KB


def microkelvin_to_joule(t_uk):
    return KB * t_uk * MICROKELVIN


def joule_to_microkelvin(energy):
    return energy / (KB * MICROKELVIN)
