"""Physical constants and unit conversions.

External interfaces throughout the package use meV for energy, nm and um for
length, GHz and MHz for frequency, mV for gate voltage, and ns or us for
time. Everything here derives from scipy.constants (CODATA-recommended
values), so no constant is typed in by hand.
"""

import math

from scipy import constants

E_CHARGE = constants.e          # C
H_PLANCK = constants.h          # J s
HBAR = constants.hbar           # J s
M_ELECTRON = constants.m_e      # kg, free-electron mass

# 1 meV in J
MEV = constants.e * 1e-3

# hbar^2 / (2 m_e), the free-electron kinetic prefactor, in meV nm^2
HBAR2_OVER_2ME_MEV_NM2 = HBAR**2 / (2.0 * M_ELECTRON) / MEV * 1e18

# Coulomb coupling e^2/(4 pi eps0) in meV nm (about 1440)
COULOMB_MEV_NM = E_CHARGE / (4.0 * math.pi * constants.epsilon_0) * 1e9 * 1e3

# Rydberg energy in meV
RYDBERG_MEV = constants.value("Rydberg constant times hc in eV") * 1e3

# h * (1 GHz) in meV, i.e. the meV <-> GHz conversion
MEV_PER_GHZ = H_PLANCK * 1e9 / MEV


def mev_to_ghz(e_mev):
    """Convert an energy or energy difference in meV to a frequency in GHz."""
    return e_mev / MEV_PER_GHZ


def ghz_to_mev(f_ghz):
    return f_ghz * MEV_PER_GHZ


def dbm_to_watt(p_dbm: float) -> float:
    return 1e-3 * 10.0 ** (p_dbm / 10.0)


def watt_to_dbm(p_watt: float) -> float:
    if p_watt <= 0.0:
        raise ValueError("power must be positive to express in dBm")
    return 10.0 * math.log10(p_watt / 1e-3)
