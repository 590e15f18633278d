"""Physical constants and the canonical unit system.

Every public function in the package takes and returns values in the
canonical units below. SI conversion happens locally inside formulas.

========================  =============================
quantity                  canonical unit
========================  =============================
length                    um
time                      us (dynamics clock: hours)
frequency f               GHz
angular coupling g        rad/us
rates Gamma_1, Gamma_d    1/us
dipole moment p           Debye
electric field E          V/m
voltage                   V
capacitance               fF
gap defect density        1/(GHz um^2)
lead defect density       1/(GHz um)
diffusivity D             MHz/hr^(1/2)
========================  =============================
"""

import math

import numpy as np
from scipy import constants as _c

# CODATA values via scipy; DEBYE is the conventional 1e-21/c definition.
H = _c.h
HBAR = _c.hbar
E_CHARGE = _c.e
EPSILON_0 = _c.epsilon_0
DEBYE = 1e-21 / _c.c  # 3.33564e-30 C m

# Table of canonical unit -> SI multipliers.
SI_FACTORS = {
    "um": 1e-6,
    "us": 1e-6,
    "hr": 3600.0,
    "min": 60.0,
    "GHz": 1e9,
    "MHz": 1e6,
    "nm": 1e-9,
    "fF": 1e-15,
    "debye": DEBYE,
    "rad/us": 1e6,
    "1/us": 1e6,
    "1/(GHz um^2)": 1.0 / (1e9 * 1e-12),
    "1/(GHz um)": 1.0 / (1e9 * 1e-6),
}


def to_si(value, unit):
    """Convert ``value`` from the canonical ``unit`` to SI."""
    return value * SI_FACTORS[unit]


def from_si(value, unit):
    """Convert an SI ``value`` to the canonical ``unit``."""
    return value / SI_FACTORS[unit]


def ghz_to_cycles_per_us(f):
    """1 GHz is 1e3 cycles per microsecond."""
    return f * 1e3


def coupling_ghz_to_rad_per_us(g_over_2pi_ghz):
    """g [rad/us] = 2 pi 1e3 (g/2pi) [GHz]."""
    return 2.0 * math.pi * 1e3 * np.asarray(g_over_2pi_ghz, dtype=float)


def coupling_rad_per_us_to_ghz(g):
    """Inverse of :func:`coupling_ghz_to_rad_per_us`."""
    return np.asarray(g, dtype=float) / (2.0 * math.pi * 1e3)


def xi_from_coupling(g):
    """Inverse-square coupling xi = (g/2pi)^-2 with g/2pi in GHz (units GHz^-2)."""
    return coupling_rad_per_us_to_ghz(g) ** -2.0


def coupling_from_xi(xi):
    """Angular coupling in rad/us for a given xi in GHz^-2."""
    return coupling_ghz_to_rad_per_us(np.asarray(xi, dtype=float) ** -0.5)


def constants_table():
    """Snapshot of the constants used by the package, for self checks."""
    return {"h": H, "hbar": HBAR, "e": E_CHARGE, "epsilon_0": EPSILON_0, "debye": DEBYE}


REFERENCE_CONSTANTS = {
    "h": 6.62607015e-34,
    "hbar": 1.054571817e-34,
    "e": 1.602176634e-19,
    "epsilon_0": 8.8541878128e-12,
    "debye": 3.33564095e-30,
}
