"""Single-defect relaxation kernel and the field-to-coupling conversion."""

import math
from dataclasses import dataclass

import numpy as np

from . import units

FOUR_PI_SQ = 4.0 * math.pi**2


@dataclass(frozen=True)
class LorentzianParams:
    """Qubit-TLS coupling ``g`` [rad/us], TLS decay rate ``gamma_d`` [1/us], TLS frequency ``f_d`` [GHz]."""

    g: float
    gamma_d: float
    f_d: float

    def __post_init__(self):
        if not self.gamma_d > 0:
            raise ValueError(f"gamma_d must be positive, got {self.gamma_d}")
        if self.g < 0:
            raise ValueError(f"g must be non-negative, got {self.g}")


def lorentzian_rate(params, f):
    """Incoherent (g << Gamma_d) qubit relaxation rate from one defect.

    ``Gamma_1 = 2 g^2 Gamma_d / (Gamma_d^2 + 4 pi^2 (f - f_d)^2)`` with the
    detuning expressed in cycles/us so all terms share the 1/us scale.

    Parameters
    ----------
    params : LorentzianParams
    f : float or array_like
        Qubit frequency in GHz.

    Returns
    -------
    float or ndarray
        Gamma_1 in 1/us.
    """
    return lorentzian(f, params.g, params.gamma_d, params.f_d)


def lorentzian(f, g, gamma_d, f_d):
    """Array form of :func:`lorentzian_rate` without parameter validation."""
    detuning = units.ghz_to_cycles_per_us(np.asarray(f, dtype=float) - f_d)
    return 2.0 * g**2 * gamma_d / (gamma_d**2 + FOUR_PI_SQ * detuning**2)


def lorentzian_fwhm_ghz(gamma_d):
    """Full width at half maximum Gamma_d / pi, returned in GHz."""
    return gamma_d / math.pi * 1e-3


def coupling_from_field(E, p):
    """Coupling ``g = E p / hbar`` in rad/us for field ``E`` [V/m] and dipole ``p`` [Debye]."""
    E = np.asarray(E, dtype=float)
    p = np.asarray(p, dtype=float)
    if np.any(E < 0) or np.any(p < 0):
        raise ValueError("field and dipole magnitudes must be non-negative")
    g = E * p * units.DEBYE / units.HBAR / 1e6
    return float(g) if g.ndim == 0 else g
