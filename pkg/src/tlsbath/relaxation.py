"""Forward model: qubit relaxation from a bath, continuum closed forms, xi statistics."""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from . import geometry as geo
from . import units
from ._kernels import total_rate_on_grid
from .kernel import lorentzian
from .special import complementary_elliptic_k


@dataclass(frozen=True)
class RatePrediction:
    """Total Gamma_1 [1/us]; ``contributions`` holds per-defect rates for scalar frequencies."""

    total: object
    background: float
    contributions: np.ndarray = None

    @property
    def t1(self):
        return 1.0 / np.asarray(self.total)


def total_gamma1(bath, f, frequencies=None, background=0.0):
    """Qubit relaxation rate from every defect in ``bath`` at qubit frequency ``f`` [GHz].

    ``frequencies`` optionally replaces the bath's base frequencies (the
    instantaneous ``f_d(t)`` from the dynamics module). For scalar ``f`` the
    per-defect decomposition is returned as well.
    """
    f_d = bath.f_d0 if frequencies is None else np.asarray(frequencies, dtype=float)
    f_arr = np.asarray(f, dtype=float)
    cfg = bath.config
    if np.any(f_arr < cfg.f_lo) or np.any(f_arr > cfg.f_hi):
        warnings.warn("evaluating Gamma_1 outside the bath frequency band", stacklevel=2)
    if f_arr.ndim == 0:
        parts = lorentzian(float(f_arr), bath.g, bath.gamma_d, f_d)
        total = float(total_rate_on_grid(f_arr.reshape(1), f_d, bath.g, bath.gamma_d, background)[0])
        return RatePrediction(total, background, parts)
    return RatePrediction(total_rate_on_grid(f_arr.ravel(), f_d, bath.g, bath.gamma_d, background).reshape(f_arr.shape), background)


def _edge_prefactor(geom, sigma, p_max):
    """sigma p_max^2 V_zp^2 / (h K'^2) * r_o^2/(r_o^2-r_i^2) in SI (sigma per Hz per m^2)."""
    sigma_si = units.to_si(sigma, "1/(GHz um^2)")
    p = units.to_si(p_max, "debye")
    v = geo.zero_point_voltage(geom)
    kp = complementary_elliptic_k(geom.r_i / geom.r_o)
    ratio = geom.r_o**2 / (geom.r_o**2 - geom.r_i**2)
    return sigma_si * p**2 * v**2 / (units.H * kp**2) * ratio


def continuum_gamma1(geom, sigma, p_max, alpha_convention="exact"):
    """Continuum TLS relaxation rate [1/us] of the gap SA interface.

    ``Gamma_1 = (8 pi^3 / 3h) sigma p_max^2 V_zp^2 alpha / K'^2 * r_o^2/(r_o^2-r_i^2)``
    with ``sigma`` counted per unit frequency (one factor of h absorbed).
    """
    alpha = geo.alpha_factor(geom, alpha_convention)
    rate_si = 8.0 * math.pi**3 / 3.0 * _edge_prefactor(geom, sigma, p_max) / units.H * alpha
    return rate_si * 1e-6


def continuum_gamma1_quadrature(geom, sigma, p_max):
    """Golden-rule rate by direct quadrature of ``<p^2> E(r)^2 r`` over the trimmed gap.

    Independent of :func:`alpha_factor`: ``Gamma_1 = (2 pi sigma / hbar^2) <p^2> int E^2 r dr``.
    """
    lo, hi = geom.r_i + geom.delta, geom.r_o - geom.delta
    mid = 0.5 * (lo + hi)

    def integrand(r):
        return geo.gap_field(geom, r) ** 2 * r

    pts = np.geomspace(geom.delta, 0.5 * geom.gap, 12)
    left, _ = integrate.quad(integrand, lo, mid, points=list(geom.r_i + pts[1:-1]), limit=400, epsabs=0, epsrel=1e-11)
    right, _ = integrate.quad(integrand, mid, hi, points=list(geom.r_o - pts[1:-1]), limit=400, epsabs=0, epsrel=1e-11)
    integral = (left + right) * 1e-12  # um dr r -> m^2
    p2 = units.to_si(p_max, "debye") ** 2 / 3.0
    sigma_si = units.to_si(sigma, "1/(GHz um^2)")
    return 2.0 * math.pi * sigma_si * p2 * integral / units.HBAR**2 * 1e-6


def xi_slope(geom, sigma, p_max, df=1.0):
    """Edge-regime slope dN/dxi [per GHz^-2] of the cumulative xi count in a band ``df`` [GHz].

    ``dN/(dxi df) = (2 pi / 3h) sigma p_max^2 V_zp^2 / K'^2 * r_o^2/(r_o^2-r_i^2)``.
    """
    slope_si = 2.0 * math.pi / 3.0 * _edge_prefactor(geom, sigma, p_max) / units.H
    # per s^2 per Hz -> per GHz^-2 per GHz
    return slope_si * 1e-18 * 1e9 * df


def check_slope_rate_relation(geom, sigma, p_max, alpha_convention="exact"):
    """Relative residual of ``dN/(dxi df) = Gamma_1 / (4 pi^2 alpha)`` between the closed forms."""
    slope = xi_slope(geom, sigma, p_max)
    alpha = geo.alpha_factor(geom, alpha_convention)
    gamma_si = continuum_gamma1(geom, sigma, p_max, alpha_convention) * 1e6
    predicted = gamma_si / (4.0 * math.pi**2 * alpha) * 1e-9
    return abs(slope - predicted) / slope


def gap_xi_floor(geom, p_max):
    """Smallest attainable gap xi [GHz^-2]: a p_max defect at the inner collar edge."""
    e = geo.gap_field(geom, geom.r_i + geom.delta)
    g = e * units.to_si(p_max, "debye") / units.HBAR / 1e6
    return float(units.xi_from_coupling(g))


def lead_xi_of_x(x, p_max, r_bar, v_zp):
    """xi(x) = 12 h^2 r_bar^2 ln^2(4x/r_bar) / (p_max^2 V_zp^2) for an rms-dipole lead defect [GHz^-2]."""
    x = np.asarray(x, dtype=float)
    p = units.to_si(p_max, "debye")
    r = units.to_si(r_bar, "um")
    xi_si = 12.0 * units.H**2 * r**2 * np.log(4.0 * x / r_bar) ** 2 / (p**2 * v_zp**2)
    return xi_si * 1e18


def lead_x_of_xi(xi, p_max, r_bar, v_zp):
    """Inverse of :func:`lead_xi_of_x`: distance [um] at which an rms lead defect has ``xi``."""
    with np.errstate(over="ignore"):  # x -> inf is the right limit for huge xi
        return 0.25 * r_bar * np.exp(_lead_exponent_coeff(p_max, r_bar, v_zp) * np.sqrt(np.asarray(xi, dtype=float)))


def _lead_exponent_coeff(p_max, r_bar, v_zp):
    # V_zp p_max / (2 sqrt(3) h r_bar) with xi in GHz^-2 (sqrt(xi) in ns)
    p = units.to_si(p_max, "debye")
    return v_zp * p / (2.0 * math.sqrt(3.0) * units.H * units.to_si(r_bar, "um")) * 1e-9


def lead_xi_cdf(lam, p_max, r_bar, v_zp, df, xi, x_min=None, lead_length=None):
    """Expected number of lead defects with ``xi < xi'`` in band ``df`` [GHz].

    With ``x_min`` and ``lead_length`` left as None this is the closed form
    ``(h df / 4) lam r_bar [exp(V_zp p_max sqrt(xi') / (2 sqrt3 h r_bar)) - 1]``
    for an unbounded lead starting where the field diverges (x = r_bar/4).
    Supplying them restricts the count to defects on ``[x_min, lead_length]``.
    ``lam`` is per GHz per um.
    """
    x_of_xi = lead_x_of_xi(xi, p_max, r_bar, v_zp)
    start = 0.25 * r_bar if x_min is None else x_min
    stop = np.inf if lead_length is None else lead_length
    return lam * df * (np.clip(x_of_xi, start, stop) - start)


def predict_t1_power_law(presets, sigma, p_max):
    """Log-log slope of the continuum T_1 = 1/Gamma_1 against gap across geometries sharing C."""
    from .analysis.stats import fit_power_law

    presets = list(presets)
    if len(presets) < 3:
        raise ValueError("need at least three geometries for a power-law fit")
    if len({g.C for g in presets}) != 1:
        raise ValueError("power-law comparison requires a common self-capacitance")
    gaps = [g.gap for g in presets]
    t1 = [1.0 / continuum_gamma1(g, sigma, p_max) for g in presets]
    exponent, _ = fit_power_law(gaps, t1)
    return exponent
