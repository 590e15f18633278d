import math
import warnings

import numpy as np
import pytest

from tlsbath import geometry as geo
from tlsbath import relaxation as rx
from tlsbath.bath import BathConfig, build_bath
from tlsbath.kernel import lorentzian


@pytest.mark.parametrize("name", sorted(geo.GEOMETRY_PRESETS))
def test_slope_rate_identity(name):
    assert rx.check_slope_rate_relation(geo.get_preset(name), 2.0, 5.0) < 1e-12


@pytest.mark.parametrize("name", sorted(geo.GEOMETRY_PRESETS))
def test_continuum_rate_matches_quadrature(name):
    g = geo.get_preset(name)
    assert rx.continuum_gamma1(g, 2.0, 5.0) == pytest.approx(rx.continuum_gamma1_quadrature(g, 2.0, 5.0), rel=1e-6)


def test_continuum_rate_scales_with_density_and_dipole(gap5):
    base = rx.continuum_gamma1(gap5, 1.0, 1.0)
    assert rx.continuum_gamma1(gap5, 3.0, 2.0) == pytest.approx(12.0 * base)


def test_log_alpha_raises_rate(gap5):
    exact = rx.continuum_gamma1(gap5, 2.0, 5.0)
    approx = rx.continuum_gamma1(gap5, 2.0, 5.0, alpha_convention="log")
    assert approx / exact == pytest.approx(geo.alpha_factor(gap5, "log") / geo.alpha_factor(gap5))
    assert approx > exact


def test_t1_grows_with_gap_at_fixed_capacitance():
    exponent = rx.predict_t1_power_law(geo.GEOMETRY_PRESETS.values(), 2.0, 5.0)
    assert 0.3 < exponent < 1.5


def test_power_law_requires_common_capacitance():
    gs = [geo.get_preset("gap5-long"), geo.get_preset("gap20-long"), geo.get_preset("gap100-long").with_(C=80.0)]
    with pytest.raises(ValueError, match="capacitance"):
        rx.predict_t1_power_law(gs, 2.0, 5.0)


def test_total_gamma1_sums_lorentzians(gap5):
    b = build_bath(gap5, BathConfig(sigma=0.2, seed=1, tf_count=0))
    pred = rx.total_gamma1(b, 4.2, background=0.01)
    direct = np.sum(lorentzian(4.2, b.g, b.gamma_d, b.f_d0))
    assert pred.total == pytest.approx(direct + 0.01, rel=1e-10)
    assert pred.contributions.shape == (len(b),)
    assert pred.t1 == pytest.approx(1.0 / pred.total)


def test_total_gamma1_on_grid(gap5):
    b = build_bath(gap5, BathConfig(sigma=0.2, seed=1, tf_count=0))
    f = np.linspace(4.0, 4.5, 11)
    grid = rx.total_gamma1(b, f).total
    point = [rx.total_gamma1(b, x).total for x in f]
    assert np.allclose(grid, point, rtol=1e-10)


def test_total_gamma1_warns_outside_band(gap5):
    b = build_bath(gap5, BathConfig(sigma=0.05, seed=1, tf_count=0))
    with pytest.warns(UserWarning, match="band"):
        rx.total_gamma1(b, 5.0)


def test_total_gamma1_with_shifted_frequencies(gap5):
    b = build_bath(gap5, BathConfig(sigma=0.05, seed=1, tf_count=0))
    shifted = rx.total_gamma1(b, 4.2, frequencies=b.f_d0 + 0.001).total
    expected = np.sum(lorentzian(4.2, b.g, b.gamma_d, b.f_d0 + 0.001))
    assert shifted == pytest.approx(expected)


def test_gap_xi_floor_is_smallest_gap_xi(gap5):
    b = build_bath(gap5, BathConfig(sigma=1.0, seed=2, tf_count=0), include_leads=False)
    assert b.xi.min() >= rx.gap_xi_floor(gap5, 5.0) * (1 - 1e-9)


def test_lead_xi_inverse_pair(gap100_short):
    v = geo.zero_point_voltage(gap100_short)
    x = np.array([0.2, 0.5, 1.0, 2.0])
    xi = rx.lead_xi_of_x(x, 5.0, 0.3, v)
    assert np.allclose(rx.lead_x_of_xi(xi, 5.0, 0.3, v), x)
    assert np.all(np.diff(xi) > 0)


def test_lead_xi_matches_bath_couplings(gap100_short):
    cfg = BathConfig(lam=0.4, tf_count=0, lead_dipole_model="rms", seed=3)
    b = build_bath(gap100_short, cfg, include_gap=False)
    v = geo.zero_point_voltage(gap100_short)
    assert np.allclose(rx.lead_xi_of_x(b.location, 5.0, 0.3, v), b.xi, rtol=1e-10)


def test_lead_cdf_closed_form_unbounded(gap100_short):
    # unbounded form: (h df / 4) lam r_bar [exp(c sqrt(xi)) - 1]
    v = geo.zero_point_voltage(gap100_short)
    xi = np.array([1e7, 1e8, 1e9])
    c = rx._lead_exponent_coeff(5.0, 0.3, v)
    expected = 0.4 * 0.6 * 0.25 * 0.3 * (np.exp(c * np.sqrt(xi)) - 1)
    assert np.allclose(rx.lead_xi_cdf(0.4, 5.0, 0.3, v, 0.6, xi), expected, rtol=1e-12)


def test_lead_cdf_bounded_saturates(gap100_short):
    v = geo.zero_point_voltage(gap100_short)
    n = rx.lead_xi_cdf(0.4, 5.0, 0.3, v, 0.6, np.array([1e14]), x_min=0.15, lead_length=2.0)
    assert n[0] == pytest.approx(0.4 * 0.6 * (2.0 - 0.15))


def test_edge_slope_matches_rate_formula(gap5):
    # dN/(dxi df) Gamma relation restated through alpha
    slope = rx.xi_slope(gap5, 2.0, 5.0)
    gamma = rx.continuum_gamma1(gap5, 2.0, 5.0) * 1e6
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        alpha = geo.alpha_factor(gap5)
    assert slope == pytest.approx(gamma / (4 * math.pi**2 * alpha) * 1e-9, rel=1e-12)
    assert rx.xi_slope(gap5, 2.0, 5.0, df=0.5) == pytest.approx(0.5 * slope)
