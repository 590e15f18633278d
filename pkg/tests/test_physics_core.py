import math

import numpy as np
import pytest
from scipy import integrate, special

from tlsbath import units
from tlsbath.kernel import LorentzianParams, coupling_from_field, lorentzian, lorentzian_fwhm_ghz, lorentzian_rate
from tlsbath.special import complementary_elliptic_k, complete_elliptic_k


# ----------------------------------------------------------------- units


def test_constants_match_reference_table():
    table = units.constants_table()
    for name, ref in units.REFERENCE_CONSTANTS.items():
        assert table[name] == pytest.approx(ref, rel=1e-8)


@pytest.mark.parametrize("unit", sorted(units.SI_FACTORS))
def test_si_round_trip(unit):
    assert units.from_si(units.to_si(3.7, unit), unit) == pytest.approx(3.7, rel=1e-14)


def test_coupling_conversions_are_inverse():
    g = units.coupling_ghz_to_rad_per_us(0.025)
    assert g == pytest.approx(2 * math.pi * 25.0)
    assert units.coupling_rad_per_us_to_ghz(g) == pytest.approx(0.025)


def test_xi_definition():
    # g/2pi = 0.1 GHz -> xi = 100 GHz^-2
    g = units.coupling_ghz_to_rad_per_us(0.1)
    assert units.xi_from_coupling(g) == pytest.approx(100.0)
    assert units.coupling_from_xi(100.0) == pytest.approx(g)


# ----------------------------------------------------------------- elliptic integrals


def test_elliptic_k_at_zero_is_half_pi():
    assert complete_elliptic_k(0.0) == pytest.approx(math.pi / 2, abs=1e-15)


def test_elliptic_k_lemniscate_value():
    assert complete_elliptic_k(2**-0.5) == pytest.approx(1.8540746773013719, rel=1e-14)


@pytest.mark.parametrize("k", [1e-6, 0.1, 0.5, 0.83, 0.99, 0.999999])
def test_elliptic_k_matches_scipy(k):
    # scipy.special.ellipk takes the parameter m = k^2
    assert complete_elliptic_k(k) == pytest.approx(special.ellipk(k * k), rel=1e-12)


@pytest.mark.parametrize("k", [1e-8, 1e-3, 0.3, 0.9, 1.0])
def test_complementary_k_matches_scipy(k):
    assert complementary_elliptic_k(k) == pytest.approx(special.ellipkm1(k * k), rel=1e-12)


@pytest.mark.parametrize("k", [-0.1, 1.0, 1.5])
def test_elliptic_k_rejects_out_of_domain(k):
    with pytest.raises(ValueError):
        complete_elliptic_k(k)


@pytest.mark.parametrize("k", [0.0, -1.0, 1.01])
def test_complementary_k_rejects_out_of_domain(k):
    with pytest.raises(ValueError):
        complementary_elliptic_k(k)


# ----------------------------------------------------------------- Lorentzian kernel


def test_lorentzian_peak_value():
    p = LorentzianParams(g=2.0, gamma_d=4.0, f_d=4.2)
    assert lorentzian_rate(p, 4.2) == pytest.approx(2 * 2.0**2 / 4.0)


def test_lorentzian_integrates_to_g_squared():
    # int Gamma_1 d(f in cycles/us) = g^2
    p = LorentzianParams(g=0.6283, gamma_d=5.0, f_d=4.2)
    area, _ = integrate.quad(lambda x: lorentzian_rate(p, 4.2 + x * 1e-3), -np.inf, np.inf)
    assert area == pytest.approx(p.g**2, rel=1e-8)


def test_lorentzian_fwhm():
    gd = 7.0
    half = lorentzian(4.2 + 0.5 * lorentzian_fwhm_ghz(gd), 1.0, gd, 4.2)
    assert half == pytest.approx(0.5 * lorentzian(4.2, 1.0, gd, 4.2))


def test_lorentzian_params_validation():
    with pytest.raises(ValueError):
        LorentzianParams(g=1.0, gamma_d=0.0, f_d=4.0)
    with pytest.raises(ValueError):
        LorentzianParams(g=-1.0, gamma_d=1.0, f_d=4.0)


def test_coupling_from_field_scale():
    # 5 Debye in 1 kV/m couples at g/2pi ~ 25 MHz
    g = coupling_from_field(1e3, 5.0)
    assert g / (2 * math.pi) == pytest.approx(25.17, abs=0.01)


def test_coupling_from_field_vectorized_and_validated():
    g = coupling_from_field(np.array([1e3, 2e3]), 5.0)
    assert g[1] == pytest.approx(2 * g[0])
    with pytest.raises(ValueError):
        coupling_from_field(-1.0, 5.0)
