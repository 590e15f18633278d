import numpy as np
import pytest

from tlsbath.analysis.decay import fit_exponential_decay
from tlsbath.analysis.histograms import XiHistogram, fit_cumulative_slope, ks_distance, xi_histogram
from tlsbath.analysis.stats import ecdf_points, fit_gaussian_cdf, fit_power_law, pooled_t1, t1_statistics
from tlsbath.swap import DecayRecord, SwapMap, default_delays, synthesize_inversion_recovery

# ----------------------------------------------------------------- decay fits


def test_decay_fit_recovers_t1(rng):
    fits = [fit_exponential_decay(synthesize_inversion_recovery(1 / 40, default_delays(40.0), 200, rng))
            for _ in range(40)]
    t1 = np.array([f.t1 for f in fits])
    se = np.array([f.t1_stderr for f in fits])
    assert np.mean(t1) == pytest.approx(40.0, rel=0.03)
    # quoted standard errors describe the scatter
    assert np.std(t1) == pytest.approx(np.mean(se), rel=0.35)
    assert np.mean([f.deviance_per_dof for f in fits]) == pytest.approx(1.0, abs=0.3)


def test_decay_fit_fixed_amplitude(rng):
    rec = synthesize_inversion_recovery(0.05, default_delays(20.0), 500, rng)
    fit = fit_exponential_decay(rec, fit_amplitude=False)
    assert fit.t1 == pytest.approx(20.0, rel=0.1)
    assert fit.amplitude == pytest.approx(1.0)


def test_decay_fit_flags_double_exponential():
    t = default_delays(30.0, n=40)
    p = 0.5 * np.exp(-t / 3.0) + 0.5 * np.exp(-t / 80.0)
    rec = DecayRecord(t, np.round(p * 5000).astype(int), 5000)
    assert fit_exponential_decay(rec).misfit


@pytest.mark.parametrize(
    "delays,counts", [([1, 2, 3], [5, 4, 3]), ([1, 1, 1, 1, 1], [5, 4, 3, 2, 1]), ([1, 2, 3, 4, 5], [0] * 5),
                      ([1, 2, 3, 4, 5], [50] * 5)],
)
def test_decay_fit_unidentifiable(delays, counts):
    with pytest.raises(ValueError):
        fit_exponential_decay(DecayRecord(delays, counts, 50))


# ----------------------------------------------------------------- T1 statistics


def test_t1_statistics_of_gaussian(rng):
    s = t1_statistics(rng.normal(100.0, 20.0, 20_000))
    assert s.mean == pytest.approx(100.0, abs=0.5)
    assert s.sd == pytest.approx(20.0, rel=0.02)
    assert s.gauss_mu == pytest.approx(100.0, abs=0.5) and s.gauss_sigma == pytest.approx(20.0, rel=0.02)
    assert s.gauss_residual < 0.005
    assert s.quantile(0.5) == pytest.approx(s.median)


def test_gaussian_residual_detects_tail(rng):
    clean = t1_statistics(rng.normal(100.0, 20.0, 20_000))
    tailed = t1_statistics(np.concatenate([rng.normal(100.0, 20.0, 17_000), rng.uniform(1.0, 40.0, 3_000)]))
    assert tailed.gauss_residual > 3 * clean.gauss_residual


def test_ecdf_median_exact():
    x, y = ecdf_points(np.array([3.0, 1.0, 2.0, 10.0, 5.0]), n_points=5)
    assert x[2] == 3.0 and y[2] == 0.5


def test_fit_gaussian_cdf_exact():
    from scipy import stats
    x = np.linspace(-3, 5, 200)
    mu, sig, res = fit_gaussian_cdf(x, stats.norm.cdf(x, 1.0, 0.7))
    assert (mu, sig) == (pytest.approx(1.0), pytest.approx(0.7))
    assert res < 1e-10


def test_pooled_t1_sources():
    m = SwapMap([4.0, 4.1], [0.0, 20.0], [[0.1, 0.0], [0.05, 0.02]])
    assert sorted(pooled_t1(m)) == [10.0, 20.0, 50.0]  # the Gamma_1 = 0 point is dropped
    assert pooled_t1([m, m]).size == 6
    assert pooled_t1([1.0, np.nan, 2.0]).tolist() == [1.0, 2.0]
    with pytest.raises(ValueError):
        t1_statistics([np.inf])


def test_constant_t1_statistics():
    s = t1_statistics(np.full(10, 50.0))
    assert s.sd == 0.0 and s.gauss_residual == 0.0


def test_power_law_fit():
    x = np.array([5.0, 20.0, 100.0])
    exponent, icpt = fit_power_law(x, 3.0 * x**0.8)
    assert exponent == pytest.approx(0.8) and np.exp(icpt) == pytest.approx(3.0)
    with pytest.raises(ValueError):
        fit_power_law([1, 1, 1], [1, 2, 3])
    with pytest.raises(ValueError):
        fit_power_law([1, 2, 3], [1, -2, 3])


# ----------------------------------------------------------------- xi histograms


def test_histogram_normalization():
    h = XiHistogram(np.array([3.0, 1.0, 2.0, 2.0]), n_scans=2, band=0.5)
    assert h.cumulative([0.5, 1.5, 2.5, 10.0]).tolist() == [0.0, 1.0, 3.0, 4.0]
    x, n = h.steps()
    assert x.tolist() == [1.0, 2.0, 2.0, 3.0] and n[-1] == pytest.approx(4.0)
    assert h.to_rows()[0] == (1.0, 1.0)


def test_histogram_merge():
    a = XiHistogram([1.0, 2.0], 1, 0.5)
    b = XiHistogram([3.0], 2, 0.5)
    m = a.merge(b)
    assert len(m) == 3 and m.n_scans == 3
    with pytest.raises(ValueError):
        a.merge(XiHistogram([1.0], 1, 0.3))


def test_histogram_validation():
    with pytest.raises(ValueError):
        XiHistogram([1.0], 0, 0.5)
    with pytest.raises(ValueError):
        XiHistogram([1.0], 1, 0.0)


def test_histogram_from_defects():
    class D:
        def __init__(self, xi):
            self.xi = xi

    h = xi_histogram([D(5.0), D(1.0)], 3, 0.5)
    assert h.xi.tolist() == [1.0, 5.0] and h.weight == pytest.approx(1 / 1.5)


def test_slope_fit_on_uniform_xi(rng):
    # uniform xi on [0, 1e9] at 20000 defects: slope 2e-5 per GHz^-2 per scan per GHz
    h = XiHistogram(rng.uniform(0, 1e9, 20_000), 1, 1.0)
    assert fit_cumulative_slope(h, 1e8, 9e8) == pytest.approx(2e-5, rel=0.02)
    offset = XiHistogram(rng.uniform(2e8, 1.2e9, 20_000), 1, 1.0)
    assert fit_cumulative_slope(offset, 4e8, 1e9) == pytest.approx(2e-5, rel=0.03)
    with pytest.raises(ValueError):
        fit_cumulative_slope(h, 1e9, 1e8)


def test_slope_fit_through_origin(rng):
    h = XiHistogram(rng.uniform(0, 1e9, 20_000), 1, 1.0)
    assert fit_cumulative_slope(h, 1e8, 9e8, intercept=False) == pytest.approx(2e-5, rel=0.02)


def test_ks_distance(rng):
    a = rng.normal(0, 1, 5000)
    assert ks_distance(a, rng.normal(0, 1, 5000)) < 0.05
    assert ks_distance(XiHistogram(np.abs(a), 1, 1.0), np.abs(a) + 1.0) > 0.3
