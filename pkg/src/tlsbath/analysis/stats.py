"""T_1 distribution statistics and power-law fits."""

from dataclasses import dataclass

import numpy as np
from scipy import optimize, stats

_N_CDF_POINTS = 2001


@dataclass(frozen=True)
class T1Stats:
    """Pooled T_1 statistics [us].

    ``cdf_x``/``cdf_y`` sample the empirical CDF at evenly spaced plotting
    positions; ``gauss_mu``/``gauss_sigma`` are a least-squares Gaussian-CDF
    fit to it and ``gauss_residual`` its rms residual.
    """

    n: int
    mean: float
    sd: float
    median: float
    cdf_x: np.ndarray
    cdf_y: np.ndarray
    gauss_mu: float
    gauss_sigma: float
    gauss_residual: float

    def quantile(self, q):
        return float(np.interp(q, self.cdf_y, self.cdf_x))

    def to_rows(self):
        return list(zip(self.cdf_x.tolist(), self.cdf_y.tolist()))


def pooled_t1(source):
    """Flat array of finite T_1 values from a SwapMap, a list of maps, or raw values."""
    if hasattr(source, "t1"):
        vals = source.t1()
    elif isinstance(source, (list, tuple)) and source and hasattr(source[0], "t1"):
        vals = np.concatenate([m.t1().ravel() for m in source])
    else:
        vals = np.asarray(source, dtype=float)
    vals = np.ravel(vals)
    return vals[np.isfinite(vals)]


def ecdf_points(values, n_points=_N_CDF_POINTS):
    """Empirical CDF of ``values`` at ``n_points`` evenly spaced probabilities in [0, 1].

    Uses numpy's linear quantile definition, so the point at 0.5 is exactly
    the sample median.
    """
    y = np.linspace(0.0, 1.0, n_points)
    return np.quantile(values, y), y


def fit_gaussian_cdf(x, y):
    """Least-squares fit of a normal CDF to ``(x, y)``; returns (mu, sigma, rms residual)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    mu0 = float(np.interp(0.5, y, x))
    s0 = float(np.interp(0.8413, y, x) - np.interp(0.1587, y, x)) / 2.0 or 1.0

    def resid(th):
        return stats.norm.cdf(x, th[0], abs(th[1])) - y

    res = optimize.least_squares(resid, [mu0, s0], x_scale=[abs(s0), abs(s0)], ftol=1e-12, xtol=1e-12)
    return float(res.x[0]), float(abs(res.x[1])), float(np.sqrt(np.mean(res.fun**2)))


def t1_statistics(source):
    """Mean, sd, median, empirical CDF and Gaussian-CDF fit of pooled T_1 = 1/Gamma_1."""
    t1 = pooled_t1(source)
    if t1.size == 0:
        raise ValueError("no finite T1 values")
    cx, cy = ecdf_points(t1)
    sd = float(t1.std())
    if sd > 0:
        mu, sig, resid = fit_gaussian_cdf(cx, cy)
    else:
        mu, sig, resid = float(t1.mean()), 0.0, 0.0
    return T1Stats(int(t1.size), float(t1.mean()), sd, float(np.median(t1)), cx, cy, mu, sig, resid)


def fit_power_law(x, y):
    """Least-squares slope and intercept of log y vs log x: ``y = exp(intercept) x^exponent``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size != y.size or x.size < 3:
        raise ValueError("need at least three (x, y) points")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("power-law fit needs positive values")
    lx = np.log(x)
    if np.ptp(lx) == 0:
        raise ValueError("abscissa values are all identical; exponent undefined")
    exponent, intercept = np.polyfit(lx, np.log(y), 1)
    return float(exponent), float(intercept)
