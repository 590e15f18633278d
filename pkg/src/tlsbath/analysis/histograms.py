"""Cumulative xi histograms normalized per scan and per GHz."""

from dataclasses import dataclass

import numpy as np
from scipy import stats


@dataclass(frozen=True)
class XiHistogram:
    """Cumulative count of defects with xi below a threshold, per scan per GHz.

    Stores the raw xi values so that batches can be merged exactly.
    """

    xi: np.ndarray
    n_scans: int
    band: float

    def __post_init__(self):
        if self.n_scans < 1:
            raise ValueError("n_scans must be >= 1")
        if not self.band > 0:
            raise ValueError("band must be positive")
        object.__setattr__(self, "xi", np.sort(np.asarray(self.xi, dtype=float)))

    @property
    def weight(self):
        return 1.0 / (self.n_scans * self.band)

    def __len__(self):
        return self.xi.size

    def cumulative(self, xi_points):
        """Normalized N(xi < x) at each of ``xi_points``."""
        return np.searchsorted(self.xi, np.asarray(xi_points, dtype=float), side="left") * self.weight

    def steps(self):
        """(xi, cumulative) at every stored value (plot-ready)."""
        return self.xi, np.arange(1, self.xi.size + 1) * self.weight

    def merge(self, other):
        if not np.isclose(self.band, other.band, rtol=1e-12):
            raise ValueError("cannot merge histograms over different bands")
        return XiHistogram(np.concatenate([self.xi, other.xi]), self.n_scans + other.n_scans, self.band)

    def to_rows(self):
        x, n = self.steps()
        return list(zip(x.tolist(), n.tolist()))


def xi_histogram(defects, n_scans, band):
    """Histogram from extracted (or generated) defects carrying an ``xi`` attribute."""
    return XiHistogram(np.array([d.xi for d in defects], dtype=float), int(n_scans), float(band))


def fit_cumulative_slope(hist, xi_lo, xi_hi, n_points=64, intercept=True):
    """Least-squares slope of the cumulative histogram over ``[xi_lo, xi_hi]``.

    The cumulative count is evaluated on a log-spaced grid in the window and
    fit by a straight line (with intercept by default, to absorb the offset
    the finite edge cutoff introduces).
    """
    if not 0 < xi_lo < xi_hi:
        raise ValueError("need 0 < xi_lo < xi_hi")
    x = np.geomspace(xi_lo, xi_hi, n_points)
    y = hist.cumulative(x)
    if intercept:
        slope, _ = np.polyfit(x, y, 1)
    else:
        slope = float(np.dot(x, y) / np.dot(x, x))
    return float(slope)


def ks_distance(a, b):
    """Two-sample Kolmogorov-Smirnov statistic between value sets (or histograms)."""
    a = a.xi if isinstance(a, XiHistogram) else np.asarray(a, dtype=float)
    b = b.xi if isinstance(b, XiHistogram) else np.asarray(b, dtype=float)
    return float(stats.ks_2samp(a, b).statistic)
