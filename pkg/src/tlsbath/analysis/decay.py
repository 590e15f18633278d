"""Maximum-likelihood T_1 from shot-noise-limited inversion-recovery records."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import xlogy


@dataclass(frozen=True)
class DecayFit:
    """``t1`` and ``t1_stderr`` in us; ``deviance_per_dof`` ~ 1 for a good single-exponential fit."""

    t1: float
    t1_stderr: float
    amplitude: float
    deviance_per_dof: float

    @property
    def misfit(self):
        """Flag records a single exponential does not describe (threshold: deviance/dof > 2)."""
        return self.deviance_per_dof > 2.0


def _nll(theta, t, k, n):
    # theta = (log T1, logit A)
    t1 = math.exp(theta[0])
    a = 1.0 / (1.0 + math.exp(-theta[1]))
    p = np.clip(a * np.exp(-t / t1), 1e-300, 1.0 - 1e-16)
    return -float(np.sum(xlogy(k, p) + xlogy(n - k, 1.0 - p)))


def _deviance(t, k, n, p):
    p = np.clip(p, 1e-300, 1.0 - 1e-16)
    q = k / n
    sat = xlogy(k, q) + xlogy(n - k, 1.0 - q)
    fit = xlogy(k, p) + xlogy(n - k, 1.0 - p)
    return 2.0 * float(np.sum(sat - fit))


def fit_exponential_decay(record, fit_amplitude=True):
    """Binomial maximum-likelihood fit of ``P(tau) = A exp(-tau/T_1)``.

    The standard error comes from the observed Fisher information of
    ``log T_1``. Raises ValueError for fewer than 5 delays, zero delay
    spread, or counts that carry no decay information (all 0 or all full).
    """
    t = np.asarray(record.delays, dtype=float)
    k = np.asarray(record.counts, dtype=float)
    n = float(record.shots)
    if t.size < 5 or np.ptp(t) == 0:
        raise ValueError("need at least 5 distinct delays")
    if np.all(k == 0) or np.all(k == n):
        raise ValueError("counts are all zero or all full; T1 is not identifiable")
    # log-linear start from the populated delays
    good = (k > 0) & (k < n)
    if good.sum() >= 2:
        slope, icpt = np.polyfit(t[good], np.log(k[good] / n), 1)
        t1_0 = -1.0 / slope if slope < 0 else np.ptp(t)
        a0 = min(math.exp(icpt), 0.999)
    else:
        t1_0, a0 = float(np.mean(t)), 0.9
    t1_0 = float(np.clip(t1_0, 1e-3 * t.max() + 1e-12, 1e3 * t.max()))
    theta0 = np.array([math.log(t1_0), math.log(a0 / (1.0 - a0)) if fit_amplitude else 40.0])
    if fit_amplitude:
        res = minimize(_nll, theta0, args=(t, k, n), method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 4000})
        theta = res.x
    else:
        res = minimize(lambda th: _nll(np.array([th[0], 40.0]), t, k, n), theta0[:1], method="Nelder-Mead",
                       options={"xatol": 1e-12, "fatol": 1e-12, "maxiter": 2000})
        theta = np.array([res.x[0], 40.0])
    t1 = math.exp(theta[0])
    a = 1.0 / (1.0 + math.exp(-theta[1]))
    p = a * np.exp(-t / t1)
    # Fisher information for log T1 (amplitude held at its estimate)
    dp = p * t / t1
    info = float(np.sum(n * dp**2 / np.clip(p * (1.0 - p), 1e-300, None)))
    se_log = 1.0 / math.sqrt(info) if info > 0 else float("inf")
    dof = max(t.size - (2 if fit_amplitude else 1), 1)
    return DecayFit(t1, t1 * se_log, a, _deviance(t, k, n, p) / dof)
