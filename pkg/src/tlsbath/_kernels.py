"""Compiled inner loops. Serial, fixed summation order, compensated sums."""

import math

import numba
import numpy as np

_FOUR_PI_SQ_CYC = 4.0 * math.pi**2 * 1e6  # 4 pi^2 with GHz -> cycles/us squared


@numba.njit(cache=True, nogil=True)
def lorentzian_sum(f_grid, f_d, g, gamma_d, background):
    """Sum of defect Lorentzians on ``f_grid`` (GHz) with Neumaier compensation."""
    out = np.empty(f_grid.size)
    n = f_d.size
    w = np.empty(n)
    for i in range(n):
        w[i] = 2.0 * g[i] * g[i] * gamma_d[i]
    for j in range(f_grid.size):
        fj = f_grid[j]
        s = background
        c = 0.0
        for i in range(n):
            d = fj - f_d[i]
            x = w[i] / (gamma_d[i] * gamma_d[i] + _FOUR_PI_SQ_CYC * d * d)
            t = s + x
            if abs(s) >= abs(x):
                c += (s - t) + x
            else:
                c += (x - t) + s
            s = t
        out[j] = s + c
    return out


def total_rate_on_grid(f_grid, f_d, g, gamma_d, background=0.0):
    return lorentzian_sum(
        np.ascontiguousarray(f_grid, dtype=np.float64),
        np.ascontiguousarray(f_d, dtype=np.float64),
        np.ascontiguousarray(g, dtype=np.float64),
        np.ascontiguousarray(gamma_d, dtype=np.float64),
        float(background),
    )
