"""Peak detection and single-Lorentzian extraction on Gamma_1(f) traces."""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from ..units import xi_from_coupling

_C = 4.0 * math.pi**2 * 1e6  # 4 pi^2 (GHz -> cycles/us)^2

DEFAULT_RESIDUAL_THRESHOLD = 1e-2
RESOLUTION_FLOOR = 0.5  # smallest fitted FWHM, in grid steps
_GAMMA_D_MIN = 1e-6


class FitRejected(ValueError):
    """A window whose Lorentzian fit did not converge or gave unphysical parameters."""


@dataclass(frozen=True)
class ExtractedDefect:
    """One fitted Lorentzian: ``f_d`` [GHz], ``g`` [rad/us], ``gamma_d`` and ``baseline`` [1/us].

    ``stderr`` maps parameter names to standard errors; ``residual_norm``
    is the rms fit residual relative to the fitted peak height.
    ``width_limited`` marks lines narrower than the grid can resolve, whose
    ``gamma_d`` sits at the resolution floor (``g`` and ``f_d`` stay usable).
    """

    f_d: float
    g: float
    gamma_d: float
    baseline: float
    stderr: dict = field(default_factory=dict)
    scan_index: int = 0
    residual_norm: float = 0.0
    residual_threshold: float = DEFAULT_RESIDUAL_THRESHOLD
    window: tuple = (0, 0)
    width_limited: bool = False

    @property
    def g_mhz(self):
        """g/2pi in MHz."""
        return self.g / (2.0 * math.pi)

    @property
    def xi(self):
        return float(xi_from_coupling(self.g))

    @property
    def flagged(self):
        """True when a single Lorentzian describes the window poorly (e.g. unresolved pair)."""
        return self.residual_norm > self.residual_threshold


def detect_peaks(trace, n_sd=1.0, margin=3, iterative=False, max_passes=5):
    """Index windows ``(start, stop)`` (stop exclusive) where ``trace`` exceeds mean + n_sd*sd.

    Each contiguous run above threshold is widened by ``margin`` samples on
    both sides and overlapping windows are merged. With ``iterative=True``
    the threshold is recomputed with already-detected windows masked until
    no new window appears.
    """
    y = np.asarray(trace, dtype=float)
    if y.ndim != 1 or y.size < 16:
        raise ValueError("trace must be one-dimensional with at least 16 points")
    mask = np.zeros(y.size, dtype=bool)
    windows = []
    for _ in range(max_passes if iterative else 1):
        rest = y[~mask] if mask.any() else y
        if rest.size < 2:
            break
        sd = rest.std()
        if sd == 0:
            break
        above = y > rest.mean() + n_sd * sd
        new = _runs(above & ~mask)
        if not new:
            break
        windows = _merge(windows + [(max(a - margin, 0), min(b + margin, y.size)) for a, b in new])
        for a, b in windows:
            mask[a:b] = True
    return windows


def _runs(flags):
    idx = np.flatnonzero(np.diff(np.concatenate([[0], flags.astype(np.int8), [0]])))
    return list(zip(idx[::2].tolist(), idx[1::2].tolist()))


def _merge(windows):
    out = []
    for a, b in sorted(windows):
        if out and a <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], b))
        else:
            out.append((a, b))
    return out


def _model(theta, x):
    # theta = (g, gamma_d, offset [MHz from window centre], baseline); x in MHz from centre
    g, gd, off, base = theta
    d = 1e-3 * (x - off)
    return base + 2.0 * g * g * gd / (gd * gd + _C * d * d)


def _jac(theta, x):
    g, gd, off, base = theta
    d = 1e-3 * (x - off)
    den = gd * gd + _C * d * d
    j = np.empty((x.size, 4))
    j[:, 0] = 4.0 * g * gd / den
    j[:, 1] = 2.0 * g * g * (den - 2.0 * gd * gd) / den**2
    j[:, 2] = 2.0 * g * g * gd * 2.0 * _C * d * 1e-3 / den**2
    j[:, 3] = 1.0
    return j


def fit_lorentzian(freq, gamma1, scan_index=0, window=None, residual_threshold=DEFAULT_RESIDUAL_THRESHOLD,
                   max_iter=200, tol=1e-10):
    """Fit ``baseline + 2 g^2 Gamma_d / (Gamma_d^2 + 4 pi^2 (f - f_d)^2)`` to one window.

    Trust-region least squares (bounded: g, baseline >= 0, FWHM >= half a
    grid step, centre inside the window) from an initial guess taken from
    the window itself: ``f_d`` at the maximum, ``Gamma_d = pi * FWHM``,
    ``g`` from the peak height. Raises :class:`FitRejected` on
    non-convergence, zero coupling or a centre pinned at the window edge.
    A baseline pinned at zero is legitimate and kept; a width pinned at the
    resolution floor is kept and marked ``width_limited``.
    """
    f = np.asarray(freq, dtype=float)
    y = np.asarray(gamma1, dtype=float)
    if f.size < 7 or f.size != y.size:
        raise ValueError("a window needs at least 7 matching frequency/rate points")
    centre = 0.5 * (f[0] + f[-1])
    x = (f - centre) * 1e3
    theta0 = _initial_guess(x, y)
    # widths below half a grid step are unresolvable; such fits are pinned to that floor
    gd_min = max(_GAMMA_D_MIN, RESOLUTION_FLOOR * math.pi * abs(x[1] - x[0]))
    lower = np.array([0.0, gd_min, x[0], 0.0])
    upper = np.array([np.inf, np.inf, x[-1], np.inf])
    res = least_squares(
        lambda th: _model(th, x) - y, np.clip(theta0, lower, upper), jac=lambda th: _jac(th, x),
        bounds=(lower, upper), method="trf", ftol=tol, xtol=tol, gtol=tol, max_nfev=max_iter,
        x_scale=np.abs(theta0) + 1e-12,
    )
    if not res.success:
        raise FitRejected(f"fit did not converge: {res.message}")
    g, gd, off, base = res.x
    height = 2.0 * g * g / gd
    if not height > 1e-9 * float(np.max(np.abs(y))):
        raise FitRejected("fitted coupling collapsed to zero")
    width_limited = gd <= gd_min * (1 + 1e-6)
    edge_tol = 1e-6 * abs(x[1] - x[0])
    if off <= x[0] + edge_tol or off >= x[-1] - edge_tol:
        raise FitRejected("fitted centre is pinned at the window edge")
    rms = math.sqrt(float(np.mean(res.fun**2)))
    dof = max(y.size - 4, 1)
    stderr = _stderr(res.jac, float(np.sum(res.fun**2)) / dof)
    lo, hi = window if window is not None else (0, f.size)
    return ExtractedDefect(
        f_d=centre + off * 1e-3, g=g, gamma_d=gd, baseline=base,
        stderr={"g": stderr[0], "gamma_d": stderr[1], "f_d": stderr[2] * 1e-3, "baseline": stderr[3]},
        scan_index=int(scan_index), residual_norm=rms / height, residual_threshold=residual_threshold,
        window=(int(lo), int(hi)), width_limited=bool(width_limited),
    )


def _initial_guess(x, y):
    k = int(np.argmax(y))
    base = float(min(np.median(y[:2]), np.median(y[-2:]), y.min()))
    base = max(base, 0.0)
    peak = max(float(y[k] - base), 1e-300)
    half = base + 0.5 * peak
    left, right = k, k
    while left > 0 and y[left] > half:
        left -= 1
    while right < y.size - 1 and y[right] > half:
        right += 1
    step = x[1] - x[0]
    xl = _cross(x, y, left, left + 1, half) if left < k else x[k] - 0.5 * step
    xr = _cross(x, y, right - 1, right, half) if right > k else x[k] + 0.5 * step
    fwhm_mhz = max(xr - xl, 0.5 * step)
    gd = math.pi * fwhm_mhz  # FWHM [MHz] -> cycles/us, times pi
    g = math.sqrt(peak * gd / 2.0)
    return np.array([g, gd, float(x[k]), base])


def _cross(x, y, i, j, level):
    if y[j] == y[i]:
        return float(x[i])
    return float(x[i] + (level - y[i]) * (x[j] - x[i]) / (y[j] - y[i]))


def _stderr(jac, s2):
    try:
        cov = np.linalg.inv(jac.T @ jac) * s2
        return np.sqrt(np.clip(np.diag(cov), 0.0, None))
    except np.linalg.LinAlgError:
        return np.full(jac.shape[1], np.nan)


@dataclass
class Extraction:
    """Fits from one or more traces, with rejection diagnostics."""

    defects: list = field(default_factory=list)
    n_windows: int = 0
    n_rejected: int = 0
    rejections: list = field(default_factory=list)

    @property
    def n_flagged(self):
        return sum(bool(d.flagged) for d in self.defects)

    def extend(self, other):
        self.defects.extend(other.defects)
        self.n_windows += other.n_windows
        self.n_rejected += other.n_rejected
        self.rejections.extend(other.rejections)
        return self

    def per_scan(self, n_scans):
        out = [[] for _ in range(n_scans)]
        for d in self.defects:
            out[d.scan_index].append(d)
        return out


def extract_trace(freq, gamma1, scan_index=0, n_sd=1.0, margin=3, iterative=False,
                  residual_threshold=DEFAULT_RESIDUAL_THRESHOLD):
    freq = np.asarray(freq, dtype=float)
    gamma1 = np.asarray(gamma1, dtype=float)
    windows = detect_peaks(gamma1, n_sd=n_sd, margin=margin, iterative=iterative)
    out = Extraction(n_windows=len(windows))
    for a, b in windows:
        if b - a < 7:
            out.n_rejected += 1
            out.rejections.append({"scan_index": int(scan_index), "window": [a, b], "reason": "window too short"})
            continue
        try:
            out.defects.append(fit_lorentzian(freq[a:b], gamma1[a:b], scan_index, (a, b), residual_threshold))
        except FitRejected as exc:
            out.n_rejected += 1
            out.rejections.append({"scan_index": int(scan_index), "window": [a, b], "reason": str(exc)})
    return out


def extract_map(swap_map, **options):
    """Run detection and fitting on every scan of a :class:`~tlsbath.swap.SwapMap`."""
    gamma = swap_map.gamma1()
    out = Extraction()
    for k in range(gamma.shape[0]):
        out.extend(extract_trace(swap_map.freq_grid, gamma[k], k, **options))
    return out
