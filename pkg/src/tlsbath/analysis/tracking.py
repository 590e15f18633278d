"""Following fitted defect frequencies through successive scans; diffusivity fits."""

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_GATE_MHZ = 5.0


@dataclass(frozen=True)
class DefectTrajectory:
    """Tracked frequencies ``f_d`` [GHz] at ``times`` [hr] (strictly increasing)."""

    times: np.ndarray
    f_d: np.ndarray
    scan_indices: np.ndarray = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        f = np.asarray(self.f_d, dtype=float)
        if t.shape != f.shape or t.ndim != 1:
            raise ValueError("times and f_d must be matching 1-D arrays")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("trajectory times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "f_d", f)
        if self.scan_indices is not None:
            object.__setattr__(self, "scan_indices", np.asarray(self.scan_indices, dtype=np.int64))

    def __len__(self):
        return self.times.size

    def drift(self):
        """Least-squares line: (slope [MHz/hr], intercept [GHz])."""
        if len(self) < 2:
            return 0.0, float(self.f_d[0]) if len(self) else float("nan")
        slope, icpt = np.polyfit(self.times, self.f_d, 1)
        return float(slope * 1e3), float(icpt)

    def residuals(self):
        """Frequency residuals [MHz] after removing the linear drift."""
        slope, icpt = self.drift()
        return (self.f_d - icpt) * 1e3 - slope * self.times


def track_defect(per_scan, times, seed, gate_mhz=DEFAULT_GATE_MHZ, max_misses=2, exclude=None):
    """Nearest-neighbour association of a defect through ``per_scan`` fits.

    Parameters
    ----------
    per_scan : list of list of ExtractedDefect
        Fitted defects grouped by scan, in scan order.
    times : array_like
        Scan time stamps [hr].
    seed : (int, float)
        Starting scan index and frequency [GHz]; a fitted defect must lie
        within the gate of the seed frequency in that scan.
    exclude : set, optional
        ``(scan, index)`` pairs already claimed by other tracks. Claimed
        entries are skipped and the ones used here are added, so several
        calls never assign one fit twice.

    The track stops after ``max_misses`` consecutive scans with no fit in
    the gate around the last associated frequency.
    """
    times = np.asarray(times, dtype=float)
    k0, f0 = seed
    gate = gate_mhz * 1e-3
    claimed = exclude if exclude is not None else set()
    j0 = _nearest(per_scan[k0], f0, gate, k0, claimed)
    if j0 is None:
        raise ValueError(f"seed frequency {f0} GHz is not on a fitted peak in scan {k0}")
    claimed.add((k0, j0))
    ts, fs, ks = [times[k0]], [per_scan[k0][j0].f_d], [k0]
    misses = 0
    for k in range(k0 + 1, len(per_scan)):
        j = _nearest(per_scan[k], fs[-1], gate, k, claimed)
        if j is None:
            misses += 1
            if misses >= max_misses:
                break
            continue
        misses = 0
        claimed.add((k, j))
        ts.append(times[k])
        fs.append(per_scan[k][j].f_d)
        ks.append(k)
    return DefectTrajectory(np.array(ts), np.array(fs), np.array(ks))


def _nearest(fits, f, gate, k, claimed):
    best, best_d = None, gate
    for j, d in enumerate(fits):
        if (k, j) in claimed:
            continue
        dist = abs(d.f_d - f)
        if dist <= best_d:
            best, best_d = j, dist
    return best


@dataclass(frozen=True)
class DiffusivityFit:
    """``D`` [MHz/hr^1/2] from ``sigma(tau) = 2 D sqrt(tau)`` over the lag ladder."""

    D: float
    stderr: float
    lags_hr: np.ndarray
    sigma_mhz: np.ndarray


def diffusion_lags(n_points, max_lag=10):
    """Lag ladder in samples: 1 .. min(max_lag, n_points // 3)."""
    top = min(max_lag, n_points // 3)
    return np.arange(1, top + 1)


def fit_diffusivity(traj, max_lag=10):
    """Diffusivity of a trajectory after linear-drift removal.

    For each lag in :func:`diffusion_lags` the standard deviation of residual
    increments is computed; ``2 D sqrt(tau)`` is then fit by least squares
    (closed form ``D = sum(sigma sqrt(tau)) / (2 sum(tau))``). The lag in
    hours is the mean time separation of sample pairs at that lag.
    """
    if len(traj) < 10:
        raise ValueError("trajectory needs at least 10 points for a diffusivity fit")
    r = traj.residuals()
    lags = diffusion_lags(len(traj), max_lag)
    tau = np.array([np.mean(traj.times[m:] - traj.times[:-m]) for m in lags])
    sig = np.array([np.std(r[m:] - r[:-m], ddof=1) for m in lags])
    D = float(np.sum(sig * np.sqrt(tau)) / (2.0 * np.sum(tau)))
    resid = sig - 2.0 * D * np.sqrt(tau)
    dof = max(lags.size - 1, 1)
    se = math.sqrt(float(np.sum(resid**2)) / dof / (4.0 * np.sum(tau))) if lags.size > 1 else float("nan")
    return DiffusivityFit(D, se, tau, sig)


def track_all(per_scan, times, gate_mhz=DEFAULT_GATE_MHZ, max_misses=2, min_length=10, seed_scan=0):
    """Track every fitted defect of ``seed_scan`` without double assignment (strongest first)."""
    claimed = set()
    order = sorted(range(len(per_scan[seed_scan])), key=lambda j: -per_scan[seed_scan][j].g)
    tracks = []
    for j in order:
        if (seed_scan, j) in claimed:
            continue
        traj = track_defect(per_scan, times, (seed_scan, per_scan[seed_scan][j].f_d), gate_mhz, max_misses, claimed)
        if len(traj) >= min_length:
            tracks.append(traj)
    return tracks
