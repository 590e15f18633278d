import numpy as np
import pytest

from tlsbath.analysis.peaks import ExtractedDefect
from tlsbath.analysis.tracking import (
    DefectTrajectory,
    diffusion_lags,
    fit_diffusivity,
    track_all,
    track_defect,
)

TIMES = np.arange(30) / 3.0  # 20-minute scans [hr]


def fits(freqs, g=1.0):
    return [ExtractedDefect(f_d=f, g=g, gamma_d=5.0, baseline=0.0) for f in freqs]


def test_track_follows_slow_wander():
    path = 4.2 + 1e-3 * np.cumsum(np.r_[0.0, np.full(29, 1.0)])  # 1 MHz per scan
    per_scan = [fits([f, 4.4]) for f in path]
    t = track_defect(per_scan, TIMES, (0, 4.2))
    assert len(t) == 30
    assert np.allclose(t.f_d, path)
    assert t.scan_indices.tolist() == list(range(30))


def test_track_stops_after_two_misses():
    per_scan = [fits([4.2]) for _ in range(10)] + [[], []] + [fits([4.2]) for _ in range(5)]
    t = track_defect(per_scan, TIMES[:17], (0, 4.2))
    assert len(t) == 10


def test_track_bridges_single_miss():
    per_scan = [fits([4.2]) for _ in range(5)] + [[]] + [fits([4.2]) for _ in range(5)]
    t = track_defect(per_scan, TIMES[:11], (0, 4.2))
    assert len(t) == 10 and 5 not in t.scan_indices


def test_gate_excludes_jumps():
    per_scan = [fits([4.2])] * 5 + [fits([4.207])] * 5
    t = track_defect(per_scan, TIMES[:10], (0, 4.2), gate_mhz=5.0)
    assert len(t) == 5
    wide = track_defect(per_scan, TIMES[:10], (0, 4.2), gate_mhz=8.0)
    assert len(wide) == 10


def test_seed_must_be_on_a_peak():
    with pytest.raises(ValueError, match="seed"):
        track_defect([fits([4.3])], TIMES[:1], (0, 4.2))


def test_no_fit_used_twice():
    # two defects collapsing onto one line: only one track may claim each fit
    per_scan = [fits([4.200, 4.202])] + [fits([4.201]) for _ in range(11)]
    per_scan[0][1] = ExtractedDefect(f_d=4.202, g=2.0, gamma_d=5.0, baseline=0.0)
    tracks = track_all(per_scan, TIMES[:12], min_length=1)
    used = [(k, f) for t in tracks for k, f in zip(t.scan_indices, t.f_d)]
    assert len(used) == len(set(used))
    assert len(tracks[0]) == 12  # the stronger defect (g=2) takes the shared line


def test_track_all_min_length():
    per_scan = [fits([4.1, 4.3]) for _ in range(12)]
    per_scan[5] = fits([4.1])
    per_scan[6] = fits([4.1])
    tracks = track_all(per_scan, TIMES[:12], min_length=10)
    assert len(tracks) == 1 and tracks[0].f_d[0] == 4.1


def test_trajectory_validation():
    with pytest.raises(ValueError):
        DefectTrajectory(np.array([0.0, 0.0]), np.array([4.0, 4.0]))
    with pytest.raises(ValueError):
        DefectTrajectory(np.array([0.0, 1.0]), np.array([4.0]))


def test_drift_removal():
    t = DefectTrajectory(TIMES, 4.2 + 1e-3 * 0.6 * TIMES)
    slope, icpt = t.drift()
    assert slope == pytest.approx(0.6) and icpt == pytest.approx(4.2)
    assert np.allclose(t.residuals(), 0.0, atol=1e-9)


def test_diffusion_lags():
    assert diffusion_lags(72).tolist() == list(range(1, 11))
    assert diffusion_lags(12).tolist() == [1, 2, 3, 4]


def test_diffusivity_of_pure_drift_is_zero():
    t = DefectTrajectory(TIMES, 4.2 + 1e-3 * 2.0 * TIMES)
    assert fit_diffusivity(t).D == pytest.approx(0.0, abs=1e-9)


def test_diffusivity_of_random_walks(rng):
    # sigma(tau) = 2 D sqrt(tau): steps of sd 2 D sqrt(dt)
    D, dt = 2.2, 1.0 / 3.0
    t = np.arange(72) * dt
    est = []
    for _ in range(300):
        f = 4.2 + 1e-3 * np.cumsum(np.r_[0.0, rng.normal(0, 2 * D * np.sqrt(dt), 71)])
        est.append(fit_diffusivity(DefectTrajectory(t, f)).D)
    # drift removal and the ddof choice leave a small downward bias at 72 points
    assert np.mean(est) == pytest.approx(D, rel=0.1)


def test_diffusivity_needs_ten_points():
    with pytest.raises(ValueError):
        fit_diffusivity(DefectTrajectory(TIMES[:9], np.full(9, 4.2)))


def test_irregular_sampling_uses_mean_lags():
    t = np.r_[TIMES[:5], TIMES[6:16]]
    traj = DefectTrajectory(t, 4.2 + 1e-3 * np.sin(t))
    fit = fit_diffusivity(traj)
    assert fit.lags_hr[0] > 1.0 / 3.0
