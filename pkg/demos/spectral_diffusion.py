"""Spectral diffusion: telegraph fluctuators, tracking and the diffusivity fit.

Simulates a 24 h map of the 5 um gap device (few, well separated defects),
tracks every defect found in the first scan through later scans and fits
sigma(tau) = 2 D sqrt(tau) to each track. The gate that keeps tracks from
jumping between neighbours also truncates tracks at large telegraph jumps,
so the tracked D sits below the D of the underlying frequency process.

    python demos/spectral_diffusion.py
"""

import argparse

import numpy as np

from tlsbath.analysis.peaks import extract_map
from tlsbath.analysis.tracking import DefectTrajectory, fit_diffusivity, track_all
from tlsbath.bath import BathConfig, build_bath
from tlsbath.geometry import get_preset
from tlsbath.swap import BathDynamics, simulate_swap_map


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    geom = get_preset("gap5-short")
    bath = build_bath(geom, BathConfig(seed=args.seed))
    swap = simulate_swap_map(bath, dynamics_seed=args.seed)
    times = swap.time_grid / 60.0
    tracks = track_all(extract_map(swap).per_scan(swap.n_scans), times)
    print(f"{len(bath)} defects, {len(tracks)} tracks of >= 10 scans")
    for tr in tracks:
        fit = fit_diffusivity(tr)
        print(f"  f_d ~ {tr.f_d[0]:.4f} GHz: {len(tr):2d} points, D = {fit.D:.2f} +/- {fit.stderr:.2f} MHz/hr^1/2")
    if tracks:
        print(f"ensemble mean D from tracks: {np.mean([fit_diffusivity(t).D for t in tracks]):.2f} MHz/hr^1/2")

    # the same defects' true frequency paths, untracked
    dyn = BathDynamics(bath, seed=args.seed)
    paths = np.array([dyn.frequencies_at(t) for t in times])
    true_d = [fit_diffusivity(DefectTrajectory(times, paths[:, i])).D for i in range(min(len(bath), 200))]
    print(f"mean D of the underlying trajectories (first {len(true_d)} defects): {np.mean(true_d):.2f} MHz/hr^1/2")


if __name__ == "__main__":
    main()
