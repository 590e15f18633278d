"""Analytic-versus-Monte-Carlo consistency checks.

Each ``check_*`` function runs one closed-form or statistical comparison and
returns a :class:`CheckResult`. The acceptance suite, ``tlsbath compare`` and
``tlsbath selfcheck`` all call these; sample sizes are arguments so the same
code runs at full size or reduced for quick checks.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from . import units
from ._kernels import total_rate_on_grid
from .analysis.histograms import XiHistogram, fit_cumulative_slope, ks_distance
from .analysis.peaks import extract_map, extract_trace
from .analysis.stats import t1_statistics
from .analysis.tracking import DefectTrajectory, fit_diffusivity, track_all
from .bath import GAP, BathConfig, build_bath, dipole_normalization, realization_seeds
from .kernel import coupling_from_field, lorentzian
from .relaxation import (
    check_slope_rate_relation,
    continuum_gamma1,
    continuum_gamma1_quadrature,
    gap_xi_floor,
    lead_x_of_xi,
    lead_xi_cdf,
    xi_slope,
)
from .swap import default_freq_grid, simulate_swap_map

SIX_PRESETS = tuple(geo.GEOMETRY_PRESETS)


@dataclass
class CheckResult:
    """Outcome of one check: headline ``value`` compared against ``threshold``."""

    name: str
    passed: bool
    value: float
    threshold: str
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: {self.value:.6g} (require {self.threshold}) [{self.seconds:.1f} s]"

    def to_dict(self):
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "value": float(self.value),
            "threshold": self.threshold,
            "details": _jsonable(self.details),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t0
        return res

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _presets(names):
    return [geo.get_preset(n) if isinstance(n, str) else n for n in names]


def _static_config(**kw):
    kw.setdefault("tf_count", 0)
    return BathConfig(**kw)


# --------------------------------------------------------------------------- closed forms


@_timed
def check_slope_rate_identity(presets=SIX_PRESETS, sigma=2.0, p_max=5.0):
    """Slope/rate identity ``dN/(dxi df) = Gamma_1 / (4 pi^2 alpha)`` for every geometry."""
    res = {g.name: check_slope_rate_relation(g, sigma, p_max) for g in _presets(presets)}
    worst = max(res.values())
    return CheckResult("slope-rate identity residual", worst < 1e-10, worst, "< 1e-10", {"residuals": res})


@_timed
def check_continuum_quadrature(presets=SIX_PRESETS, sigma=2.0, p_max=5.0):
    """Closed-form continuum Gamma_1 against direct quadrature of the cutoff integral."""
    res = {}
    for g in _presets(presets):
        closed = continuum_gamma1(g, sigma, p_max)
        quad = continuum_gamma1_quadrature(g, sigma, p_max)
        res[g.name] = {"closed_form": closed, "quadrature": quad, "rel": abs(closed - quad) / quad}
    worst = max(r["rel"] for r in res.values())
    return CheckResult("continuum Gamma1 vs quadrature (rel)", worst < 0.01, worst, "< 0.01", res)


@_timed
def check_coupling_scale():
    """Coupling arithmetic: 5 D at 1 kV/m, the 3e8 GHz^-2 threshold, and its lead distance."""
    g = coupling_from_field(1e3, 5.0)
    g_mhz = float(units.coupling_rad_per_us_to_ghz(g)) * 1e3
    g_thr_khz = float(units.coupling_rad_per_us_to_ghz(units.coupling_from_xi(3e8))) * 1e6
    xs = {}
    for name in SIX_PRESETS:
        geom = geo.get_preset(name)
        xs[name] = float(lead_x_of_xi(3e8, 5.0, geom.lead_width, geo.zero_point_voltage(geom)))
    ok = abs(g_mhz - 25.0) <= 1.0 and abs(g_thr_khz - 58.0) <= 1.0 and max(xs.values()) < 0.5
    return CheckResult(
        "coupling scale g/2pi at 5 D, 1 kV/m [MHz]", ok, g_mhz,
        "25 +/- 1 MHz; xi=3e8 -> ~58 kHz; x(xi=3e8) < 0.5 um",
        {"g_over_2pi_MHz": g_mhz, "threshold_g_over_2pi_kHz": g_thr_khz, "x_at_threshold_um": xs},
    )


# --------------------------------------------------------------------------- Monte Carlo vs analytics


def xi_slope_window(geom, p_max):
    """Fit window for the small-xi slope: the decade [10, 100] x the gap xi floor.

    Below about ten times the floor the collar cutoff suppresses the
    cumulative count of weak-dipole defects, so the edge-regime slope only
    holds above it.
    """
    floor = gap_xi_floor(geom, p_max)
    return 10.0 * floor, 100.0 * floor


@_timed
def check_xi_slope_mc(geometry="gap100-long", n_realizations=30, seed=20240301, sigma=2.0, p_max=5.0):
    """Cumulative small-xi slope of Monte Carlo gap baths against the closed-form slope."""
    geom = _presets([geometry])[0]
    xi = []
    cfg = None
    for s in realization_seeds(seed, n_realizations):
        cfg = _static_config(sigma=sigma, p_max=p_max, seed=s)
        xi.append(build_bath(geom, cfg, include_leads=False).xi)
    hist = XiHistogram(np.concatenate(xi), n_realizations, cfg.band)
    lo, hi = xi_slope_window(geom, p_max)
    mc = fit_cumulative_slope(hist, lo, hi)
    theory = xi_slope(geom, sigma, p_max)
    rel = abs(mc / theory - 1.0)
    return CheckResult(
        "small-xi slope MC vs closed form (rel)", rel < 0.2, rel, "< 0.2",
        {"mc_slope": mc, "closed_form_slope": theory, "window_GHz^-2": [lo, hi], "realizations": n_realizations},
    )


@_timed
def check_continuum_mc(geometry="gap100-long", n_realizations=30, seed=20240302, sigma=2.0, p_max=5.0):
    """Disorder- and band-averaged Gamma_1 of gap-only baths against the continuum rate."""
    geom = _presets([geometry])[0]
    fg = default_freq_grid()
    means = []
    for s in realization_seeds(seed, n_realizations):
        b = build_bath(geom, _static_config(sigma=sigma, p_max=p_max, seed=s), include_leads=False)
        means.append(float(np.mean(total_rate_on_grid(fg, b.f_d0, b.g, b.gamma_d))))
    mc = float(np.mean(means))
    theory = continuum_gamma1(geom, sigma, p_max)
    rel = abs(mc / theory - 1.0)
    return CheckResult(
        "disorder-averaged Gamma1 vs continuum (rel)", rel < 0.15, rel, "< 0.15",
        {"mc_gamma1_per_us": mc, "continuum_gamma1_per_us": theory, "realizations": n_realizations},
    )


def lead_check_geometry(base="gap100-short"):
    """Lead geometry for the closed-form lead count: field model starting at x = r_bar/4.

    The closed form integrates from the point where the lead field diverges;
    ``x_min`` is placed just above it so the Monte Carlo covers the same range.
    """
    g = _presets([base])[0]
    return g.with_(x_min=0.25 * g.lead_width * (1.0 + 1e-6), name="lead-closed-form")


@_timed
def check_lead_closed_form(geometry="gap100-short", n_realizations=5000, seed=20240303, lam=0.4, p_max=5.0,
                           n_points=31):
    """Monte Carlo lead-bath cumulative xi counts vs the closed form, in Poisson sigmas.

    Lead defects carry the rms dipole ``p_max/sqrt(3)`` (the closed form's
    assumption); counts are pooled over realizations and compared on a
    log-spaced grid spanning xi in [1e7, 1e10] GHz^-2.
    """
    geom = lead_check_geometry(geometry)
    v = geo.zero_point_voltage(geom)
    xi = []
    cfg = None
    for s in realization_seeds(seed, n_realizations):
        cfg = _static_config(sigma=0.0, lam=lam, p_max=p_max, lead_dipole_model="rms", seed=s)
        xi.append(build_bath(geom, cfg, include_gap=False).xi)
    xi = np.sort(np.concatenate(xi))
    grid = np.geomspace(1e7, 1e10, n_points)
    observed = np.searchsorted(xi, grid, side="left").astype(float)
    expected = n_realizations * lead_xi_cdf(lam, p_max, geom.lead_width, v, cfg.band, grid,
                                            x_min=geom.x_min, lead_length=geom.lead_length)
    z = np.abs(observed - expected) / np.sqrt(np.maximum(expected, 1.0))
    unbounded = n_realizations * lead_xi_cdf(lam, p_max, geom.lead_width, v, cfg.band, grid)
    worst = float(z.max())
    return CheckResult(
        "lead closed-form cumulative count (max Poisson z)", worst < 3.0, worst, "< 3 sigma at every xi",
        {"xi": grid, "observed": observed, "expected": expected, "expected_unbounded_lead": unbounded,
         "z": z, "realizations": n_realizations},
    )


@_timed
def check_lead_equivalence(geometry="gap100-short", n_min=10_000, seed=20240304, lam=0.4, area_density=3.2,
                           strip_width=0.125, p_max=5.0):
    """1D edge density vs 2D strip density of lead defects: two-sample KS distance on xi.

    The band is widened so that each population holds about ``1.5 n_min``
    defects in a single realization.
    """
    geom = _presets([geometry])[0]
    z = dipole_normalization(BathConfig().p_min_fraction)
    per_ghz = min(lam, area_density * strip_width) * (geom.lead_length - geom.x_min) * z
    band = 1.5 * n_min / per_ghz
    xis = {}
    for model, s in (("edge", seed), ("area", seed + 1)):
        cfg = _static_config(sigma=0.0, lam=lam, lead_model=model, lead_area_density=area_density,
                             lead_strip_width=strip_width, p_max=p_max, f_lo=0.0, f_hi=band, seed=s)
        xis[model] = build_bath(geom, cfg, include_gap=False).xi
    ks = ks_distance(xis["edge"], xis["area"])
    n = min(x.size for x in xis.values())
    return CheckResult(
        "1D edge vs 2D strip lead xi distribution (KS)", ks < 0.05 and n >= n_min, ks, f"< 0.05 with N >= {n_min}",
        {"n_edge": xis["edge"].size, "n_area": xis["area"].size, "lam": lam, "area_density": area_density,
         "strip_width_um": strip_width},
    )


# --------------------------------------------------------------------------- pipeline checks


def fig3f_config(**kw):
    """Bath parameters of the 100 um short-liftoff scenario (gap, liftoff lead and taper)."""
    base = dict(sigma=2.0, p_max=5.0, lam=0.4, lam_taper=0.25)
    base.update(kw)
    return BathConfig(**base)


def _dominant(b, f):
    return int(np.argmax(lorentzian(f, b.g, b.gamma_d, b.f_d0)))


def isolated_matches(bath, freq, trace, extraction, neighbour_fraction=0.1, width_factor=2.0, min_snr=3.0):
    """Pair fitted peaks with the generating defect, keeping isolated, above-threshold ones.

    A fit is matched to the defect contributing most at its fitted frequency.
    The defect counts as isolated when no other defect with peak height above
    ``neighbour_fraction`` of its own lies within ``width_factor`` times the
    sum of the two FWHMs, and as above threshold when its peak height exceeds
    ``min_snr`` trace standard deviations. Returns (fit, defect index) pairs.
    """
    height = 2.0 * bath.g**2 / bath.gamma_d
    fwhm = bath.gamma_d / math.pi * 1e-3
    sd = float(np.std(trace))
    out = []
    for d in extraction.defects:
        i = _dominant(bath, d.f_d)
        near = (np.abs(bath.f_d0 - bath.f_d0[i]) < width_factor * (fwhm + fwhm[i])) & (height > neighbour_fraction * height[i])
        near[i] = False
        if near.any() or height[i] < min_snr * sd:
            continue
        out.append((d, i))
    return out


@_timed
def check_extraction_fidelity(geometry="gap100-short", n_realizations=100, seed=20240305, max_bias=0.02):
    """Detect+fit on simulated static traces recovers generated g for isolated peaks.

    Fits whose width sits at the grid-resolution floor are excluded (their
    g is resolution-limited, not a fidelity statement about the estimator).
    """
    geom = geo.get_preset(geometry)
    fg = default_freq_grid()
    rel, rel_all, n_limited = [], [], 0
    n_windows = n_rejected = 0
    for s in realization_seeds(seed, n_realizations):
        b = build_bath(geom, fig3f_config(tf_count=0, seed=s))
        y = total_rate_on_grid(fg, b.f_d0, b.g, b.gamma_d)
        ex = extract_trace(fg, y)
        n_windows += ex.n_windows
        n_rejected += ex.n_rejected
        for d, i in isolated_matches(b, fg, y, ex):
            r = d.g / b.g[i] - 1.0
            rel_all.append(r)
            if d.width_limited:
                n_limited += 1
            else:
                rel.append(r)
    rel = np.array(rel)
    med_abs = float(np.median(np.abs(rel))) if rel.size else float("nan")
    bias = float(np.median(rel)) if rel.size else float("nan")
    ok = rel.size >= 20 and med_abs < 0.05 and abs(bias) < max_bias
    return CheckResult(
        "extraction fidelity median |g_fit/g_true - 1|", ok, med_abs, f"< 0.05 with |bias| < {max_bias}",
        {"n_matched": int(rel.size), "median_bias": bias, "bias_sign": "positive" if bias > 0 else "negative",
         "n_width_limited_excluded": n_limited,
         "median_abs_including_width_limited": float(np.median(np.abs(rel_all))) if rel_all else None,
         "n_windows": n_windows, "n_rejected": n_rejected, "realizations": n_realizations},
    )


@_timed
def check_t1_width(geometry="gap100-short", p_values=(2.0, 5.0, 10.0), targets=(20.0, 37.0, 52.0),
                   sigma_p2=50.0, n_realizations=30, seed=20240306, tolerance=0.25):
    """Pooled static T_1 standard deviation across p_max at fixed sigma * p_max^2."""
    geom = geo.get_preset(geometry)
    fg = default_freq_grid()
    out = {}
    ok = True
    worst = 0.0
    for pm, target in zip(p_values, targets):
        pooled = []
        for s in realization_seeds(seed, n_realizations):
            b = build_bath(geom, fig3f_config(sigma=sigma_p2 / pm**2, p_max=pm, tf_count=0, seed=s))
            pooled.append(1.0 / total_rate_on_grid(fg, b.f_d0, b.g, b.gamma_d))
        st = t1_statistics(np.concatenate(pooled))
        dev = abs(st.sd / target - 1.0)
        worst = max(worst, dev)
        ok &= dev <= tolerance
        out[f"p_max={pm:g}"] = {"sd_us": st.sd, "target_us": target, "rel_dev": dev, "mean_us": st.mean,
                                "median_us": st.median}
    return CheckResult("T1 sd vs p_max (worst rel. deviation)", ok, worst, f"<= {tolerance} each", out)


def _pooled_static_t1(geom, config_kw, n_realizations, seed, fg):
    t1, drops = [], []
    for s in realization_seeds(seed, n_realizations):
        b = build_bath(geom, _static_config(seed=s, **config_kw))
        t = 1.0 / total_rate_on_grid(fg, b.f_d0, b.g, b.gamma_d)
        t1.append(t)
        drops.append((b, t))
    return np.concatenate(t1), drops


@_timed
def check_lead_tails(scenarios=(("gap100-long", 0.6, 0.0), ("gap100-short", 0.4, 0.25)), n_realizations=30,
                     seed=20240307, residual_factor=2.0, dropout_fraction=0.15, x_limit=0.5):
    """Lead defects lower T_1, add a non-gaussian low tail, and dominant dropouts sit near the junction.

    For each scenario (geometry, lead density, taper density) the static
    pooled T_1 of gap-only and gap+lead baths (same seeds) are compared:

    * the mean and median must drop when leads are added;
    * the gaussian-CDF rms residual must grow by at least ``residual_factor``;
    * for dropouts (T_1 below ``dropout_fraction`` of the gap-only median)
      whose dominant defect sits on a lead, the median lead distance must be
      below ``x_limit`` [um].
    """
    fg = default_freq_grid()
    out = {}
    ok = True
    ratios = []
    for name, lam, lam_taper in scenarios:
        geom = geo.get_preset(name)
        base = dict(sigma=2.0, p_max=5.0)
        gap_t1, _ = _pooled_static_t1(geom, dict(base, lam=0.0, lam_taper=0.0), n_realizations, seed, fg)
        lead_t1, drops = _pooled_static_t1(geom, dict(base, lam=lam, lam_taper=lam_taper), n_realizations, seed, fg)
        s_gap, s_lead = t1_statistics(gap_t1), t1_statistics(lead_t1)
        threshold = dropout_fraction * s_gap.median
        x_lead, n_gap_dom = [], 0
        for b, t in drops:
            for j in np.flatnonzero(t < threshold):
                i = _dominant(b, fg[j])
                if b.kind[i] == GAP:
                    n_gap_dom += 1
                else:
                    x_lead.append(float(b.location[i]))
        shifted = s_lead.mean < s_gap.mean and s_lead.median < s_gap.median
        ratio = s_lead.gauss_residual / s_gap.gauss_residual
        ratios.append(ratio)
        x_med = float(np.median(x_lead)) if x_lead else float("nan")
        near = bool(x_lead) and x_med < x_limit
        passed = shifted and ratio >= residual_factor and near
        ok &= passed
        out[name] = {
            "lam": lam, "lam_taper": lam_taper,
            "gap_only": {"mean": s_gap.mean, "median": s_gap.median, "sd": s_gap.sd, "gauss_residual": s_gap.gauss_residual},
            "gap_plus_lead": {"mean": s_lead.mean, "median": s_lead.median, "sd": s_lead.sd,
                              "gauss_residual": s_lead.gauss_residual},
            "cdf_shifted_lower": shifted, "residual_ratio": ratio,
            "dropout_threshold_us": threshold, "n_dropouts_gap_dominated": n_gap_dom,
            "n_dropouts_lead_dominated": len(x_lead), "median_lead_x_um": x_med,
            "frac_lead_x_below_limit": float(np.mean(np.array(x_lead) < x_limit)) if x_lead else None,
            "passed": passed,
        }
    return CheckResult("lead-defect T1 tails (min gaussian-residual ratio)", ok, min(ratios),
                       f">= {residual_factor}, CDF shifted lower, dropout median x < {x_limit} um", out)


@_timed
def check_diffusivity(geometry="gap5-short", n_realizations=8, seed=20240308, lo=1.5, hi=3.5, min_tracks=8):
    """Ensemble mean of pipeline diffusivities (simulate -> extract -> track -> fit) with default fluctuators."""
    geom = geo.get_preset(geometry)
    ds, lengths = [], []
    for s in realization_seeds(seed, n_realizations):
        b = build_bath(geom, BathConfig(seed=s))
        m = simulate_swap_map(b)
        per = extract_map(m).per_scan(m.n_scans)
        for tr in track_all(per, m.time_grid / 60.0):
            ds.append(fit_diffusivity(tr).D)
            lengths.append(len(tr))
    mean = float(np.mean(ds)) if ds else float("nan")
    ok = len(ds) >= min_tracks and lo <= mean <= hi
    return CheckResult(
        "pipeline diffusivity ensemble mean [MHz/hr^1/2]", ok, mean, f"in [{lo}, {hi}] over >= {min_tracks} tracks",
        {"n_tracks": len(ds), "D": ds, "median": float(np.median(ds)) if ds else None,
         "mean_track_length": float(np.mean(lengths)) if lengths else None, "realizations": n_realizations},
    )


@_timed
def check_random_walk_diffusivity(D=2.2, n_walks=200, n_points=72, dt_hr=1.0 / 3.0, seed=20240309, tolerance=0.1):
    """Ideal Gaussian random walks with sigma(tau) = 2 D sqrt(tau): recovered D within tolerance."""
    rng = np.random.default_rng(seed)
    t = dt_hr * np.arange(n_points)
    est = []
    for _ in range(n_walks):
        steps = rng.normal(0.0, 2.0 * D * math.sqrt(dt_hr), n_points - 1)
        f = 4.2 + 1e-3 * np.concatenate([[0.0], np.cumsum(steps)])
        est.append(fit_diffusivity(DefectTrajectory(t, f)).D)
    mean = float(np.mean(est))
    rel = abs(mean / D - 1.0)
    return CheckResult("random-walk diffusivity recovery (rel)", rel < tolerance, rel, f"< {tolerance}",
                       {"D_true": D, "D_mean": mean, "D_sd": float(np.std(est)), "walks": n_walks})
