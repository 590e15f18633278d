"""Sampling of TLS defect baths in the qubit gap and along the junction leads.

Dipole moments follow the standard-tunneling-model density
``dN/(dp df) ∝ sqrt(1 - p^2/p_max^2) / p``, treated as unnormalized with the
areal (or linear) density as overall scale. Counts therefore carry the
factor ``Z = int_{u_min}^1 sqrt(1-u^2)/u du`` while the second moment
``sum p^2 / (A df) -> sigma p_max^2 / 3`` does not depend on the cutoff.

A bath is stored as parallel numpy arrays (millions of defects are common);
:meth:`DefectBath.defect` gives a per-defect :class:`TlsDefect` view.
"""

import json
import math
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from . import geometry as geo
from .kernel import coupling_from_field
from .units import xi_from_coupling

KIND_NAMES = ("gap", "lead", "taper")
GAP, LEAD, TAPER = 0, 1, 2
LOCATION_KIND = {GAP: "gap_radius", LEAD: "lead_distance", TAPER: "lead_distance"}
_UID_SHIFT = 40
BATH_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ThermalFluctuator:
    """Two-state fluctuator: flip rate ``rate`` [1/hr], frequency pull ``shift`` [MHz], state ±1."""

    rate: float
    shift: float
    state: int = 1
    uid: int = 0

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("fluctuator switching rate must be positive")
        if self.state not in (-1, 1):
            raise ValueError("fluctuator state must be +1 or -1")


@dataclass(frozen=True)
class TlsDefect:
    p: float
    location_kind: str
    location: float
    f_d0: float
    gamma_d: float
    g: float
    fluctuators: tuple = ()
    drift_velocity: float = 0.0
    kind: str = "gap"
    uid: int = 0

    @property
    def xi(self):
        return float(xi_from_coupling(self.g))


@dataclass
class BathConfig:
    """Generation parameters for one disorder realization.

    Densities: ``sigma`` [1/(GHz um^2)] on the gap surface, ``lam`` and
    ``lam_taper`` [1/(GHz um)] along the liftoff and tapered lead edges.
    ``lead_model="area"`` replaces the edge density with an areal density
    ``lead_area_density`` over a strip of width ``lead_strip_width`` [um]
    beside the liftoff lead. ``lead_dipole_model="rms"`` gives every lead
    defect ``p = p_max/sqrt(3)`` (with count density ``lam`` per unit length),
    the assumption behind the closed-form lead cumulative count.
    """

    sigma: float = 2.0
    lam: float = 0.0
    lam_taper: float = 0.0
    p_max: float = 5.0
    p_min_fraction: float = 0.01
    f_lo: float = 3.95
    f_hi: float = 4.55
    gamma_d_mean: float = 5.0
    gamma_d_sd: float = 2.0
    gamma_d_floor: float = 0.5
    tf_count: int = 48
    tf_rate_lo: float = 0.05
    tf_rate_hi: float = 0.5
    tf_shift_sd: float = 1.3
    dominant_tf_fraction: float = 0.0
    dominant_tf_shift: float = 10.0
    dominant_tf_rate: float = 0.5
    drift_velocity: float = 0.0
    both_lead_edges: bool = False
    lead_model: str = "edge"
    lead_area_density: float = 3.2
    lead_strip_width: float = 0.125
    lead_dipole_model: str = "distribution"
    seed: int = 0

    def __post_init__(self):
        problems = self.validate()
        if problems:
            raise ValueError("invalid bath config: " + "; ".join(problems))

    def validate(self):
        problems = []
        if not self.f_lo <= self.f_hi:
            problems.append("need f_lo <= f_hi")
        for name in ("sigma", "lam", "lam_taper", "lead_area_density"):
            if getattr(self, name) < 0:
                problems.append(f"{name} must be non-negative")
        if not self.p_max > 0:
            problems.append("p_max must be positive")
        if not 0 < self.p_min_fraction < 1:
            problems.append("p_min_fraction must lie in (0, 1)")
        if not self.gamma_d_floor > 0 or self.gamma_d_sd < 0:
            problems.append("gamma_d_floor must be positive and gamma_d_sd non-negative")
        if self.tf_count < 0:
            problems.append("tf_count must be >= 0")
        if not 0 < self.tf_rate_lo <= self.tf_rate_hi:
            problems.append("need 0 < tf_rate_lo <= tf_rate_hi")
        if not 0 <= self.dominant_tf_fraction <= 1:
            problems.append("dominant_tf_fraction must lie in [0, 1]")
        if self.lead_model not in ("edge", "area"):
            problems.append("lead_model must be 'edge' or 'area'")
        if self.lead_dipole_model not in ("distribution", "rms"):
            problems.append("lead_dipole_model must be 'distribution' or 'rms'")
        if not self.lead_strip_width > 0:
            problems.append("lead_strip_width must be positive")
        if not 0 <= int(self.seed) < 2**64:
            problems.append("seed must be a 64-bit non-negative integer")
        return problems

    @property
    def band(self):
        return self.f_hi - self.f_lo

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown bath config keys: {sorted(unknown)}")
        return cls(**d)

    def with_(self, **changes):
        return replace(self, **changes)


def dipole_normalization(p_min_fraction):
    """``Z(u0) = int_{u0}^1 sqrt(1-u^2)/u du = artanh(w0) - w0`` with ``w0 = sqrt(1-u0^2)``."""
    w0 = math.sqrt(1.0 - p_min_fraction**2)
    return math.atanh(w0) - w0


_CDF_CACHE = {}


def _dipole_table(p_min_fraction):
    table = _CDF_CACHE.get(p_min_fraction)
    if table is None:
        u = np.geomspace(p_min_fraction, 1.0, 16385)
        w = np.sqrt(np.clip(1.0 - u**2, 0.0, None))
        # antiderivative of sqrt(1-u^2)/u is w - artanh(w); zero at u = 1
        G = w - np.arctanh(np.minimum(w, 1.0 - 1e-17))
        G[-1] = 0.0
        cdf = (G - G[0]) / (-G[0])
        table = _CDF_CACHE[p_min_fraction] = (cdf, u)
    return table


def dipole_cdf(p, p_max, p_min_fraction=0.01):
    """Analytic CDF of the cutoff dipole density on ``(p_min, p_max]``."""
    u = np.clip(np.asarray(p, dtype=float) / p_max, p_min_fraction, 1.0)
    w = np.sqrt(1.0 - u**2)
    G = w - np.arctanh(np.minimum(w, 1.0 - 1e-17))
    return 1.0 + G / dipole_normalization(p_min_fraction)


def sample_dipole(p_max, p_min_fraction, rng, size=None):
    """Draw dipole moments [Debye] by inverse-CDF lookup on a dense table."""
    cdf, u = _dipole_table(p_min_fraction)
    draws = rng.random(size)
    return p_max * np.interp(draws, cdf, u)


def gap_area(geom):
    """SA-interface area of the collar-trimmed gap in um^2."""
    return math.pi * ((geom.r_o - geom.delta) ** 2 - (geom.r_i + geom.delta) ** 2)


def gap_defect_count(sigma, geom, df, p_min_fraction):
    """Expected number of gap defects, ``sigma A df Z``."""
    return sigma * gap_area(geom) * df * dipole_normalization(p_min_fraction)


def lead_segments(geom, config):
    """List of (kind, x_start, x_stop, linear density) lead segments for this config."""
    edges = 2.0 if config.both_lead_edges else 1.0
    if config.lead_model == "area":
        density = config.lead_area_density * config.lead_strip_width
    else:
        density = config.lam
    segs = [(LEAD, geom.x_min, geom.lead_length, edges * density)]
    span = geom.taper_span
    if span is not None and config.lam_taper > 0:
        segs.append((TAPER, span[0], span[1], edges * config.lam_taper))
    return [s for s in segs if s[3] > 0 and s[2] > s[1]]


def lead_defect_count(geom, config):
    """Expected lead-defect count over all segments."""
    z = 1.0 if config.lead_dipole_model == "rms" else dipole_normalization(config.p_min_fraction)
    return sum(dens * (stop - start) * config.band * z for _, start, stop, dens in lead_segments(geom, config))


def sample_gamma_d(config, rng, size=None):
    """Gaussian defect decay rates [1/us], truncated below at ``gamma_d_floor`` by resampling."""
    n = 1 if size is None else int(np.prod(size))
    out = rng.normal(config.gamma_d_mean, config.gamma_d_sd, n)
    bad = out < config.gamma_d_floor
    while bad.any():
        out[bad] = rng.normal(config.gamma_d_mean, config.gamma_d_sd, int(bad.sum()))
        bad = out < config.gamma_d_floor
    return float(out[0]) if size is None else out.reshape(size)


def _sample_fluctuators(n_defects, config, rng):
    """Fluctuator arrays (owner, rate, shift, state0) for ``n_defects`` defects."""
    k = config.tf_count
    owner = np.repeat(np.arange(n_defects, dtype=np.int64), k)
    lo, hi = math.log(config.tf_rate_lo), math.log(config.tf_rate_hi)
    rate = np.exp(rng.uniform(lo, hi, n_defects * k))
    shift = rng.normal(0.0, config.tf_shift_sd, n_defects * k)
    state = np.where(rng.random(n_defects * k) < 0.5, -1, 1).astype(np.int8)
    if config.dominant_tf_fraction > 0:
        has = np.flatnonzero(rng.random(n_defects) < config.dominant_tf_fraction)
        sign = np.where(rng.random(has.size) < 0.5, -1, 1).astype(np.int8)
        owner = np.concatenate([owner, has])
        rate = np.concatenate([rate, np.full(has.size, config.dominant_tf_rate)])
        shift = np.concatenate([shift, np.full(has.size, config.dominant_tf_shift)])
        state = np.concatenate([state, sign])
        order = np.argsort(owner, kind="stable")
        owner, rate, shift, state = owner[order], rate[order], shift[order], state[order]
    return owner, rate, shift, state


def attach_fluctuators(defect, config, rng):
    """Return a copy of ``defect`` carrying freshly sampled thermal fluctuators."""
    _, rate, shift, state = _sample_fluctuators(1, config, rng)
    base = len(defect.fluctuators)
    tfs = tuple(
        ThermalFluctuator(float(r), float(s), int(st), uid=(int(defect.uid) << 8) | (base + j))
        for j, (r, s, st) in enumerate(zip(rate, shift, state))
    )
    return replace(defect, fluctuators=defect.fluctuators + tfs)


@dataclass
class DefectBath:
    """One disorder realization as parallel arrays.

    ``location`` holds the gap radius [um] for gap defects and the distance
    from the junction [um] for lead defects; ``kind`` indexes
    :data:`KIND_NAMES`. Fluctuator arrays are flat with ``tf_owner`` giving
    the defect index; ``tf_uid`` keys each fluctuator's random stream.
    """

    geometry: geo.QubitGeometry
    config: BathConfig
    seed: int
    p: np.ndarray
    kind: np.ndarray
    location: np.ndarray
    f_d0: np.ndarray
    gamma_d: np.ndarray
    g: np.ndarray
    drift: np.ndarray
    tf_owner: np.ndarray
    tf_rate: np.ndarray
    tf_shift: np.ndarray
    tf_state0: np.ndarray
    tf_uid: np.ndarray

    ARRAYS = ("p", "kind", "location", "f_d0", "gamma_d", "g", "drift")
    TF_ARRAYS = ("tf_owner", "tf_rate", "tf_shift", "tf_state0", "tf_uid")

    def __post_init__(self):
        for name in self.ARRAYS + self.TF_ARRAYS:
            arr = np.ascontiguousarray(getattr(self, name))
            arr.flags.writeable = False
            setattr(self, name, arr)

    def __len__(self):
        return self.p.size

    @property
    def n_fluctuators(self):
        return self.tf_rate.size

    @property
    def xi(self):
        return xi_from_coupling(self.g)

    def defect(self, i):
        sel = self.tf_owner == i
        tfs = tuple(
            ThermalFluctuator(float(r), float(s), int(st), int(u))
            for r, s, st, u in zip(self.tf_rate[sel], self.tf_shift[sel], self.tf_state0[sel], self.tf_uid[sel])
        )
        k = int(self.kind[i])
        return TlsDefect(
            p=float(self.p[i]), location_kind=LOCATION_KIND[k], location=float(self.location[i]),
            f_d0=float(self.f_d0[i]), gamma_d=float(self.gamma_d[i]), g=float(self.g[i]),
            fluctuators=tfs, drift_velocity=float(self.drift[i]), kind=KIND_NAMES[k], uid=i,
        )

    def __iter__(self):
        for i in range(len(self)):
            yield self.defect(i)

    def select(self, mask):
        """Sub-bath of the defects where ``mask`` is true (fluctuators follow their owners)."""
        mask = np.asarray(mask, dtype=bool)
        new_index = np.cumsum(mask) - 1
        tf_keep = mask[self.tf_owner] if self.tf_owner.size else np.zeros(0, dtype=bool)
        return DefectBath(
            self.geometry, self.config, self.seed,
            *(getattr(self, n)[mask] for n in self.ARRAYS),
            new_index[self.tf_owner[tf_keep]],
            *(getattr(self, n)[tf_keep] for n in self.TF_ARRAYS[1:]),
        )

    def with_drift(self, velocity):
        """Copy with every defect drifting at ``velocity`` [MHz/hr]."""
        arrays = {n: getattr(self, n) for n in self.ARRAYS + self.TF_ARRAYS}
        arrays["drift"] = np.full(len(self), float(velocity))
        return DefectBath(self.geometry, self.config, self.seed, **arrays)

    def without_fluctuators(self):
        arrays = {n: getattr(self, n) for n in self.ARRAYS}
        empty = _empty_tf()
        return DefectBath(self.geometry, self.config, self.seed, **arrays, **empty)

    @classmethod
    def concat(cls, baths, geometry=None, config=None, seed=None):
        baths = list(baths)
        geometry = geometry or baths[0].geometry
        config = config or baths[0].config
        seed = baths[0].seed if seed is None else seed
        offsets = np.cumsum([0] + [len(b) for b in baths[:-1]])
        arrays = {n: np.concatenate([getattr(b, n) for b in baths]) for n in cls.ARRAYS}
        arrays["tf_owner"] = np.concatenate([b.tf_owner + o for b, o in zip(baths, offsets)])
        for n in cls.TF_ARRAYS[1:]:
            arrays[n] = np.concatenate([getattr(b, n) for b in baths])
        return cls(geometry, config, seed, **arrays)

    def recompute_coupling(self):
        """Couplings recomputed from the geometry fields (for consistency checks)."""
        return defect_couplings(self.geometry, self.kind, self.location, self.p)


def _empty_tf():
    return dict(
        tf_owner=np.zeros(0, dtype=np.int64), tf_rate=np.zeros(0), tf_shift=np.zeros(0),
        tf_state0=np.zeros(0, dtype=np.int8), tf_uid=np.zeros(0, dtype=np.uint64),
    )


def defect_couplings(geom, kind, location, p):
    kind = np.asarray(kind)
    location = np.asarray(location, dtype=float)
    E = np.empty(location.shape)
    gap = kind == GAP
    if gap.any():
        E[gap] = geo.gap_field(geom, location[gap])
    if (~gap).any():
        E[~gap] = geo.lead_field(geom, location[~gap])
    return coupling_from_field(E, np.asarray(p, dtype=float)) * np.ones(location.shape)


def _finish(geom, config, rng, kind_code, location, p):
    n = location.size
    f_d0 = rng.uniform(config.f_lo, config.f_hi, n)
    gamma_d = sample_gamma_d(config, rng, n)
    g = defect_couplings(geom, np.full(n, kind_code), location, p) if n else np.zeros(0)
    owner, rate, shift, state = _sample_fluctuators(n, config, rng)
    uid = (np.uint64(kind_code) << np.uint64(_UID_SHIFT)) | np.arange(owner.size, dtype=np.uint64)
    return DefectBath(
        geom, config, config.seed,
        p=p, kind=np.full(n, kind_code, dtype=np.int8), location=location, f_d0=f_d0,
        gamma_d=gamma_d, g=g, drift=np.full(n, config.drift_velocity),
        tf_owner=owner, tf_rate=rate, tf_shift=shift, tf_state0=state, tf_uid=uid,
    )


def build_gap_bath(geom, config, rng):
    """Poisson number of SA-interface defects, uniform in area over the trimmed gap."""
    mean = gap_defect_count(config.sigma, geom, config.band, config.p_min_fraction)
    n = int(rng.poisson(mean)) if mean > 0 else 0
    lo2, hi2 = (geom.r_i + geom.delta) ** 2, (geom.r_o - geom.delta) ** 2
    r = np.sqrt(lo2 + rng.random(n) * (hi2 - lo2))
    p = sample_dipole(config.p_max, config.p_min_fraction, rng, n)
    return _finish(geom, config, rng, GAP, r, p)


def build_lead_bath(geom, config, rng):
    """Defects along the junction-lead edges (liftoff segment plus optional taper)."""
    parts = []
    z = 1.0 if config.lead_dipole_model == "rms" else dipole_normalization(config.p_min_fraction)
    for kind_code, start, stop, dens in lead_segments(geom, config):
        mean = dens * (stop - start) * config.band * z
        n = int(rng.poisson(mean))
        x = rng.uniform(start, stop, n)
        if config.lead_dipole_model == "rms":
            p = np.full(n, config.p_max / math.sqrt(3.0))
        else:
            p = sample_dipole(config.p_max, config.p_min_fraction, rng, n)
        parts.append(_finish(geom, config, rng, kind_code, x, p))
    if not parts:
        return empty_bath(geom, config)
    return DefectBath.concat(parts, geometry=geom, config=config, seed=config.seed)


def empty_bath(geom, config):
    arrays = {n: np.zeros(0) for n in DefectBath.ARRAYS}
    arrays["kind"] = np.zeros(0, dtype=np.int8)
    return DefectBath(geom, config, config.seed, **arrays, **_empty_tf())


def build_bath(geom, config, include_gap=True, include_leads=True):
    """Full realization for ``config.seed``: gap and lead populations on independent streams."""
    gap_ss, lead_ss = np.random.SeedSequence(int(config.seed)).spawn(2)
    parts = []
    if include_gap:
        parts.append(build_gap_bath(geom, config, np.random.default_rng(gap_ss)))
    if include_leads:
        parts.append(build_lead_bath(geom, config, np.random.default_rng(lead_ss)))
    parts = [b for b in parts if len(b)] or [empty_bath(geom, config)]
    return DefectBath.concat(parts, geometry=geom, config=config, seed=config.seed)


def realization_seeds(seed, n):
    """Independent per-realization 64-bit seeds derived from one master seed."""
    states = np.random.SeedSequence(int(seed)).generate_state(2 * n, dtype=np.uint32)
    return [int(states[2 * i]) << 32 | int(states[2 * i + 1]) for i in range(n)]


def bath_to_records(bath, min_g=None):
    """JSON-ready dict: header (config, seed, geometry) plus one record per defect.

    ``min_g`` [rad/us] keeps only defects at or above that coupling; the full
    bath stays reproducible from the header.
    """
    keep = np.ones(len(bath), dtype=bool) if min_g is None else bath.g >= min_g
    by_owner = {}
    for j in np.flatnonzero(keep[bath.tf_owner]) if bath.tf_owner.size else []:
        by_owner.setdefault(int(bath.tf_owner[j]), []).append(
            {
                "rate_per_hr": float(bath.tf_rate[j]),
                "shift_MHz": float(bath.tf_shift[j]),
                "state": int(bath.tf_state0[j]),
                "uid": int(bath.tf_uid[j]),
            }
        )
    records = []
    for i in np.flatnonzero(keep):
        k = int(bath.kind[i])
        records.append({
            "index": int(i),
            "kind": KIND_NAMES[k],
            "p_debye": float(bath.p[i]),
            "location": {"kind": LOCATION_KIND[k], "value_um": float(bath.location[i])},
            "f_d0_GHz": float(bath.f_d0[i]),
            "gamma_d_per_us": float(bath.gamma_d[i]),
            "g_rad_per_us": float(bath.g[i]),
            "drift_MHz_per_hr": float(bath.drift[i]),
            "tf": by_owner.get(int(i), []),
        })
    return {
        "schema_version": BATH_SCHEMA_VERSION,
        "seed": int(bath.seed),
        "geometry": bath.geometry.to_dict(),
        "config": bath.config.to_dict(),
        "n_defects_total": len(bath),
        "min_g_rad_per_us": min_g,
        "defects": records,
    }


def bath_from_records(doc):
    """Rebuild a :class:`DefectBath` from :func:`bath_to_records` output."""
    if doc.get("schema_version") != BATH_SCHEMA_VERSION:
        raise ValueError(f"unsupported bath schema_version {doc.get('schema_version')!r}")
    geom = geo.QubitGeometry.from_dict(doc["geometry"])
    config = BathConfig.from_dict(doc["config"])
    recs = doc["defects"]
    kind = np.array([KIND_NAMES.index(r["kind"]) for r in recs], dtype=np.int8)
    owners, rate, shift, state, uid = [], [], [], [], []
    for i, r in enumerate(recs):
        for tf in r["tf"]:
            owners.append(i)
            rate.append(tf["rate_per_hr"])
            shift.append(tf["shift_MHz"])
            state.append(tf["state"])
            uid.append(tf["uid"])
    return DefectBath(
        geom, config, int(doc["seed"]),
        p=np.array([r["p_debye"] for r in recs], dtype=float),
        kind=kind,
        location=np.array([r["location"]["value_um"] for r in recs], dtype=float),
        f_d0=np.array([r["f_d0_GHz"] for r in recs], dtype=float),
        gamma_d=np.array([r["gamma_d_per_us"] for r in recs], dtype=float),
        g=np.array([r["g_rad_per_us"] for r in recs], dtype=float),
        drift=np.array([r["drift_MHz_per_hr"] for r in recs], dtype=float),
        tf_owner=np.array(owners, dtype=np.int64),
        tf_rate=np.array(rate, dtype=float),
        tf_shift=np.array(shift, dtype=float),
        tf_state0=np.array(state, dtype=np.int8),
        tf_uid=np.array(uid, dtype=np.uint64),
    )


def save_bath(path, bath, min_g=None):
    with open(path, "w") as fh:
        json.dump(bath_to_records(bath, min_g=min_g), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_bath(path):
    with open(path) as fh:
        return bath_from_records(json.load(fh))
