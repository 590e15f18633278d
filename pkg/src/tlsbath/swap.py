"""Bath time evolution and synthetic swap-spectroscopy data.

Each defect frequency evolves as

    f_d(t) = f_d0 + sum_i s_i(t) * shift_i + v_drift * t

with ``s_i`` independent stationary telegraph processes (see
:mod:`tlsbath._telegraph`), shifts and drift in MHz and MHz/hr, and ``t``
in hours. Scans are instantaneous snapshots: every frequency point of a
scan sees the bath at the scan's time stamp.
"""

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from . import _telegraph
from ._kernels import total_rate_on_grid
from ._streams import stream_key

SWAPMAP_SCHEMA_VERSION = 1
DEFAULT_BLOCK_HOURS = 1.0 / 3.0
_DYNAMICS_TAG = 0x54454C45  # fixed tag separating dynamics streams from bath sampling


def default_freq_grid(f_lo=4.0, f_hi=4.5, step=0.001):
    """Idle-frequency grid [GHz]; 501 points at 1 MHz by default."""
    n = int(round((f_hi - f_lo) / step)) + 1
    return f_lo + step * np.arange(n)


def default_time_grid(step_min=20.0, n_scans=72):
    """Scan time stamps [minutes]; 72 scans at 20 min (24 h) by default."""
    return step_min * np.arange(n_scans, dtype=float)


def dynamics_key(seed):
    return stream_key(seed, _DYNAMICS_TAG)


class BathDynamics:
    """Deterministic telegraph evolution of every fluctuator in a bath.

    Evaluating at non-decreasing times reuses the block bookkeeping; going
    backwards restarts from t = 0. Either way the states at a given time are
    the same, because they are a pure function of (seed, fluctuator uid, t).
    """

    def __init__(self, bath, seed=None, block_hours=DEFAULT_BLOCK_HOURS):
        if not block_hours > 0:
            raise ValueError("block_hours must be positive")
        self.bath = bath
        self.seed = int(bath.seed if seed is None else seed)
        self.block_hours = float(block_hours)
        self._key = np.uint64(dynamics_key(self.seed))
        self._uid = np.ascontiguousarray(bath.tf_uid, dtype=np.uint64)
        self._rate = np.ascontiguousarray(bath.tf_rate, dtype=np.float64)
        self._owner = np.ascontiguousarray(bath.tf_owner, dtype=np.int64)
        self._shift = np.ascontiguousarray(bath.tf_shift, dtype=np.float64)
        self.reset()

    def reset(self):
        n = self._uid.size
        self._t = 0.0
        self._block = np.zeros(n, dtype=np.int32)
        self._base = np.array(self.bath.tf_state0, dtype=np.int8)

    def states_at(self, t):
        """Fluctuator states (+1/-1) at ``t`` [hr]."""
        if t < 0:
            raise ValueError("time must be non-negative")
        if t < self._t:
            self.reset()
        out = np.empty(self._uid.size, dtype=np.int8)
        if out.size:
            _telegraph.advance(self._key, self._uid, self._rate, self.block_hours, float(t),
                               self._block, self._base, out)
        self._t = float(t)
        return out

    def frequency_offsets_at(self, t):
        """Per-defect frequency offset [GHz] from fluctuators and drift at ``t`` [hr]."""
        n = len(self.bath)
        if self._uid.size:
            tf = _telegraph.accumulate_offsets(self._owner, self._shift, self.states_at(t).astype(np.float64), n)
        else:
            tf = np.zeros(n)
        return 1e-3 * (tf + self.bath.drift * t)

    def frequencies_at(self, t):
        return self.bath.f_d0 + self.frequency_offsets_at(t)


def _defect_arrays(defect):
    tfs = defect.fluctuators
    return (
        np.array([tf.uid for tf in tfs], dtype=np.uint64),
        np.array([tf.rate for tf in tfs], dtype=np.float64),
        np.array([tf.shift for tf in tfs], dtype=np.float64),
        np.array([tf.state for tf in tfs], dtype=np.int8),
    )


def defect_frequency_at(defect, t, seed=0, block_hours=DEFAULT_BLOCK_HOURS):
    """Frequency [GHz] of a single :class:`~tlsbath.bath.TlsDefect` at ``t`` [hr].

    Uses the same streams as :class:`BathDynamics` with dynamics seed ``seed``,
    so a defect pulled out of a bath follows the same trajectory.
    """
    if t < 0:
        raise ValueError("time must be non-negative")
    offset = defect.drift_velocity * t
    if defect.fluctuators:
        uid, rate, shift, state = _defect_arrays(defect)
        out = np.empty(uid.size, dtype=np.int8)
        _telegraph.advance(np.uint64(dynamics_key(seed)), uid, rate, block_hours, float(t),
                           np.zeros(uid.size, dtype=np.int32), state, out)
        offset += float(np.dot(out.astype(float), shift))
    return defect.f_d0 + 1e-3 * offset


def fluctuator_switch_counts(defect, t, seed=0, block_hours=DEFAULT_BLOCK_HOURS):
    """Number of switches in ``[0, t)`` of each fluctuator of ``defect``."""
    uid, rate, _, _ = _defect_arrays(defect)
    if not uid.size:
        return np.zeros(0, dtype=np.int64)
    return _telegraph.switch_counts(np.uint64(dynamics_key(seed)), uid, rate, block_hours, float(t))


def config_hash(obj):
    """SHA-256 of the canonical (sorted-key, compact) JSON encoding of ``obj``."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class SwapMap:
    """Gamma_1 (or T_1) over an idle-frequency x scan-time grid.

    ``values[k, j]`` belongs to scan time ``time_grid[k]`` [min] and idle
    frequency ``freq_grid[j]`` [GHz]. ``quantity`` is ``"gamma1"`` [1/us]
    or ``"t1"`` [us].
    """

    freq_grid: np.ndarray
    time_grid: np.ndarray
    values: np.ndarray
    quantity: str = "gamma1"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.freq_grid = np.asarray(self.freq_grid, dtype=float)
        self.time_grid = np.asarray(self.time_grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        problems = self.validate()
        if problems:
            raise ValueError("invalid swap map: " + "; ".join(problems))

    def validate(self):
        problems = []
        if self.quantity not in ("gamma1", "t1"):
            problems.append("quantity must be 'gamma1' or 't1'")
        for name in ("freq_grid", "time_grid"):
            grid = getattr(self, name)
            if grid.ndim != 1 or grid.size == 0:
                problems.append(f"{name} must be a non-empty 1-D array")
            elif grid.size > 1 and not np.all(np.diff(grid) > 0):
                problems.append(f"{name} must be strictly increasing")
        if self.values.shape != (self.time_grid.size, self.freq_grid.size):
            problems.append(
                f"values shape {self.values.shape} does not match grids "
                f"({self.time_grid.size}, {self.freq_grid.size})"
            )
        elif np.any(~(self.values[np.isfinite(self.values)] >= 0)):
            problems.append("values must be non-negative")
        return problems

    @property
    def n_scans(self):
        return self.time_grid.size

    @property
    def band(self):
        """Scanned bandwidth [GHz] (grid span plus one step)."""
        if self.freq_grid.size < 2:
            return 0.0
        return float(self.freq_grid[-1] - self.freq_grid[0] + (self.freq_grid[1] - self.freq_grid[0]))

    def gamma1(self):
        return self.values if self.quantity == "gamma1" else _reciprocal(self.values)

    def t1(self):
        """T_1 = 1/Gamma_1 [us]; infinite where Gamma_1 is zero (empty bath, no background)."""
        return _reciprocal(self.values) if self.quantity == "gamma1" else self.values

    def sidecar(self):
        return {
            "schema_version": SWAPMAP_SCHEMA_VERSION,
            "quantity": self.quantity,
            "units": {"freq_grid": "GHz", "time_grid": "min", "values": "1/us" if self.quantity == "gamma1" else "us"},
            "freq_grid": [float(v) for v in self.freq_grid],
            "time_grid": [float(v) for v in self.time_grid],
            "shape": list(self.values.shape),
            "metadata": self.metadata,
        }

    def save(self, csv_path, json_path=None):
        """Write the matrix (one scan per row, ``%.17g``) and its JSON sidecar."""
        csv_path = str(csv_path)
        json_path = json_path or _sidecar_path(csv_path)
        np.savetxt(csv_path, self.values, fmt="%.17g", delimiter=",")
        with open(json_path, "w") as fh:
            json.dump(self.sidecar(), fh, indent=1, sort_keys=True)
            fh.write("\n")
        return csv_path, json_path

    @classmethod
    def load(cls, csv_path, json_path=None):
        """Read a map written by :meth:`save` (or a measured dataset in the same schema)."""
        json_path = json_path or _sidecar_path(str(csv_path))
        with open(json_path) as fh:
            meta = json.load(fh)
        for key in ("schema_version", "quantity", "freq_grid", "time_grid"):
            if key not in meta:
                raise ValueError(f"swap map sidecar is missing field '{key}'")
        if meta["schema_version"] != SWAPMAP_SCHEMA_VERSION:
            raise ValueError(f"field 'schema_version': unsupported value {meta['schema_version']!r}")
        values = np.loadtxt(csv_path, delimiter=",", ndmin=2)
        return cls(meta["freq_grid"], meta["time_grid"], values, meta["quantity"], meta.get("metadata", {}))


def _reciprocal(values):
    with np.errstate(divide="ignore"):
        return 1.0 / values


def _sidecar_path(csv_path):
    return csv_path[:-4] + ".json" if csv_path.endswith(".csv") else csv_path + ".json"


def simulate_swap_map(bath, geom=None, freq_grid=None, time_grid=None, dynamics_seed=None,
                      background=0.0, block_hours=DEFAULT_BLOCK_HOURS, metadata=None):
    """True Gamma_1 map of ``bath`` sampled at ``freq_grid`` [GHz] and ``time_grid`` [min].

    Raises ValueError if the grid leaves the band the bath was generated in
    (defects outside it are absent, so rates there would be biased low) or if
    ``geom`` disagrees with the bath's geometry.
    """
    if geom is not None and geom != bath.geometry:
        raise ValueError("geometry does not match the bath's geometry")
    freq_grid = default_freq_grid() if freq_grid is None else np.asarray(freq_grid, dtype=float)
    time_grid = default_time_grid() if time_grid is None else np.asarray(time_grid, dtype=float)
    cfg = bath.config
    if freq_grid.min() < cfg.f_lo or freq_grid.max() > cfg.f_hi:
        raise ValueError(
            f"frequency grid [{freq_grid.min()}, {freq_grid.max()}] GHz leaves the bath band "
            f"[{cfg.f_lo}, {cfg.f_hi}] GHz"
        )
    if time_grid.min() < 0:
        raise ValueError("scan times must be non-negative")
    dyn = BathDynamics(bath, seed=dynamics_seed, block_hours=block_hours)
    static = bath.n_fluctuators == 0 and not np.any(bath.drift)
    values = np.empty((time_grid.size, freq_grid.size))
    order = np.argsort(time_grid, kind="stable")
    row = None
    for k in order:
        if row is None or not static:
            f_d = dyn.frequencies_at(time_grid[k] / 60.0)
            row = total_rate_on_grid(freq_grid, f_d, bath.g, bath.gamma_d, background)
        values[k] = row
    meta = {
        "geometry": bath.geometry.name or "inline",
        "bath_seed": int(bath.seed),
        "dynamics_seed": int(dyn.seed),
        "background_per_us": float(background),
        "n_defects": len(bath),
    }
    meta.update(metadata or {})
    return SwapMap(freq_grid, time_grid, values, "gamma1", meta)


@dataclass
class DecayRecord:
    """Inversion-recovery record: successes out of ``shots`` per idle delay [us]."""

    delays: np.ndarray
    counts: np.ndarray
    shots: int
    gamma1_true: float = float("nan")

    def __post_init__(self):
        self.delays = np.asarray(self.delays, dtype=float)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.delays.shape != self.counts.shape:
            raise ValueError("delays and counts must have the same length")
        if np.any(self.counts < 0) or np.any(self.counts > self.shots):
            raise ValueError("counts must lie in [0, shots]")

    def to_json(self):
        return json.dumps({
            "delays_us": [float(v) for v in self.delays],
            "counts": [int(v) for v in self.counts],
            "shots": int(self.shots),
            "gamma1_true_per_us": float(self.gamma1_true),
        }, sort_keys=True)

    @classmethod
    def from_json(cls, line):
        d = json.loads(line)
        return cls(d["delays_us"], d["counts"], d["shots"], d["gamma1_true_per_us"])


def default_delays(median_t1, n=40, shortest=0.5):
    """``n`` idle delays [us] log-spaced from ``shortest`` to three median T_1."""
    longest = 3.0 * float(median_t1)
    if not longest > shortest:
        raise ValueError("median T1 too short for the default delay range")
    return np.geomspace(shortest, longest, n)


def synthesize_inversion_recovery(gamma1, delays, shots=50, rng=None):
    """Binomial(shots, exp(-gamma1 * tau)) excited-state counts per delay."""
    if not gamma1 > 0:
        raise ValueError("gamma1 must be positive")
    delays = np.asarray(delays, dtype=float)
    if np.any(delays < 0) or np.any(np.diff(delays) <= 0):
        raise ValueError("delays must be non-negative and strictly increasing")
    rng = np.random.default_rng(rng)
    return DecayRecord(delays, rng.binomial(int(shots), np.exp(-gamma1 * delays)), int(shots), float(gamma1))


def write_decay_records(path, records):
    with open(path, "w") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")


def read_decay_records(path):
    with open(path) as fh:
        return [DecayRecord.from_json(line) for line in fh if line.strip()]


def fitted_t1_map(swap_map, shots=50, n_delays=40, seed=0):
    """Map of T_1 [us] as an experiment would see it: one shot-noise-limited fit per point.

    Points whose fit fails (e.g. all counts zero) are NaN.
    """
    from .analysis.decay import fit_exponential_decay

    gamma = swap_map.gamma1()
    delays = default_delays(float(np.median(1.0 / gamma)), n=n_delays)
    rng = np.random.default_rng(seed)
    out = np.full(gamma.shape, np.nan)
    for idx in np.ndindex(gamma.shape):
        rec = synthesize_inversion_recovery(gamma[idx], delays, shots, rng)
        try:
            out[idx] = fit_exponential_decay(rec).t1
        except ValueError:
            pass
    meta = dict(swap_map.metadata, shot_noise_seed=int(seed), shots=int(shots))
    return SwapMap(swap_map.freq_grid, swap_map.time_grid, out, "t1", meta)
