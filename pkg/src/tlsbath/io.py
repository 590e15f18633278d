"""Run configuration, deterministic file writers and run manifests.

A run configuration is a JSON document::

    {
      "schema_version": 1,
      "name": "fig3f",
      "geometry": "gap100-short"            # preset name, or an inline object
      "bath": {"sigma": 2.0, "p_max": 5.0, "lam": 0.4, ...},
      "include_gap": true, "include_leads": true,
      "grids": {"f_lo_GHz": 4.0, "f_hi_GHz": 4.5, "f_step_MHz": 1.0,
                "t_step_min": 20.0, "n_scans": 72},
      "analysis": {"n_sd": 1.0, "margin": 3, ...},
      "shot_noise": {"enabled": false, "shots": 50, "n_delays": 40},
      "seeds": {"bath": 1, "dynamics": 2, "shot_noise": 3},
      "realizations": 1,
      "background_per_us": 0.0,
      "bath_min_g_MHz": 0.01,
      "output_dir": "out/fig3f"
    }

Seeds are mandatory. Validation collects every problem with its dotted field
path and raises :class:`ConfigError`.
"""

import csv
import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources

import numpy as np

from . import __version__
from .bath import BathConfig, realization_seeds
from .geometry import GEOMETRY_PRESETS, QubitGeometry
from .swap import config_hash

RUNCONFIG_SCHEMA_VERSION = 1
MANIFEST_SCHEMA_VERSION = 1
TABLE_SCHEMA_VERSION = 1
ARTIFACT_NAME = "tlsbath"


class ConfigError(ValueError):
    """Invalid run configuration; ``problems`` lists ``"field.path: message"`` strings."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid run config:\n  " + "\n  ".join(self.problems))


@dataclass
class GridConfig:
    f_lo_GHz: float = 4.0
    f_hi_GHz: float = 4.5
    f_step_MHz: float = 1.0
    t_step_min: float = 20.0
    n_scans: int = 72

    def validate(self):
        problems = []
        if not self.f_step_MHz > 0:
            problems.append("f_step_MHz: must be positive")
        if not self.f_lo_GHz < self.f_hi_GHz:
            problems.append("f_hi_GHz: must exceed f_lo_GHz")
        if not self.t_step_min > 0:
            problems.append("t_step_min: must be positive")
        if not (isinstance(self.n_scans, int) and self.n_scans >= 1):
            problems.append("n_scans: must be an integer >= 1")
        return problems

    def freq_grid(self):
        step = self.f_step_MHz * 1e-3
        n = int(round((self.f_hi_GHz - self.f_lo_GHz) / step)) + 1
        return self.f_lo_GHz + step * np.arange(n)

    def time_grid(self):
        return self.t_step_min * np.arange(self.n_scans, dtype=float)


@dataclass
class AnalysisOptions:
    n_sd: float = 1.0
    margin: int = 3
    iterative: bool = False
    residual_threshold: float = 1e-2
    gate_MHz: float = 5.0
    max_misses: int = 2
    min_track_length: int = 10

    def validate(self):
        problems = []
        if not self.n_sd > 0:
            problems.append("n_sd: must be positive")
        if not (isinstance(self.margin, int) and self.margin >= 0):
            problems.append("margin: must be a non-negative integer")
        if not self.residual_threshold > 0:
            problems.append("residual_threshold: must be positive")
        if not self.gate_MHz > 0:
            problems.append("gate_MHz: must be positive")
        if not (isinstance(self.max_misses, int) and self.max_misses >= 1):
            problems.append("max_misses: must be an integer >= 1")
        if not (isinstance(self.min_track_length, int) and self.min_track_length >= 10):
            problems.append("min_track_length: must be an integer >= 10")
        return problems

    def extract_options(self):
        return {"n_sd": self.n_sd, "margin": self.margin, "iterative": self.iterative,
                "residual_threshold": self.residual_threshold}


@dataclass
class ShotNoiseOptions:
    enabled: bool = False
    shots: int = 50
    n_delays: int = 40

    def validate(self):
        problems = []
        if not (isinstance(self.shots, int) and self.shots >= 1):
            problems.append("shots: must be an integer >= 1")
        if not (isinstance(self.n_delays, int) and self.n_delays >= 5):
            problems.append("n_delays: must be an integer >= 5")
        return problems


@dataclass
class Seeds:
    bath: int
    dynamics: int
    shot_noise: int

    def for_realization(self, r, n):
        """Seeds of realization ``r`` of ``n``; a single realization uses the seeds as given."""
        if n == 1:
            return Seeds(self.bath, self.dynamics, self.shot_noise)
        return Seeds(realization_seeds(self.bath, n)[r], realization_seeds(self.dynamics, n)[r],
                     realization_seeds(self.shot_noise, n)[r])


@dataclass
class RunConfig:
    """Everything needed to reproduce one simulate/analyze run."""

    geometry: QubitGeometry
    bath: BathConfig
    seeds: Seeds
    name: str = "run"
    geometry_preset: str = None
    include_gap: bool = True
    include_leads: bool = True
    grids: GridConfig = field(default_factory=GridConfig)
    analysis: AnalysisOptions = field(default_factory=AnalysisOptions)
    shot_noise: ShotNoiseOptions = field(default_factory=ShotNoiseOptions)
    realizations: int = 1
    background_per_us: float = 0.0
    bath_min_g_MHz: float = 0.01
    output_dir: str = "out"

    def to_dict(self):
        bath = self.bath.to_dict()
        bath.pop("seed")
        return {
            "schema_version": RUNCONFIG_SCHEMA_VERSION,
            "name": self.name,
            "geometry": self.geometry_preset if self.geometry_preset else self.geometry.to_dict(),
            "bath": bath,
            "include_gap": self.include_gap,
            "include_leads": self.include_leads,
            "grids": asdict(self.grids),
            "analysis": asdict(self.analysis),
            "shot_noise": asdict(self.shot_noise),
            "seeds": asdict(self.seeds),
            "realizations": self.realizations,
            "background_per_us": self.background_per_us,
            "bath_min_g_MHz": self.bath_min_g_MHz,
            "output_dir": self.output_dir,
        }

    @classmethod
    def from_dict(cls, d):
        return parse_config(d)

    def content_hash(self):
        """Hash of the configuration, independent of where outputs are written."""
        d = self.to_dict()
        d.pop("output_dir")
        return config_hash(d)

    def bath_config(self, seed):
        return self.bath.with_(seed=int(seed))

    def with_seed(self, seed):
        """Copy with every seed stream derived from one override seed (for sweeps)."""
        s = int(seed)
        return replace(self, seeds=Seeds(s, s, s))

    def with_realizations(self, n):
        return replace(self, realizations=int(n))


_TOP_KEYS = {
    "schema_version", "name", "geometry", "bath", "include_gap", "include_leads", "grids", "analysis",
    "shot_noise", "seeds", "realizations", "background_per_us", "bath_min_g_MHz", "output_dir",
}


def _section(cls, d, path, problems):
    if d is None:
        return cls()
    if not isinstance(d, dict):
        problems.append(f"{path}: must be an object")
        return cls()
    names = {f.name for f in fields(cls)}
    for key in sorted(set(d) - names):
        problems.append(f"{path}.{key}: unknown field")
    kw = {}
    for f in fields(cls):
        if f.name in d:
            kw[f.name] = _coerce(d[f.name], f.default, f"{path}.{f.name}", problems)
    obj = cls(**kw)
    problems.extend(f"{path}.{p}" for p in obj.validate())
    return obj


def _coerce(value, default, path, problems):
    """Type-check a JSON scalar against the type of the field default."""
    if isinstance(default, bool):
        if not isinstance(value, bool):
            problems.append(f"{path}: must be true or false")
            return default
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            problems.append(f"{path}: must be an integer")
            return default
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            problems.append(f"{path}: must be a finite number")
            return default
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            problems.append(f"{path}: must be a string")
            return default
    return value


def parse_config(d):
    """Validate a configuration mapping and build a :class:`RunConfig`."""
    problems = []
    if not isinstance(d, dict):
        raise ConfigError(["<root>: config must be a JSON object"])
    for key in sorted(set(d) - _TOP_KEYS):
        problems.append(f"{key}: unknown field")
    if d.get("schema_version") != RUNCONFIG_SCHEMA_VERSION:
        problems.append(f"schema_version: expected {RUNCONFIG_SCHEMA_VERSION}, got {d.get('schema_version')!r}")

    geom, preset = None, None
    g = d.get("geometry")
    if g is None:
        problems.append("geometry: required (preset name or inline object)")
    elif isinstance(g, str):
        if g in GEOMETRY_PRESETS:
            geom, preset = GEOMETRY_PRESETS[g], g
        else:
            problems.append(f"geometry: unknown preset {g!r}; available: {sorted(GEOMETRY_PRESETS)}")
    elif isinstance(g, dict):
        try:
            geom = QubitGeometry.from_dict(g)
        except (ValueError, TypeError) as exc:
            problems.append(f"geometry: {exc}")
    else:
        problems.append("geometry: must be a preset name or an object")

    bath = None
    b = d.get("bath", {})
    if not isinstance(b, dict):
        problems.append("bath: must be an object")
    elif "seed" in b:
        problems.append("bath.seed: seeds belong in the 'seeds' section")
    else:
        defaults = BathConfig()
        unknown = set(b) - {f.name for f in fields(BathConfig)}
        for key in sorted(unknown):
            problems.append(f"bath.{key}: unknown field")
        kw = {}
        for f in fields(BathConfig):
            if f.name in b:
                kw[f.name] = _coerce(b[f.name], getattr(defaults, f.name), f"bath.{f.name}", problems)
        try:
            bath = BathConfig(**kw)
        except ValueError:
            bath = None
            problems.extend(f"bath: {p}" for p in BathConfig.validate(_Unchecked(BathConfig(), kw)))

    seeds = None
    s = d.get("seeds")
    if not isinstance(s, dict):
        problems.append("seeds: required object with integer 'bath', 'dynamics' and 'shot_noise'")
    else:
        for key in sorted(set(s) - {"bath", "dynamics", "shot_noise"}):
            problems.append(f"seeds.{key}: unknown field")
        vals = {}
        for key in ("bath", "dynamics", "shot_noise"):
            v = s.get(key)
            if isinstance(v, bool) or not isinstance(v, int):
                problems.append(f"seeds.{key}: required integer (no implicit entropy)")
            elif not 0 <= v < 2**64:
                problems.append(f"seeds.{key}: must lie in [0, 2^64)")
            else:
                vals[key] = v
        if len(vals) == 3:
            seeds = Seeds(**vals)

    grids = _section(GridConfig, d.get("grids"), "grids", problems)
    analysis = _section(AnalysisOptions, d.get("analysis"), "analysis", problems)
    shot = _section(ShotNoiseOptions, d.get("shot_noise"), "shot_noise", problems)

    scalars = {}
    for key, default in (("name", "run"), ("include_gap", True), ("include_leads", True), ("realizations", 1),
                         ("background_per_us", 0.0), ("bath_min_g_MHz", 0.01), ("output_dir", "out")):
        scalars[key] = _coerce(d[key], default, key, problems) if key in d else default
    if scalars["realizations"] < 1:
        problems.append("realizations: must be >= 1")
    if scalars["background_per_us"] < 0:
        problems.append("background_per_us: must be non-negative")
    if scalars["bath_min_g_MHz"] < 0:
        problems.append("bath_min_g_MHz: must be non-negative")

    if bath is not None:
        fg = grids.freq_grid()
        if fg.min() < bath.f_lo - 1e-12 or fg.max() > bath.f_hi + 1e-12:
            problems.append(
                f"grids: frequency grid [{grids.f_lo_GHz}, {grids.f_hi_GHz}] GHz must lie inside the bath band "
                f"[bath.f_lo, bath.f_hi] = [{bath.f_lo}, {bath.f_hi}] GHz"
            )
    if problems:
        raise ConfigError(problems)
    return RunConfig(geometry=geom, bath=bath, seeds=seeds, geometry_preset=preset, grids=grids,
                     analysis=analysis, shot_noise=shot, **scalars)


class _Unchecked:
    """Attribute view used to list every BathConfig problem without raising on the first."""

    def __init__(self, base, overrides):
        self.__dict__.update(asdict(base))
        self.__dict__.update(overrides)


def load_config(path):
    """Read and validate a run configuration file (or a shipped scenario name)."""
    if not str(path).endswith(".json") and str(path) in scenario_names():
        return scenario_config(str(path))
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"<file>: not valid JSON ({exc})"]) from None
    return parse_config(doc)


def _scenario_dir():
    return resources.files("tlsbath") / "presets"


def scenario_names():
    return sorted(p.name[:-5] for p in _scenario_dir().iterdir() if p.name.endswith(".json"))


def scenario_config(name):
    """Shipped scenario configuration by name (e.g. ``"fig3f"``)."""
    path = _scenario_dir() / f"{name}.json"
    if not path.is_file():
        raise ConfigError([f"<scenario>: unknown scenario {name!r}; available: {scenario_names()}"])
    return parse_config(json.loads(path.read_text()))


# --------------------------------------------------------------------------- writers


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_json(path, obj):
    """Deterministic JSON: sorted keys, one-space indent, trailing newline; NaN becomes null."""
    text = json.dumps(_nan_to_none(obj), indent=1, sort_keys=True, allow_nan=False, default=_json_default)
    with open(path, "w") as fh:
        fh.write(text + "\n")


def _nan_to_none(obj):
    if isinstance(obj, dict):
        return {k: _nan_to_none(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_nan_to_none(v) for v in obj]
    if isinstance(obj, (float, np.floating)) and not math.isfinite(obj):
        return None
    return obj


def write_table(path, columns, rows, metadata=None, units=None):
    """CSV with a header row (``%.17g`` floats) plus a JSON sidecar describing the columns."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    side = {
        "schema_version": TABLE_SCHEMA_VERSION,
        "columns": list(columns),
        "units": units or {},
        "n_rows": len(rows),
        "metadata": metadata or {},
    }
    write_json(str(path)[:-4] + ".json", side)


def read_table(path):
    """Rows of a table written by :func:`write_table` as a list of dicts of strings."""
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def build_manifest(command, cfg_hash, seeds, out_dir, outputs, diagnostics=None):
    """Manifest dict: config hash, seeds, version, and a checksum per output file.

    Wall-clock timings are written separately (``timings.json``) so that
    the manifest itself is reproducible byte for byte.
    """
    return {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "artifact": ARTIFACT_NAME,
        "version": __version__,
        "command": command,
        "config_hash": cfg_hash,
        "seeds": seeds,
        "outputs": {name: sha256_file(os.path.join(out_dir, name)) for name in sorted(outputs)},
        "diagnostics": diagnostics or {},
    }
