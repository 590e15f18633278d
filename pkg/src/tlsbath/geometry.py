"""Transmon island geometry and analytic zero-point field profiles.

The island is a disk of radius ``r_i`` inside a groundplane aperture of
radius ``r_o``. The gap field follows the coplanar-line conformal map; the
field at the edge of a thin junction lead a distance ``x`` from the
junction decays as ``1/ln(4x/w)``.
"""

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import units
from .special import complementary_elliptic_k

LEAD_STYLES = ("long_liftoff", "short_liftoff")
ALPHA_CONVENTIONS = ("exact", "log")


@dataclass(frozen=True)
class QubitGeometry:
    """Immutable description of a circular transmon and its junction leads.

    Lengths are in um, ``C`` in fF and ``f01`` in GHz. ``delta`` is the edge
    cutoff collar excluded from the gap next to each metal edge and ``x_min``
    the closest lead-defect distance to the junction. For short-liftoff
    devices the optically defined lead beyond ``lead_length`` tapers linearly
    from ``lead_width`` to ``taper_end_width`` at the island edge
    (``x = r_o - r_i``).
    """

    r_i: float
    r_o: float
    C: float = 70.0
    f01: float = 4.25
    lead_length: float = 2.0
    lead_width: float = 0.3
    lead_style: str = "short_liftoff"
    delta: float = 0.005
    x_min: float = None
    taper_end_width: float = 3.0
    name: str = field(default="custom", compare=False)

    def __post_init__(self):
        if self.x_min is None:
            object.__setattr__(self, "x_min", self.lead_width / 2.0)
        problems = self.validate()
        if problems:
            raise ValueError("invalid geometry: " + "; ".join(problems))

    def validate(self):
        problems = []
        if not 0 < self.r_i < self.r_o:
            problems.append(f"need 0 < r_i < r_o (r_i={self.r_i}, r_o={self.r_o})")
        elif not 2 * self.delta < self.gap:
            problems.append(f"edge cutoff 2*delta={2 * self.delta} must be below the gap {self.gap}")
        if not self.delta > 0:
            problems.append("delta must be positive")
        if not self.C > 0:
            problems.append("C must be positive")
        if not self.f01 > 0:
            problems.append("f01 must be positive")
        if not self.lead_width > 0:
            problems.append("lead_width must be positive")
        if not 0 < self.x_min < self.lead_length:
            problems.append(f"need 0 < x_min < lead_length (x_min={self.x_min}, lead_length={self.lead_length})")
        elif self.x_min <= self.lead_width / 4.0:
            problems.append("x_min must exceed lead_width/4 where the lead field diverges")
        if self.lead_style not in LEAD_STYLES:
            problems.append(f"lead_style must be one of {LEAD_STYLES}")
        if not self.taper_end_width > 0:
            problems.append("taper_end_width must be positive")
        return problems

    @property
    def gap(self):
        return self.r_o - self.r_i

    @property
    def taper_span(self):
        """(start, stop) of the tapered optical lead in um, or None."""
        if self.lead_style != "short_liftoff" or self.gap <= self.lead_length:
            return None
        return (self.lead_length, self.gap)

    def to_dict(self):
        return {
            "name": self.name,
            "r_i_um": self.r_i,
            "r_o_um": self.r_o,
            "C_fF": self.C,
            "f01_GHz": self.f01,
            "lead_style": self.lead_style,
            "lead_length_um": self.lead_length,
            "lead_width_um": self.lead_width,
            "delta_nm": self.delta * 1e3,
            "x_min_um": self.x_min,
            "taper_end_width_um": self.taper_end_width,
        }

    @classmethod
    def from_dict(cls, d):
        known = {
            "r_i_um", "r_o_um", "C_fF", "f01_GHz", "lead_style", "lead_length_um",
            "lead_width_um", "delta_nm", "x_min_um", "taper_end_width_um", "name",
        }
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown geometry keys: {sorted(unknown)}")
        for key in ("r_i_um", "r_o_um"):
            if key not in d:
                raise ValueError(f"geometry is missing required key {key!r}")
        kw = dict(r_i=float(d["r_i_um"]), r_o=float(d["r_o_um"]))
        optional = {
            "C_fF": "C", "f01_GHz": "f01", "lead_length_um": "lead_length",
            "lead_width_um": "lead_width", "x_min_um": "x_min",
            "taper_end_width_um": "taper_end_width",
        }
        for key, attr in optional.items():
            if d.get(key) is not None:
                kw[attr] = float(d[key])
        if "delta_nm" in d:
            kw["delta"] = float(d["delta_nm"]) * 1e-3
        if "lead_style" in d:
            kw["lead_style"] = str(d["lead_style"])
        if "name" in d:
            kw["name"] = str(d["name"])
        return cls(**kw)

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True)
class FieldProfile:
    """Sampled field magnitudes at unit island voltage plus the zero-point voltage scale."""

    positions: np.ndarray
    magnitudes: np.ndarray
    v_zp: float
    kind: str

    def at_zero_point(self):
        return self.magnitudes * self.v_zp


def zero_point_voltage(geom):
    """``V_zp = sqrt(hbar omega01 / 2C) = sqrt(h f01 / 2C)`` in volts."""
    return math.sqrt(units.H * geom.f01 * 1e9 / (2.0 * geom.C * 1e-15))


def _gap_field_raw(geom, r, V):
    r = np.asarray(r, dtype=float)
    kp = complementary_elliptic_k(geom.r_i / geom.r_o)
    denom = np.sqrt(np.abs((r**2 - geom.r_i**2) * (r**2 - geom.r_o**2)))
    # r_o / um^2 -> 1/um, then to 1/m
    return V * geom.r_o / (kp * denom) * 1e6


def gap_field(geom, r, V=None):
    """Radial field magnitude in the island-ground gap, in V/m.

    Parameters
    ----------
    geom : QubitGeometry
    r : float or array_like
        Radius in um, restricted to ``[r_i + delta, r_o - delta]``.
    V : float, optional
        Island voltage; defaults to :func:`zero_point_voltage`.

    Raises
    ------
    ValueError
        For radii inside the cutoff collars, where the field diverges.
    """
    if V is None:
        V = zero_point_voltage(geom)
    r_arr = np.asarray(r, dtype=float)
    slack = 1e-9 * geom.r_o
    lo, hi = geom.r_i + geom.delta, geom.r_o - geom.delta
    if np.any(r_arr < lo - slack) or np.any(r_arr > hi + slack):
        raise ValueError(f"gap radius outside the collar-trimmed gap [{lo}, {hi}] um")
    out = _gap_field_raw(geom, r_arr, V)
    return float(out) if out.ndim == 0 else out


def lead_width_at(geom, x):
    """Effective lead trace width r_bar(x) in um (linear taper on short-liftoff leads)."""
    x = np.asarray(x, dtype=float)
    width = np.full(x.shape, geom.lead_width)
    span = geom.taper_span
    if span is not None:
        start, stop = span
        frac = np.clip((x - start) / (stop - start), 0.0, 1.0)
        width = np.where(x > start, geom.lead_width + frac * (geom.taper_end_width - geom.lead_width), width)
    return width


def lead_field(geom, x, V=None, width=None):
    """Field at the edge of a junction lead a distance ``x`` [um] from the junction, in V/m.

    ``E(x) = V / (2 r_bar ln(4 x / r_bar))``. ``width`` overrides the trace
    width and may be a scalar, an array matching ``x`` or a callable of ``x``;
    by default the geometry's (possibly tapered) width profile is used.
    """
    if V is None:
        V = zero_point_voltage(geom)
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr < geom.x_min * (1 - 1e-12)):
        raise ValueError(f"lead distance below x_min={geom.x_min} um, where the lead field model is invalid")
    if width is None:
        w = lead_width_at(geom, x_arr)
    elif callable(width):
        w = np.asarray(width(x_arr), dtype=float)
    else:
        w = np.asarray(width, dtype=float)
    log_term = np.log(4.0 * x_arr / w)
    if np.any(log_term <= 0):
        raise ValueError("lead field undefined where 4x/r_bar <= 1")
    out = 0.5 * V / (w * 1e-6 * log_term)
    return float(out) if out.ndim == 0 else out


def _radial_antiderivative(geom, r):
    # integral of r dr / ((r^2 - r_i^2)(r_o^2 - r^2)) up to a constant
    a, b = geom.r_i**2, geom.r_o**2
    u = np.asarray(r, dtype=float) ** 2
    return np.log((u - a) / (b - u)) / (2.0 * (b - a))


def cumulative_field_squared(geom, r=None, n=2001):
    """Normalized cumulative gap participation ``F(r)``.

    ``F(r) = int_{r_i+delta}^{r} E^2 2 pi r' dr' / int_{r_i+delta}^{r_o-delta} (...)``,
    evaluated from the closed-form antiderivative. Returns ``(r, F)``; when
    ``r`` is omitted a grid clustered at both edges is used.
    """
    lo, hi = geom.r_i + geom.delta, geom.r_o - geom.delta
    if r is None:
        s = 0.5 * (1 - np.cos(np.linspace(0.0, math.pi, n)))
        r = lo + (hi - lo) * s
    r = np.clip(np.asarray(r, dtype=float), lo, hi)
    F0 = _radial_antiderivative(geom, lo)
    F1 = _radial_antiderivative(geom, hi)
    return r, (_radial_antiderivative(geom, r) - F0) / (F1 - F0)


def alpha_factor(geom, convention="exact"):
    """Logarithmic geometric factor of the continuum relaxation rate.

    ``convention="exact"`` returns ``(r_o^2 - r_i^2)`` times the cutoff
    integral ``int r dr / ((r^2-r_i^2)(r_o^2-r^2))`` over
    ``[r_i+delta, r_o-delta]``, evaluated in closed form. ``"log"``
    returns the small-delta expression ``ln[(r_o^2 - r_i^2)/(delta sqrt(2 r_i r_o))]``,
    which exceeds the exact value by ``ln(sqrt 2)`` as delta -> 0.
    A warning is emitted when alpha falls outside [5, 20].
    """
    if convention not in ALPHA_CONVENTIONS:
        raise ValueError(f"convention must be one of {ALPHA_CONVENTIONS}")
    a, b = geom.r_i**2, geom.r_o**2
    if convention == "log":
        arg = (b - a) / (geom.delta * math.sqrt(2.0 * geom.r_i * geom.r_o))
    else:
        u1 = (geom.r_i + geom.delta) ** 2
        u2 = (geom.r_o - geom.delta) ** 2
        arg = math.sqrt(((u2 - a) * (b - u1)) / ((b - u2) * (u1 - a)))
    if arg <= 1.0:
        raise ValueError("alpha is undefined: logarithm argument <= 1 (cutoff too large)")
    alpha = math.log(arg)
    if not 5.0 <= alpha <= 20.0:
        warnings.warn(f"alpha={alpha:.3g} outside the expected range [5, 20]", stacklevel=2)
    return alpha


def gap_field_profile(geom, n=401):
    """Gap field sampled on an edge-clustered radius grid, at unit voltage."""
    r, _ = cumulative_field_squared(geom, n=n)
    return FieldProfile(r, gap_field(geom, r, V=1.0), zero_point_voltage(geom), "gap")


def lead_field_profile(geom, n=401):
    """Lead-edge field on a log-spaced grid from x_min to the lead end, at unit voltage."""
    stop = geom.gap if geom.taper_span is not None else geom.lead_length
    x = np.geomspace(geom.x_min, stop, n)
    return FieldProfile(x, lead_field(geom, x, V=1.0), zero_point_voltage(geom), "lead")


def _preset(name, r_i, gap, style):
    lead_length = gap if style == "long_liftoff" else 2.0
    return QubitGeometry(
        r_i=r_i, r_o=r_i + gap, C=70.0, f01=4.25, lead_length=lead_length,
        lead_width=0.3, lead_style=style, delta=0.005, taper_end_width=3.0, name=name,
    )


# Illustrative island radii for a common C = 70 fF; not published values.
_ISLAND_RADII = {5: 70.0, 20: 95.0, 100: 120.0}

GEOMETRY_PRESETS = {}
for _gap, _ri in _ISLAND_RADII.items():
    for _style, _tag in (("long_liftoff", "long"), ("short_liftoff", "short")):
        _name = f"gap{_gap}-{_tag}"
        GEOMETRY_PRESETS[_name] = _preset(_name, _ri, float(_gap), _style)


def get_preset(name):
    try:
        return GEOMETRY_PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown geometry preset {name!r}; available: {sorted(GEOMETRY_PRESETS)}") from None
