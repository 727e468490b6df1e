"""Atmospheric density profiles and the five-layer Linsley parametrisation.

Layers 1-4 give the atmospheric depth as ``X(h) = a_i + b_i * exp(-h / c_i)``
(X and a, b in g/cm^2, c in cm); layer 5 is linear and reaches X = 0 at the
top of the atmosphere. Altitudes at the public surface are in metres.
Pressure follows from depth with constant standard gravity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import FitError, OutOfRangeError, ValidationError

G0 = 9.80665  # m s^-2
# 1 g/cm^2 under g0 is 980.665 dyn/cm^2 = 98.0665 Pa = 0.980665 hPa.
HPA_PER_G_CM2 = G0 / 10.0

DEFAULT_BOUNDARIES = (4_000.0, 10_000.0, 40_000.0, 100_000.0)
DEFAULT_TOP = 112_800.0

# US standard atmosphere in the Linsley parametrisation (b in g/cm^2, c in cm).
US_STANDARD_B = (1222.6562, 1144.9069, 1305.5948, 540.1778)
US_STANDARD_C = (994186.38, 878153.55, 636143.04, 772170.16)
US_STANDARD_UPPER_DENSITY = 1e-9  # g/cm^3, layer 5 slope b5/c5

MIN_PROFILE_SAMPLES = 4
MIN_FIT_TOP = 30_000.0
DENSITY_TOLERANCE = 0.01


def _cm(h: float) -> float:
    return h * 100.0


@dataclass(frozen=True)
class LinsleyAtmosphere:
    a: tuple[float, float, float, float]
    b: tuple[float, float, float, float]
    c: tuple[float, float, float, float]
    upper_density: float = US_STANDARD_UPPER_DENSITY
    boundaries: tuple[float, float, float, float] = DEFAULT_BOUNDARIES
    top: float = DEFAULT_TOP

    def __post_init__(self):
        for name in ("a", "b", "c", "boundaries"):
            value = tuple(float(v) for v in getattr(self, name))
            if len(value) != 4:
                raise ValidationError(f"{name} needs 4 entries, got {len(value)}")
            object.__setattr__(self, name, value)
        if not all(v > 0 and math.isfinite(v) for v in self.b + self.c):
            raise ValidationError("layer parameters b and c must be positive and finite")
        if not self.upper_density > 0:
            raise ValidationError("upper layer density must be positive")
        edges = (0.0,) + self.boundaries + (float(self.top),)
        if any(lo >= hi for lo, hi in zip(edges, edges[1:])):
            raise ValidationError(f"layer boundaries must increase strictly inside (0, {self.top:g}) m")
        for i, h in enumerate(self.boundaries):
            below = self._layer_depth(i, h)
            above = self._layer_depth(i + 1, h)
            if abs(below - above) >= 1e-6:
                raise ValidationError(f"depth discontinuous at {h:g} m: {below!r} vs {above!r} g/cm^2")

    @classmethod
    def from_layers(
        cls,
        b: Sequence[float],
        c: Sequence[float],
        boundaries: Sequence[float] = DEFAULT_BOUNDARIES,
        top: float = DEFAULT_TOP,
        upper_density: float = US_STANDARD_UPPER_DENSITY,
    ) -> "LinsleyAtmosphere":
        """Build a model from (b_i, c_i), choosing a_i top-down for continuity."""
        b = tuple(float(v) for v in b)
        c = tuple(float(v) for v in c)
        boundaries = tuple(float(v) for v in boundaries)
        if len(b) != 4 or len(c) != 4 or len(boundaries) != 4:
            raise ValidationError("need 4 exponential layers and 4 boundaries")
        if not all(v > 0 for v in b + c):
            raise ValidationError("layer parameters b and c must be positive")
        a = [0.0] * 4
        x_above = upper_density * (_cm(top) - _cm(boundaries[3]))
        for i in range(3, -1, -1):
            h = _cm(boundaries[i])
            a[i] = x_above - b[i] * math.exp(-h / c[i])
            if i:
                h_lo = _cm(boundaries[i - 1])
                x_above = a[i] + b[i] * math.exp(-h_lo / c[i])
        return cls(tuple(a), b, c, upper_density, boundaries, top)

    @classmethod
    def isothermal(cls, rho0: float = 1.225e-3, scale_height: float = 8434.0, **kw) -> "LinsleyAtmosphere":
        """Single exponential rho0 * exp(-h / H) in all four lower layers."""
        h_cm = _cm(scale_height)
        return cls.from_layers([rho0 * h_cm] * 4, [h_cm] * 4, **kw)

    @classmethod
    def us_standard(cls) -> "LinsleyAtmosphere":
        return cls.from_layers(US_STANDARD_B, US_STANDARD_C)

    def layer_index(self, h: float) -> int:
        """0-based layer holding ``h``; layer i covers [boundary[i-1], boundary[i])."""
        for i, edge in enumerate(self.boundaries):
            if h < edge:
                return i
        return 4

    def _layer_depth(self, i: int, h: float) -> float:
        if i == 4:
            return self.upper_density * (_cm(self.top) - _cm(h))
        return self.a[i] + self.b[i] * math.exp(-_cm(h) / self.c[i])

    def _check(self, h: float, allow_top: bool = True) -> float:
        h = float(h)
        if not (0.0 <= h <= self.top) or (h == self.top and not allow_top):
            raise OutOfRangeError(f"altitude {h!r} m outside [0, {self.top:g}{']' if allow_top else ')'} m")
        return h

    def depth(self, h: float) -> float:
        """Atmospheric depth in g/cm^2."""
        h = self._check(h)
        return self._layer_depth(self.layer_index(h), h)

    def density(self, h: float) -> float:
        """Air density in g/cm^3 (the negative derivative of depth)."""
        h = self._check(h, allow_top=False)
        i = self.layer_index(h)
        if i == 4:
            return self.upper_density
        return self.b[i] / self.c[i] * math.exp(-_cm(h) / self.c[i])

    def pressure(self, h: float) -> float:
        """Pressure in hPa."""
        return HPA_PER_G_CM2 * self.depth(h)


def depth_at(atm: LinsleyAtmosphere, h: float) -> float:
    return atm.depth(h)


def pressure_at(atm: LinsleyAtmosphere, h: float) -> float:
    return atm.pressure(h)


def density_at(atm: LinsleyAtmosphere, h: float) -> float:
    return atm.density(h)


@dataclass(frozen=True)
class DensityProfile:
    """Tabulated density (g/cm^3) against altitude (m), plus ordered metadata."""

    altitudes: tuple[float, ...]
    densities: tuple[float, ...]
    meta: tuple[tuple[str, str], ...] = field(default=())

    def __post_init__(self):
        alts = tuple(float(v) for v in self.altitudes)
        dens = tuple(float(v) for v in self.densities)
        object.__setattr__(self, "altitudes", alts)
        object.__setattr__(self, "densities", dens)
        object.__setattr__(self, "meta", tuple((str(k), str(v)) for k, v in self.meta))
        if len(alts) != len(dens):
            raise ValidationError("altitudes and densities differ in length")
        if len(alts) < MIN_PROFILE_SAMPLES:
            raise ValidationError(f"profile needs at least {MIN_PROFILE_SAMPLES} samples, got {len(alts)}")
        for k, (h, rho) in enumerate(zip(alts, dens)):
            if not (math.isfinite(h) and math.isfinite(rho)):
                raise ValidationError(f"sample {k}: non-finite value")
            if rho <= 0:
                raise ValidationError(f"sample {k}: non-positive density {rho!r} at {h:g} m")
            if k and h <= alts[k - 1]:
                raise ValidationError(f"sample {k}: altitude {h:g} m not above {alts[k - 1]:g} m")
            if k and alts[k - 1] > 100.0 and rho > dens[k - 1] * (1 + DENSITY_TOLERANCE):
                raise ValidationError(f"sample {k}: density rises by more than 1% at {h:g} m")

    @property
    def label(self) -> str:
        return " ".join(f"{k}={v}" for k, v in self.meta)

    @property
    def samples(self) -> list[tuple[float, float]]:
        return list(zip(self.altitudes, self.densities))

    def get(self, key: str, default: str | None = None) -> str | None:
        return dict(self.meta).get(key, default)


def sample_profile(
    atm: LinsleyAtmosphere,
    step: float = 250.0,
    start: float = 0.0,
    stop: float | None = None,
    meta: Iterable[tuple[str, str]] = (),
) -> DensityProfile:
    """Sample a model's density every ``step`` metres on [start, stop)."""
    stop = atm.top if stop is None else stop
    n = int(math.ceil((stop - start) / step))
    alts = [start + k * step for k in range(n)]
    alts = [h for h in alts if h < stop]
    return DensityProfile(tuple(alts), tuple(atm.density(h) for h in alts), tuple(meta))


@dataclass(frozen=True)
class LinsleyFit:
    atmosphere: LinsleyAtmosphere
    rms: tuple[float, ...]
    counts: tuple[int, ...]
    extrapolated: tuple[str, ...]


def _loglinear(h_cm: np.ndarray, rho: np.ndarray) -> tuple[float, float, float]:
    """Least-squares ln(rho) = ln(b/c) - h/c. Returns (b, c, rms of residuals)."""
    y = np.log(rho)
    xm, ym = h_cm.mean(), y.mean()
    dx = h_cm - xm
    sxx = float(np.dot(dx, dx))
    if sxx == 0.0:
        raise FitError("singular fit: all samples at one altitude")
    slope = float(np.dot(dx, y - ym)) / sxx
    if not slope < 0:
        raise FitError("singular fit: density does not fall with altitude in this layer")
    intercept = ym - slope * xm
    c = -1.0 / slope
    b = c * math.exp(intercept)
    resid = y - (intercept + slope * h_cm)
    return b, c, math.sqrt(float(np.dot(resid, resid)) / len(y))


def fit_linsley(
    profile: DensityProfile,
    boundaries: Sequence[float] = DEFAULT_BOUNDARIES,
    top: float = DEFAULT_TOP,
) -> LinsleyFit:
    """Fit a Linsley model to a tabulated profile.

    Each exponential layer gets (b, c) from a log-linear regression of density
    on altitude; a_i then follow top-down from X(top) = 0 and continuity.
    Layers above the highest sample take the US standard parameters and the
    fit reports them in ``extrapolated``.
    """
    boundaries = tuple(float(v) for v in boundaries)
    edges = (0.0,) + boundaries + (float(top),)
    if len(boundaries) != 4 or any(lo >= hi for lo, hi in zip(edges, edges[1:])):
        raise FitError(f"need 4 strictly increasing boundaries inside (0, {top:g}) m")
    h = np.asarray(profile.altitudes)
    rho = np.asarray(profile.densities)
    if np.any(rho <= 0):
        raise FitError("non-positive density")
    if h[0] < 0:
        raise FitError(f"profile starts below sea level ({h[0]:g} m)")
    if h[-1] < MIN_FIT_TOP:
        raise FitError(f"profile must reach {MIN_FIT_TOP / 1000:g} km, stops at {h[-1]:g} m")

    layer = np.searchsorted(np.asarray(boundaries), h, side="right")
    h_top = float(h[-1])
    b: list[float | None] = [None] * 4
    c: list[float | None] = [None] * 4
    rms = [0.0] * 5
    counts = [int(np.sum(layer == i)) for i in range(5)]
    notes: list[str] = []

    for i in range(4):
        n = counts[i]
        if n >= 2:
            m = layer == i
            b[i], c[i], rms[i] = _loglinear(h[m] * 100.0, rho[m])
        elif n == 1:
            raise FitError(f"insufficient samples in layer {i + 1} ({edges[i]:g}-{edges[i + 1]:g} m): 1")
        elif edges[i] >= h_top:
            b[i], c[i] = US_STANDARD_B[i], US_STANDARD_C[i]
            notes.append(f"layer {i + 1}: no samples above {h_top:g} m, US standard parameters")
        elif edges[i + 1] <= h[0]:
            continue
        else:
            raise FitError(f"insufficient samples in layer {i + 1} ({edges[i]:g}-{edges[i + 1]:g} m): 0")

    # Empty layers under the lowest sample reuse the lowest fitted layer.
    first = next(i for i in range(4) if b[i] is not None)
    for i in range(first):
        b[i], c[i] = b[first], c[first]
        notes.append(f"layer {i + 1}: below lowest sample, layer {first + 1} exponential extended")
    if h[0] > 0:
        notes.append(f"below {h[0]:g} m: layer {first + 1} exponential extended to the ground")

    if counts[4]:
        upper = rho[layer == 4]
        upper_density = float(upper.mean())
        rms[4] = float(np.sqrt(np.mean(np.log(upper / upper_density) ** 2)))
    else:
        upper_density = US_STANDARD_UPPER_DENSITY
        notes.append("layer 5: no samples, US standard density")

    atm = LinsleyAtmosphere.from_layers(b, c, boundaries=boundaries, top=top, upper_density=upper_density)
    return LinsleyFit(atm, tuple(rms), tuple(counts), tuple(notes))


def monthly_average(profiles: Sequence[DensityProfile]) -> DensityProfile:
    """Pointwise arithmetic mean of density profiles.

    Profiles on other grids are linearly interpolated onto the first one,
    restricted to the altitude span all members cover.
    """
    profiles = list(profiles)
    if not profiles:
        raise ValidationError("no profiles to average")
    grid = np.asarray(profiles[0].altitudes)
    lo = max(p.altitudes[0] for p in profiles)
    hi = min(p.altitudes[-1] for p in profiles)
    if lo > hi:
        raise ValidationError("profiles have non-overlapping altitude ranges")
    grid = grid[(grid >= lo) & (grid <= hi)]
    if len(grid) < MIN_PROFILE_SAMPLES:
        raise ValidationError("profiles overlap on fewer than 4 altitudes of the first grid")
    stack = []
    for p in profiles:
        if p.altitudes == profiles[0].altitudes:
            stack.append(np.asarray(p.densities)[np.isin(profiles[0].altitudes, grid)])
        else:
            stack.append(np.interp(grid, p.altitudes, p.densities))
    mean = np.mean(stack, axis=0)

    meta: list[tuple[str, str]] = []
    sites = {p.get("site") for p in profiles}
    if len(sites) == 1 and None not in sites:
        meta.append(("site", sites.pop()))
    months = [p.get("month") for p in profiles if p.get("month")]
    if months:
        meta.append(("window", months[0] if len(set(months)) == 1 else f"{months[0]}..{months[-1]}"))
    meta.append(("members", str(len(profiles))))
    return DensityProfile(tuple(grid.tolist()), tuple(mean.tolist()), tuple(meta))
