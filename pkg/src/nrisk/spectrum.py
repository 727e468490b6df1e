"""Galactic cosmic-ray primary spectrum: a power law that steepens at the knee.

Integrates the spectrum into expected primary counts for an exposure
(time x area x solid angle x energy window) and samples primary energies
by inverse CDF.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import ValidationError

AMU_GEV = 0.93149410242
ELECTRON_GEV = 0.51099895e-3
E_MIN_OFFSET_GEV = 0.1
DEFAULT_E_MAX_GEV = 1e6
MONTH_EXPOSURE_S = 129_600.0


@dataclass(frozen=True)
class PowerLawSpectrum:
    """Differential flux ``phi0 * (E / e0) ** alpha_below`` up to ``e_knee``.

    Above the knee the index is ``alpha_above`` with the normalisation fixed
    by continuity. Units of ``phi0`` are GeV^-1 m^-2 s^-1 sr^-1.
    """

    phi0: float
    e0: float = 1.0
    alpha_below: float = -3.0
    alpha_above: float = -3.3
    e_knee: float = 4.5e6

    def __post_init__(self):
        if not (self.phi0 > 0 and self.e0 > 0 and self.e_knee > 0):
            raise ValidationError("phi0, e0 and e_knee must be positive")
        if not (self.alpha_below < -1 and self.alpha_above < -1):
            raise ValidationError("divergent index: both spectral indices must be < -1")

    @property
    def phi_knee(self) -> float:
        return self.phi0 * (self.e_knee / self.e0) ** self.alpha_below

    def segments(self, e_lo: float, e_hi: float) -> list[tuple[float, float, float, float, float]]:
        """Split [e_lo, e_hi] at the knee into (lo, hi, norm, e_ref, alpha) pieces."""
        out = []
        if e_lo < self.e_knee:
            out.append((e_lo, min(e_hi, self.e_knee), self.phi0, self.e0, self.alpha_below))
        if e_hi > self.e_knee:
            out.append((max(e_lo, self.e_knee), e_hi, self.phi_knee, self.e_knee, self.alpha_above))
        return out


@dataclass(frozen=True)
class NucleusSpecies:
    symbol: str
    z: int
    a: int
    mass: float  # GeV

    def __post_init__(self):
        if not 1 <= self.z <= 26:
            raise ValidationError(f"Z={self.z} outside 1..26")
        if not self.mass > 0:
            raise ValidationError("mass must be positive")

    @property
    def e_min(self) -> float:
        return self.mass + E_MIN_OFFSET_GEV


# Most abundant isotope per element, atomic mass in u.
_ISOTOPES = [
    ("H", 1, 1.00782503), ("He", 4, 4.00260325), ("Li", 7, 7.01600344), ("Be", 9, 9.01218307),
    ("B", 11, 11.00930536), ("C", 12, 12.0), ("N", 14, 14.00307400), ("O", 16, 15.99491462),
    ("F", 19, 18.99840316), ("Ne", 20, 19.99244018), ("Na", 23, 22.98976928), ("Mg", 24, 23.98504170),
    ("Al", 27, 26.98153853), ("Si", 28, 27.97692653), ("P", 31, 30.97376200), ("S", 32, 31.97207117),
    ("Cl", 35, 34.96885268), ("Ar", 40, 39.96238312), ("K", 39, 38.96370649), ("Ca", 40, 39.96259086),
    ("Sc", 45, 44.95590828), ("Ti", 48, 47.94794198), ("V", 51, 50.94395704), ("Cr", 52, 51.94050623),
    ("Mn", 55, 54.93804391), ("Fe", 56, 55.93493633),
]

SPECIES = {
    z: NucleusSpecies(sym, z, a, u * AMU_GEV - z * ELECTRON_GEV)
    for z, (sym, a, u) in enumerate(_ISOTOPES, start=1)
}
PROTON = SPECIES[1]
IRON = SPECIES[26]


def flux_at(spec: PowerLawSpectrum, energy: float) -> float:
    if not energy > 0:
        raise ValidationError(f"energy must be positive, got {energy!r}")
    if energy <= spec.e_knee:
        return spec.phi0 * (energy / spec.e0) ** spec.alpha_below
    return spec.phi_knee * (energy / spec.e_knee) ** spec.alpha_above


def _power_integral(lo: float, hi: float, norm: float, e_ref: float, alpha: float) -> float:
    # int_lo^hi norm (E/e_ref)^alpha dE for alpha < -1; hi may be inf.
    k = alpha + 1.0
    upper = 0.0 if math.isinf(hi) else (hi / e_ref) ** k
    return norm * e_ref / -k * ((lo / e_ref) ** k - upper)


def _window(spec, species, e_max, e_min):
    e_min = species.e_min if e_min is None else float(e_min)
    e_max = float(e_max)
    if not e_min > 0:
        raise ValidationError(f"E_min must be positive, got {e_min!r}")
    if e_max < e_min:
        raise ValidationError(f"E_max {e_max:g} GeV below E_min {e_min:g} GeV")
    return e_min, e_max


def _check_exposure(t, area, solid_angle):
    if not (t > 0 and area > 0 and solid_angle > 0):
        raise ValidationError("time, area and solid angle must be positive")


def integrate_count(
    spec: PowerLawSpectrum,
    species: NucleusSpecies,
    t: float,
    area: float,
    solid_angle: float,
    e_max: float = DEFAULT_E_MAX_GEV,
    e_min: float | None = None,
) -> float:
    """Expected primaries: the closed-form spectrum integral times t * area * solid angle.

    ``e_min`` defaults to the species rest mass plus 0.1 GeV.
    """
    _check_exposure(t, area, solid_angle)
    e_min, e_max = _window(spec, species, e_max, e_min)
    if e_max == e_min:
        return 0.0
    total = math.fsum(_power_integral(*seg) for seg in spec.segments(e_min, e_max))
    return total * t * area * solid_angle


def integrate_count_quadrature(
    spec: PowerLawSpectrum,
    species: NucleusSpecies,
    t: float,
    area: float,
    solid_angle: float,
    e_max: float = DEFAULT_E_MAX_GEV,
    e_min: float | None = None,
) -> float:
    """Adaptive-quadrature counterpart of :func:`integrate_count`, used as its oracle.

    Integrates flux(E) * E over ln E, split at the knee.
    """
    _check_exposure(t, area, solid_angle)
    e_min, e_max = _window(spec, species, e_max, e_min)
    if e_max == e_min:
        return 0.0
    if math.isinf(e_max):
        raise ValidationError("quadrature needs a finite E_max")
    cuts = [e_min] + [e for e in (spec.e_knee,) if e_min < e < e_max] + [e_max]
    total = 0.0
    for lo, hi in zip(cuts, cuts[1:]):
        value, _ = integrate.quad(
            lambda u: flux_at(spec, math.exp(u)) * math.exp(u),
            math.log(lo), math.log(hi),
            epsabs=0.0, epsrel=1e-13, limit=200,
        )
        total += value
    return total * t * area * solid_angle


def sample_energies(
    spec: PowerLawSpectrum,
    species: NucleusSpecies,
    count: int,
    seed: int | None = None,
    e_max: float = DEFAULT_E_MAX_GEV,
    e_min: float | None = None,
) -> np.ndarray:
    """Draw ``count`` i.i.d. energies (GeV) from the spectrum on [E_min, E_max]."""
    if count < 0:
        raise ValidationError("count must be >= 0")
    e_min, e_max = _window(spec, species, e_max, e_min)
    if count == 0:
        return np.empty(0)
    if e_max == e_min:
        return np.full(count, e_min)
    segs = spec.segments(e_min, e_max)
    weights = np.array([_power_integral(*s) for s in segs])
    rng = np.random.default_rng(seed)
    u = rng.random(count) * weights.sum()
    out = np.empty(count)
    # Segment k takes draws whose cumulative mass falls in its slice.
    edges = np.concatenate(([0.0], np.cumsum(weights)))
    which = np.clip(np.searchsorted(edges, u, side="right") - 1, 0, len(segs) - 1)
    for k, (lo, hi, norm, e_ref, alpha) in enumerate(segs):
        m = which == k
        v = u[m] - edges[k]
        kk = alpha + 1.0
        base = (lo / e_ref) ** kk + kk * v / (norm * e_ref)
        out[m] = e_ref * np.maximum(base, np.finfo(float).tiny) ** (1.0 / kk)
    return np.clip(out, e_min, e_max)
