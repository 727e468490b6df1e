"""Catalog of exascale sites with reference pressures, neutron fluxes and
barometric coefficients.

The shipped catalog (``data/sites.csv``) stores every quantity as an absolute
value. Band fluxes follow ``xi1 + xi2 == xi0``, which fixes the scale of the
> 1 GeV column at 1e3 m^-2 h^-1.
"""

from __future__ import annotations

import csv
import difflib
import hashlib
import io
import math
import os
from dataclasses import dataclass
from enum import IntEnum
from importlib import resources
from typing import Iterable, Iterator, Sequence

import numpy as np
from scipy import stats

from .errors import ParseError, SiteNotFoundError, ValidationError

COLUMNS = (
    "code", "name", "country", "altitude_m", "lat_deg", "lon_deg",
    "flux_all_m2h", "flux_all_err", "flux_n_m2h", "flux_n_err",
    "flux_mu_m2h", "flux_mu_err", "p_ref_hpa",
    "xi0_m2h", "beta0_per_hpa", "xi1_m2h", "beta1_per_hpa", "xi2_m2h", "beta2_per_hpa",
)

ADDITIVITY_TOL = 0.02
# Leave-one-out residual allowed against the exponential P(h) fit of the other sites.
# Shipped data peaks at ~16 hPa (high-latitude CSCF).
PRESSURE_FIT_TOL_HPA = 25.0


class EnergyBand(IntEnum):
    """Neutron energy ranges: 0 is E >= 50 MeV, 1 is 50-1000 MeV, 2 is > 1000 MeV."""

    FULL = 0
    MID = 1
    HIGH = 2

    @property
    def edges_mev(self) -> tuple[float, float]:
        return {0: (50.0, math.inf), 1: (50.0, 1000.0), 2: (1000.0, math.inf)}[int(self)]

    @property
    def label(self) -> str:
        return {0: "E_n >= 50 MeV", 1: "50 <= E_n <= 1000 MeV", 2: "E_n > 1000 MeV"}[int(self)]

    @classmethod
    def parse(cls, value: "EnergyBand | int | str") -> "EnergyBand":
        if isinstance(value, EnergyBand):
            return value
        text = str(value).strip().lower()
        names = {"full": cls.FULL, "mid": cls.MID, "high": cls.HIGH}
        if text in names:
            return names[text]
        try:
            return cls(int(text))
        except ValueError:
            raise ValidationError(f"unknown energy band {value!r}; use 0, 1, 2 or full/mid/high") from None


@dataclass(frozen=True)
class Measured:
    value: float
    err: float


@dataclass(frozen=True)
class BandModel:
    band: EnergyBand
    ref_flux: float
    beta: float


@dataclass(frozen=True)
class SiteRecord:
    code: str
    name: str
    country: str
    altitude: float
    latitude: float
    longitude: float
    flux_all: Measured
    flux_neutron_total: Measured
    flux_muon: Measured
    ref_pressure: float
    bands: tuple[BandModel, BandModel, BandModel]

    def band(self, band: EnergyBand | int | str) -> BandModel:
        return self.bands[int(EnergyBand.parse(band))]


@dataclass(frozen=True)
class Finding:
    code: str
    field: str
    observed: object
    expected: str
    message: str

    def __str__(self) -> str:
        return f"{self.code}: {self.message} ({self.field}={self.observed!r}, expected {self.expected})"


class Catalog(Sequence[SiteRecord]):
    """Immutable ordered collection of sites, looked up by code."""

    def __init__(self, sites: Iterable[SiteRecord], origin: str = "<memory>"):
        self._sites = tuple(sites)
        self.origin = origin
        self._by_code = {s.code.upper(): s for s in self._sites}
        self.version = hashlib.sha256(serialize_catalog(self._sites).encode()).hexdigest()[:12]

    def __getitem__(self, index):
        return self._sites[index]

    def __len__(self) -> int:
        return len(self._sites)

    def __iter__(self) -> Iterator[SiteRecord]:
        return iter(self._sites)

    @property
    def codes(self) -> list[str]:
        return [s.code for s in self._sites]

    def get(self, code: str) -> SiteRecord:
        return get_site(self, code)


def _num(x: float) -> str:
    s = repr(float(x))
    return s[:-2] if s.endswith(".0") else s


def _row(site: SiteRecord) -> list[str]:
    b0, b1, b2 = site.bands
    return [
        site.code, site.name, site.country,
        _num(site.altitude), _num(site.latitude), _num(site.longitude),
        _num(site.flux_all.value), _num(site.flux_all.err),
        _num(site.flux_neutron_total.value), _num(site.flux_neutron_total.err),
        _num(site.flux_muon.value), _num(site.flux_muon.err),
        _num(site.ref_pressure),
        _num(b0.ref_flux), _num(b0.beta), _num(b1.ref_flux), _num(b1.beta), _num(b2.ref_flux), _num(b2.beta),
    ]


def serialize_catalog(sites: Iterable[SiteRecord]) -> str:
    """Canonical catalog text: header plus one row per site, no comments."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for site in sites:
        writer.writerow(_row(site))
    return buf.getvalue()


def parse_catalog(text: str, origin: str = "<string>", validate: bool = True) -> Catalog:
    """Parse catalog text. Raises ParseError with line/field locus, or
    ValidationError when ``validate`` is set and any invariant fails."""
    numbered = [
        (n, line) for n, line in enumerate(text.splitlines(), start=1)
        if line.strip() and not line.lstrip().startswith("#")
    ]
    if not numbered:
        raise ValidationError("no sites")
    header_no, header_line = numbered[0]
    try:
        header = next(csv.reader([header_line]))
    except csv.Error as exc:
        raise ParseError(str(exc), line=header_no) from None
    if tuple(h.strip() for h in header) != COLUMNS:
        raise ParseError(f"unexpected header {header!r}", line=header_no)
    if len(numbered) == 1:
        raise ValidationError("no sites")

    sites: list[SiteRecord] = []
    seen: dict[str, int] = {}
    for n, line in numbered[1:]:
        try:
            fields = next(csv.reader([line]))
        except csv.Error as exc:
            raise ParseError(str(exc), line=n) from None
        if len(fields) != len(COLUMNS):
            raise ParseError(f"expected {len(COLUMNS)} fields, got {len(fields)}", line=n)
        row = dict(zip(COLUMNS, (f.strip() for f in fields)))
        values: dict[str, float] = {}
        for col in COLUMNS[3:]:
            try:
                values[col] = float(row[col])
            except ValueError:
                raise ParseError(f"not a number: {row[col]!r}", line=n, field=col) from None
            if not math.isfinite(values[col]):
                raise ParseError(f"not a finite number: {row[col]!r}", line=n, field=col)
        code = row["code"]
        if not code:
            raise ParseError("empty site code", line=n, field="code")
        key = code.upper()
        if key in seen:
            raise ValidationError(f"duplicated site code {code!r} (lines {seen[key]} and {n})")
        seen[key] = n
        sites.append(SiteRecord(
            code=code, name=row["name"], country=row["country"],
            altitude=values["altitude_m"], latitude=values["lat_deg"], longitude=values["lon_deg"],
            flux_all=Measured(values["flux_all_m2h"], values["flux_all_err"]),
            flux_neutron_total=Measured(values["flux_n_m2h"], values["flux_n_err"]),
            flux_muon=Measured(values["flux_mu_m2h"], values["flux_mu_err"]),
            ref_pressure=values["p_ref_hpa"],
            bands=tuple(
                BandModel(EnergyBand(i), values[f"xi{i}_m2h"], values[f"beta{i}_per_hpa"]) for i in range(3)
            ),
        ))

    if validate:
        findings = validate_catalog(sites)
        if findings:
            raise ValidationError("; ".join(str(f) for f in findings))
    return Catalog(sites, origin=origin)


def default_catalog_path() -> str:
    return str(resources.files("nrisk") / "data" / "sites.csv")


def load_catalog(source: str | os.PathLike | None = None, validate: bool = True) -> Catalog:
    """Load a catalog file; ``None`` loads the shipped 23-site catalog."""
    path = os.fspath(source) if source is not None else default_catalog_path()
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except (OSError, UnicodeDecodeError) as exc:
        raise ParseError(f"cannot read catalog {path}: {exc}") from None
    return parse_catalog(text, origin=path, validate=validate)


def get_site(catalog: Iterable[SiteRecord], code: str) -> SiteRecord:
    """Case-insensitive exact lookup. The error lists the nearest codes."""
    key = code.strip().upper()
    sites = list(catalog)
    for site in sites:
        if site.code.upper() == key:
            return site
    codes = [s.code for s in sites]
    near = difflib.get_close_matches(key, codes, n=3, cutoff=0.3)
    hint = f"; nearest: {', '.join(near)}" if near else f"; known: {', '.join(codes)}"
    raise SiteNotFoundError(f"unknown site {code!r}{hint}")


def _record_findings(s: SiteRecord) -> list[Finding]:
    out: list[Finding] = []

    def bad(field, observed, expected, message):
        out.append(Finding(s.code, field, observed, expected, message))

    if not -100 <= s.altitude <= 9000:
        bad("altitude", s.altitude, "[-100, 9000] m", "altitude out of range")
    if abs(s.latitude) > 90:
        bad("latitude", s.latitude, "|lat| <= 90", "latitude out of range")
    if abs(s.longitude) > 180:
        bad("longitude", s.longitude, "|lon| <= 180", "longitude out of range")
    if not 500 < s.ref_pressure < 1100:
        bad("ref_pressure", s.ref_pressure, "(500, 1100) hPa", "reference pressure out of range")
    for name in ("flux_all", "flux_neutron_total", "flux_muon"):
        m: Measured = getattr(s, name)
        if not m.value > 0:
            bad(name, m.value, "> 0", "flux must be positive")
        if not m.err > 0:
            bad(f"{name}_err", m.err, "> 0", "uncertainty must be positive")
    for bm in s.bands:
        i = int(bm.band)
        if not bm.ref_flux > 0:
            bad(f"xi{i}", bm.ref_flux, "> 0", "flux must be positive")
        if not bm.beta < 0:
            bad(f"beta{i}", bm.beta, "< 0", "beta must be negative")
        elif not bm.beta > -0.02:
            bad(f"beta{i}", bm.beta, "> -0.02 hPa^-1", "beta out of range")
    x0, x1, x2 = (b.ref_flux for b in s.bands)
    if x0 > 0 and abs(x1 + x2 - x0) > ADDITIVITY_TOL * x0:
        bad("xi1+xi2", x1 + x2, f"{x0!r} within {ADDITIVITY_TOL:.0%}", "band additivity violated")
    return out


def _pressure_findings(sites: Sequence[SiteRecord]) -> list[Finding]:
    """Leave-one-out check of each site against ln P = a + b h fitted on the rest.

    The fit is Theil-Sen, so one corrupted site does not drag the others out of tolerance.
    """
    if len(sites) < 3:
        return []
    h = np.array([s.altitude for s in sites], dtype=float)
    p = np.array([s.ref_pressure for s in sites], dtype=float)
    if np.any(p <= 0):
        return []
    out = []
    for i, s in enumerate(sites):
        mask = np.arange(len(sites)) != i
        if np.ptp(h[mask]) == 0:
            continue
        slope, intercept, _, _ = stats.theilslopes(np.log(p[mask]), h[mask])
        if slope >= 0:
            out.append(Finding(s.code, "ref_pressure", s.ref_pressure, "pressure falling with altitude",
                               "pressure/altitude anti-correlation violated"))
            continue
        expected = math.exp(intercept + slope * s.altitude)
        if abs(s.ref_pressure - expected) > PRESSURE_FIT_TOL_HPA:
            out.append(Finding(
                s.code, "ref_pressure", s.ref_pressure,
                f"{expected:.1f} +/- {PRESSURE_FIT_TOL_HPA:g} hPa",
                "pressure/altitude anti-correlation violated",
            ))
    return out


def validate_catalog(sites: Iterable[SiteRecord]) -> list[Finding]:
    """Return one finding per violated invariant; empty for a sound catalog."""
    sites = list(sites)
    findings: list[Finding] = []
    seen: set[str] = set()
    for s in sites:
        if s.code.upper() in seen:
            findings.append(Finding(s.code, "code", s.code, "unique", "duplicated site code"))
        seen.add(s.code.upper())
        findings.extend(_record_findings(s))
    findings.extend(_pressure_findings(sites))
    return findings
