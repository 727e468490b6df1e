"""File formats and live inputs: density profiles, pressure series, the
weather-provider client, sea-level to station pressure, and the forecast log.

Every parser accepts ``str`` or ``bytes`` and either returns a value or raises
a :class:`~nrisk.errors.NriskError` that names the offending line.
"""

from __future__ import annotations

import json
import logging
import math
import os
import threading
import time
import warnings
from dataclasses import asdict, dataclass, fields
from datetime import datetime, timezone
from typing import Any, Callable, Protocol

import requests

from .atmosphere import DensityProfile, LinsleyAtmosphere
from .errors import NriskError, OutOfRangeError, ParseError, PayloadError, TransportError, ValidationError

log = logging.getLogger(__name__)

STATION = "station"
MEAN_SEA_LEVEL = "mean_sea_level"
_KIND_ALIASES = {"station": STATION, "mean_sea_level": MEAN_SEA_LEVEL, "msl": MEAN_SEA_LEVEL}
SAMPLE_PRESSURE_RANGE = (300.0, 1100.0)
MSL_RANGE = (900.0, 1100.0)
STALE_AFTER_S = 3 * 3600.0
# Years 1..9999, the span datetime can represent.
_TIME_RANGE = (-62135596800.0, 253402300799.0)

ENV_URL = "NRISK_WEATHER_URL"
ENV_KEY = "NRISK_WEATHER_KEY"


def _num(x: float) -> str:
    s = repr(float(x))
    return s[:-2] if s.endswith(".0") else s


def _text(document: str | bytes) -> str:
    if isinstance(document, bytes):
        try:
            return document.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"not valid UTF-8 at byte {exc.start}") from None
    return document


def _float(value: str | float, line: int, field: str) -> float:
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise ParseError(f"not a number: {value!r}", line=line, field=field) from None
    if not math.isfinite(x):
        raise ParseError(f"not a finite number: {value!r}", line=line, field=field)
    return x


# -- density profiles ---------------------------------------------------------

def parse_profile(document: str | bytes) -> DensityProfile:
    """Parse ``# key=value`` metadata lines and ``altitude_m,density_g_cm3`` rows."""
    meta: list[tuple[str, str]] = []
    alts: list[float] = []
    dens: list[float] = []
    for n, raw in enumerate(_text(document).splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            for token in line[1:].split():
                if "=" in token:
                    key, value = token.split("=", 1)
                    meta.append((key, value))
            continue
        if line.replace(" ", "") == "altitude_m,density_g_cm3" and not alts:
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ParseError(f"expected 2 fields, got {len(parts)}", line=n)
        h = _float(parts[0].strip(), n, "altitude_m")
        rho = _float(parts[1].strip(), n, "density_g_cm3")
        if alts and h <= alts[-1]:
            raise ParseError(f"altitude {h:g} m not above previous {alts[-1]:g} m", line=n, field="altitude_m")
        if rho <= 0:
            raise ParseError(f"non-positive density {rho!r}", line=n, field="density_g_cm3")
        alts.append(h)
        dens.append(rho)
    try:
        return DensityProfile(tuple(alts), tuple(dens), tuple(meta))
    except ValidationError as exc:
        raise ParseError(f"invalid profile: {exc}") from None


def serialize_profile(profile: DensityProfile) -> str:
    lines = []
    if profile.meta:
        lines.append("# " + " ".join(f"{k}={v}" for k, v in profile.meta))
    lines.extend(f"{_num(h)},{_num(rho)}" for h, rho in profile.samples)
    return "\n".join(lines) + "\n"


# -- pressure series ----------------------------------------------------------

@dataclass(frozen=True)
class PressureSample:
    timestamp: float  # UTC seconds
    pressure: float  # hPa
    kind: str
    source: str = ""
    stale: bool = False

    def __post_init__(self):
        lo, hi = SAMPLE_PRESSURE_RANGE
        if not (isinstance(self.pressure, (int, float)) and lo < self.pressure < hi):
            raise ValidationError(f"pressure {self.pressure!r} hPa outside ({lo:g}, {hi:g})")
        if self.kind not in (STATION, MEAN_SEA_LEVEL):
            raise ValidationError(f"unknown pressure kind {self.kind!r}")


def parse_time(value: Any) -> float:
    """ISO-8601 (``Z`` or offset; naive means UTC) or epoch seconds to UTC seconds."""
    if isinstance(value, bool):
        raise ValueError("boolean is not a timestamp")
    if isinstance(value, (int, float)):
        ts = float(value)
    else:
        text = str(value).strip()
        if text.endswith(("Z", "z")):
            text = text[:-1] + "+00:00"
        dt = datetime.fromisoformat(text)
        if dt.tzinfo is None:
            dt = dt.replace(tzinfo=timezone.utc)
        ts = dt.timestamp()
    if not _TIME_RANGE[0] <= ts <= _TIME_RANGE[1]:
        raise ValueError(f"timestamp {value!r} outside years 1-9999")
    return ts


def format_time(ts: float) -> str:
    dt = datetime.fromtimestamp(ts, tz=timezone.utc)
    if ts == int(ts):
        return dt.strftime("%Y-%m-%dT%H:%M:%SZ")
    return dt.strftime("%Y-%m-%dT%H:%M:%S.%fZ")


def _sample(n: int, when: Any, pressure: Any, kind: Any, source: Any) -> PressureSample:
    try:
        ts = parse_time(when)
    except (ValueError, TypeError, OverflowError, OSError):
        raise ParseError(f"bad timestamp {when!r}", line=n, field="time") from None
    if isinstance(pressure, bool) or not isinstance(pressure, (str, int, float)):
        raise ParseError(f"not a number: {pressure!r}", line=n, field="pressure_hpa")
    try:
        p = _float(pressure, n, "pressure_hpa")
    except OverflowError:
        raise ParseError("number too large", line=n, field="pressure_hpa") from None
    k = _KIND_ALIASES.get(str(kind).strip().lower())
    if k is None:
        raise ParseError(f"unknown kind {kind!r}", line=n, field="kind")
    try:
        return PressureSample(ts, p, k, str(source))
    except ValidationError as exc:
        raise ParseError(str(exc), line=n, field="pressure_hpa") from None


def parse_pressure_series(document: str | bytes) -> list[PressureSample]:
    """Parse ``iso8601_utc,pressure_hpa,kind,source`` rows or JSON objects, one per line."""
    out: list[PressureSample] = []
    for n, raw in enumerate(_text(document).splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("{"):
            try:
                obj = json.loads(line)
            except (ValueError, RecursionError) as exc:
                raise ParseError(f"invalid JSON: {exc}", line=n) from None
            if not isinstance(obj, dict):
                raise ParseError("expected a JSON object", line=n)
            missing = [k for k in ("time", "pressure_hpa", "kind") if k not in obj]
            if missing:
                raise ParseError(f"missing {', '.join(missing)}", line=n)
            sample = _sample(n, obj["time"], obj["pressure_hpa"], obj["kind"], obj.get("source", ""))
        else:
            parts = line.split(",")
            if len(parts) != 4:
                raise ParseError(f"expected 4 fields, got {len(parts)}", line=n)
            sample = _sample(n, *(p.strip() for p in parts))
        if out and sample.timestamp <= out[-1].timestamp:
            what = "duplicate" if sample.timestamp == out[-1].timestamp else "out-of-order"
            raise ParseError(f"{what} timestamp {format_time(sample.timestamp)}", line=n, field="time")
        out.append(sample)
    return out


def serialize_pressure_series(samples: list[PressureSample], form: str = "csv") -> str:
    if form == "csv":
        rows = [f"{format_time(s.timestamp)},{_num(s.pressure)},{s.kind},{s.source}" for s in samples]
    elif form == "jsonl":
        rows = [
            json.dumps({"time": format_time(s.timestamp), "pressure_hpa": s.pressure, "kind": s.kind,
                        "source": s.source})
            for s in samples
        ]
    else:
        raise ValueError(f"unknown form {form!r}")
    return "".join(r + "\n" for r in rows)


# -- weather provider ---------------------------------------------------------

class WeatherClient(Protocol):
    """Anything that returns the provider's raw JSON observation for a location."""

    def observe(self, lat: float, lon: float) -> dict: ...


class HttpWeatherClient:
    """Generic JSON forecast API client.

    Sends ``GET {url}?latitude=..&longitude=..&current=surface_pressure,pressure_msl``
    and, when a key is configured, an ``apikey`` parameter. Endpoint and key
    default to ``NRISK_WEATHER_URL`` and ``NRISK_WEATHER_KEY``.
    """

    def __init__(self, url: str | None = None, key: str | None = None, timeout: float = 10.0,
                 session: requests.Session | None = None):
        self.url = url or os.environ.get(ENV_URL)
        self.key = key if key is not None else os.environ.get(ENV_KEY)
        if not self.url:
            raise ValidationError(f"weather endpoint not configured; set {ENV_URL}")
        self.timeout = timeout
        self.session = session or requests.Session()

    def observe(self, lat: float, lon: float) -> dict:
        params = {"latitude": lat, "longitude": lon, "current": "surface_pressure,pressure_msl"}
        if self.key:
            params["apikey"] = self.key
        try:
            resp = self.session.get(self.url, params=params, timeout=self.timeout)
            resp.raise_for_status()
        except requests.RequestException as exc:
            raise TransportError(f"weather request failed: {exc}") from exc
        try:
            return resp.json()
        except ValueError:
            raise PayloadError("weather response is not JSON") from None


def observation_from_payload(payload: Any, source: str = "weather") -> PressureSample:
    """Map a provider payload to a sample.

    Reads ``surface_pressure`` (station) or ``pressure_msl`` (sea level) and
    ``time``, either at top level or under ``current``.
    """
    if not isinstance(payload, dict):
        raise PayloadError("payload is not a JSON object")
    body = payload.get("current") if isinstance(payload.get("current"), dict) else payload
    if "surface_pressure" in body:
        value, kind = body["surface_pressure"], STATION
    elif "pressure_msl" in body:
        value, kind = body["pressure_msl"], MEAN_SEA_LEVEL
    else:
        raise PayloadError("payload has no pressure field (surface_pressure or pressure_msl)")
    if "time" not in body:
        raise PayloadError("payload has no observation time")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise PayloadError(f"pressure is not a number: {value!r}")
    try:
        ts = parse_time(body["time"])
    except (ValueError, TypeError, OverflowError):
        raise PayloadError(f"bad observation time {body['time']!r}") from None
    try:
        return PressureSample(ts, float(value), kind, source)
    except ValidationError as exc:
        raise PayloadError(str(exc)) from None


def fetch_current_pressure(
    client: WeatherClient,
    lat: float,
    lon: float,
    *,
    attempts: int = 3,
    backoff: float = 1.0,
    sleep: Callable[[float], None] = time.sleep,
    now: Callable[[], float] = time.time,
    source: str = "weather",
) -> PressureSample:
    """Latest surface observation, retrying transport failures with exponential backoff.

    Observations older than three hours come back with ``stale=True``.
    """
    last: Exception | None = None
    for attempt in range(attempts):
        try:
            payload = client.observe(lat, lon)
            break
        except (TransportError, OSError, requests.RequestException) as exc:
            last = exc
            log.warning("weather fetch attempt %d/%d failed: %s", attempt + 1, attempts, exc)
            if attempt + 1 < attempts:
                sleep(backoff * 2**attempt)
    else:
        raise TransportError(f"weather provider unreachable after {attempts} attempts: {last}")
    sample = observation_from_payload(payload, source)
    if now() - sample.timestamp > STALE_AFTER_S:
        log.warning("stale observation at (%g, %g): %s", lat, lon, format_time(sample.timestamp))
        sample = PressureSample(sample.timestamp, sample.pressure, sample.kind, sample.source, stale=True)
    return sample


# -- sea level to station -----------------------------------------------------

def _check_msl_inputs(value: float, altitude: float, atm: LinsleyAtmosphere) -> None:
    if not 0.0 <= altitude <= atm.top:
        raise OutOfRangeError(f"altitude {altitude!r} m outside [0, {atm.top:g}] m")
    if not value > 0:
        raise OutOfRangeError(f"pressure must be positive, got {value!r}")


def msl_to_station_pressure(msl: float, site_altitude: float, atm: LinsleyAtmosphere) -> float:
    """Scale sea-level pressure by the model's P(altitude) / P(0)."""
    lo, hi = MSL_RANGE
    if not lo < msl < hi:
        raise OutOfRangeError(f"sea-level pressure {msl!r} hPa outside ({lo:g}, {hi:g})")
    _check_msl_inputs(msl, site_altitude, atm)
    return msl * (atm.pressure(site_altitude) / atm.pressure(0.0))


def station_to_msl_pressure(station: float, site_altitude: float, atm: LinsleyAtmosphere) -> float:
    _check_msl_inputs(station, site_altitude, atm)
    return station / (atm.pressure(site_altitude) / atm.pressure(0.0))


# -- forecast log -------------------------------------------------------------

class ForecastLogWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ForecastRecord:
    timestamp: float
    site_code: str
    band: int
    pressure: float
    sigma: float
    flux: float
    fit: float
    mtbf: float
    model_version: str
    catalog_version: str
    pressure_source: str = ""

    def __post_init__(self):
        for name in ("timestamp", "pressure", "sigma", "flux", "fit", "mtbf"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ValueError(f"{name} must be a finite number, got {v!r}")
        for name in ("site_code", "model_version", "catalog_version", "pressure_source"):
            if not isinstance(getattr(self, name), str):
                raise ValueError(f"{name} must be a string")
        if isinstance(self.band, bool) or self.band not in (0, 1, 2):
            raise ValueError(f"band must be 0, 1 or 2, got {self.band!r}")

    def to_json(self) -> str:
        return json.dumps(asdict(self), ensure_ascii=False, allow_nan=False)

    @classmethod
    def from_dict(cls, obj: dict) -> "ForecastRecord":
        names = {f.name for f in fields(cls)}
        required = names - {"pressure_source"}
        if not isinstance(obj, dict) or not required <= obj.keys():
            raise ValueError("missing fields")
        return cls(**{k: v for k, v in obj.items() if k in names})


def _append_line(path: str, line: str, durable: bool) -> None:
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(line + "\n")
        fh.flush()
        if durable:
            os.fsync(fh.fileno())


def append_forecast(path: str | os.PathLike, record: ForecastRecord, durable: bool = True) -> None:
    try:
        _append_line(os.fspath(path), record.to_json(), durable)
    except OSError as exc:
        raise NriskError(f"cannot append to forecast log {path}: {exc}") from exc


def parse_forecasts(document: str | bytes, origin: str = "<log>") -> list[ForecastRecord]:
    """Read a forecast log. A torn final line is skipped with a warning."""
    text = _text(document)
    lines = text.split("\n")
    complete_tail = text.endswith("\n") or not text
    out = []
    for n, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        is_last = n == len(lines)
        try:
            out.append(ForecastRecord.from_dict(json.loads(line)))
        except (ValueError, TypeError, OverflowError, RecursionError) as exc:
            if is_last and not complete_tail:
                warnings.warn(f"{origin}: skipping partial trailing record on line {n}", ForecastLogWarning,
                              stacklevel=2)
                break
            raise ParseError(f"corrupt forecast record: {exc}", line=n) from None
    return out


def read_forecasts(path: str | os.PathLike) -> list[ForecastRecord]:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise NriskError(f"cannot read forecast log {path}: {exc}") from exc
    return parse_forecasts(data, origin=os.fspath(path))


class ForecastLog:
    """Single-writer append-only log; appends are serialised by a lock."""

    def __init__(self, path: str | os.PathLike, durable: bool = True):
        self.path = os.fspath(path)
        self.durable = durable
        self._lock = threading.Lock()

    def append(self, record: ForecastRecord) -> None:
        with self._lock:
            append_forecast(self.path, record, self.durable)

    def read(self) -> list[ForecastRecord]:
        if not os.path.exists(self.path):
            return []
        return read_forecasts(self.path)
