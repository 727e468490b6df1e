"""Read-only HTTP API over the catalog, plus the optional live-pressure poller."""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass
from typing import Callable, Sequence

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from . import __version__
from .atmosphere import LinsleyAtmosphere
from .barometric import predict_flux
from .catalog import Catalog, EnergyBand
from .errors import NriskError, SiteNotFoundError
from .ingest import (
    MEAN_SEA_LEVEL,
    STALE_AFTER_S,
    ForecastLog,
    ForecastRecord,
    PressureSample,
    WeatherClient,
    fetch_current_pressure,
    msl_to_station_pressure,
)
from .reliability import K20X_SDC, DeviceSensitivity, ErrorKind, fit_rate, mtbf, risk_report
from .views import jsonable, site_view

log = logging.getLogger(__name__)

DEFAULT_POLL_INTERVAL_S = 900.0


@dataclass(frozen=True)
class LiveReading:
    record: ForecastRecord
    sample: PressureSample
    received: float


class PressurePoller:
    """Fetch live pressure for a set of sites and keep the latest forecast per site.

    The poller is the only writer of the forecast log. Request handlers read
    ``latest`` under a short lock and never wait for a poll.
    """

    def __init__(
        self,
        catalog: Catalog,
        client: WeatherClient,
        codes: Sequence[str],
        forecast_log: ForecastLog | None = None,
        interval: float = DEFAULT_POLL_INTERVAL_S,
        band: EnergyBand | int = EnergyBand.MID,
        device: DeviceSensitivity = K20X_SDC,
        atmosphere: LinsleyAtmosphere | None = None,
        now: Callable[[], float] = time.time,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.catalog = catalog
        self.client = client
        self.codes = [catalog.get(c).code for c in codes]
        self.log = forecast_log
        self.interval = interval
        self.band = EnergyBand.parse(band)
        self.device = device
        self.atmosphere = atmosphere or LinsleyAtmosphere.us_standard()
        self.now = now
        self.sleep = sleep
        self._latest: dict[str, LiveReading] = {}
        self._lock = threading.Lock()
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def forecast(self, code: str, sample: PressureSample) -> ForecastRecord:
        site = self.catalog.get(code)
        pressure, source = sample.pressure, sample.source
        if sample.kind == MEAN_SEA_LEVEL:
            pressure = msl_to_station_pressure(sample.pressure, site.altitude, self.atmosphere)
            source = f"{source} (msl {sample.pressure:g} hPa reduced via layered atmosphere)"
        flux = predict_flux(site, self.band, pressure).flux
        fit = fit_rate(flux, self.device.sigma)
        return ForecastRecord(
            timestamp=sample.timestamp,
            site_code=site.code,
            band=int(self.band),
            pressure=pressure,
            sigma=self.device.sigma,
            flux=flux,
            fit=fit,
            mtbf=mtbf(fit),
            model_version=__version__,
            catalog_version=self.catalog.version,
            pressure_source=source,
        )

    def poll_once(self) -> dict[str, str | None]:
        """One pass over all sites; returns per-site error text (None on success)."""
        status: dict[str, str | None] = {}
        for code in self.codes:
            site = self.catalog.get(code)
            try:
                sample = fetch_current_pressure(
                    self.client, site.latitude, site.longitude, sleep=self.sleep, now=self.now
                )
                record = self.forecast(code, sample)
            except NriskError as exc:
                log.warning("poll %s failed: %s", code, exc)
                status[code] = str(exc)
                continue
            if self.log is not None:
                self.log.append(record)
            with self._lock:
                self._latest[code] = LiveReading(record, sample, self.now())
            status[code] = None
        return status

    def latest(self, code: str) -> LiveReading | None:
        with self._lock:
            return self._latest.get(code)

    def is_stale(self, reading: LiveReading) -> bool:
        return reading.sample.stale or self.now() - reading.record.timestamp > STALE_AFTER_S

    def _run(self) -> None:
        while not self._stop.is_set():
            self.poll_once()
            self._stop.wait(self.interval)

    def start(self) -> None:
        if self._thread is None:
            self._stop.clear()
            self._thread = threading.Thread(target=self._run, name="nrisk-poller", daemon=True)
            self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None


def create_app(catalog: Catalog, poller: PressurePoller | None = None) -> FastAPI:
    app = FastAPI(title="nrisk", version=__version__)

    @app.exception_handler(SiteNotFoundError)
    async def _not_found(request: Request, exc: SiteNotFoundError):
        return JSONResponse({"detail": str(exc)}, status_code=404)

    @app.exception_handler(NriskError)
    async def _domain(request: Request, exc: NriskError):
        return JSONResponse({"detail": str(exc)}, status_code=400)

    @app.exception_handler(RequestValidationError)
    async def _bad_query(request: Request, exc: RequestValidationError):
        detail = "; ".join(f"{'.'.join(map(str, e['loc']))}: {e['msg']}" for e in exc.errors())
        return JSONResponse({"detail": detail}, status_code=400)

    @app.get("/healthz")
    def healthz():
        return {
            "status": "ok",
            "version": __version__,
            "catalog_version": catalog.version,
            "sites": len(catalog),
            "polling": poller.codes if poller else [],
        }

    @app.get("/sites")
    def sites():
        return [site_view(s) for s in catalog]

    @app.get("/sites/{code}")
    def site(code: str):
        return site_view(catalog.get(code))

    @app.get("/flux")
    def flux(site: str, pressure: float, band: str = "0"):
        return jsonable(predict_flux(catalog.get(site), EnergyBand.parse(band), pressure))

    @app.get("/risk")
    def risk(
        site: str,
        pressure: float,
        band: str = "1",
        sigma: float | None = None,
        fleet: int = 1,
        ckpt_cost: float | None = None,
    ):
        devices = None
        if sigma is not None:
            devices = [DeviceSensitivity("custom", ErrorKind.SDC, sigma, 0.0, "request")]
        report = risk_report(
            catalog.get(site),
            pressure,
            band=EnergyBand.parse(band),
            devices=devices,
            fleet_size=fleet,
            checkpoint_cost=ckpt_cost,
            catalog_version=catalog.version,
        )
        return jsonable(report)

    @app.get("/now/{code}")
    def now(code: str):
        record_site = catalog.get(code)
        if poller is None or record_site.code not in poller.codes:
            return JSONResponse({"detail": f"site {record_site.code} is not being polled"}, status_code=404)
        reading = poller.latest(record_site.code)
        if reading is None:
            return JSONResponse({"detail": "no observation yet"}, status_code=503)
        body = {"record": jsonable(reading.record), "stale": poller.is_stale(reading)}
        if body["stale"]:
            body["detail"] = "live pressure feed is stale"
            return JSONResponse(body, status_code=503)
        return body

    return app
