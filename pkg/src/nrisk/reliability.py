"""FIT rates, MTBF and checkpoint intervals from neutron flux.

Units: flux in m^-2 h^-1, cross-sections in cm^2, FIT in failures per 1e9
device-hours, MTBF in hours, checkpoint cost and interval in seconds.
"""

from __future__ import annotations

import csv
import math
import os
import warnings
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from typing import Sequence

from .barometric import check_pressure, predict_flux, relative_variation
from .catalog import EnergyBand, SiteRecord
from .errors import ModelValidityError, ParseError, ValidationError

# 1 m^-2 = 1e-4 cm^-2 and FIT counts per 1e9 h: 1e9 * 1e-4 = 1e5.
FIT_SCALE = 1e5
FIT_HOURS = 1e9


class ErrorKind(str, Enum):
    SDC = "SDC"
    CRASH = "crash"
    DUE = "DUE"

    @classmethod
    def parse(cls, value: str) -> "ErrorKind":
        for kind in cls:
            if kind.value.lower() == str(value).strip().lower():
                return kind
        raise ValidationError(f"unknown error kind {value!r}; use SDC, crash or DUE")


@dataclass(frozen=True)
class DeviceSensitivity:
    device_name: str
    error_kind: ErrorKind
    sigma: float
    sigma_err: float = 0.0
    source_note: str = ""

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValidationError(f"{self.device_name}/{self.error_kind.value}: sigma must be positive")
        if not self.sigma_err >= 0:
            raise ValidationError(f"{self.device_name}/{self.error_kind.value}: uncertainty must be >= 0")


DEVICE_COLUMNS = ("device", "error_kind", "sigma_cm2", "sigma_err_cm2", "source")


def parse_devices(text: str) -> list[DeviceSensitivity]:
    lines = [
        (n, line) for n, line in enumerate(text.splitlines(), start=1)
        if line.strip() and not line.lstrip().startswith("#")
    ]
    if not lines:
        raise ValidationError("no devices")
    try:
        rows = [(n, [f.strip() for f in next(csv.reader([line]))]) for n, line in lines]
    except csv.Error as exc:
        raise ParseError(str(exc)) from None
    header = tuple(rows[0][1])
    if header != DEVICE_COLUMNS:
        raise ParseError(f"unexpected header {list(header)!r}", line=lines[0][0])
    out = []
    for n, fields in rows[1:]:
        if len(fields) != len(DEVICE_COLUMNS):
            raise ParseError(f"expected {len(DEVICE_COLUMNS)} fields, got {len(fields)}", line=n)
        name, kind, sigma, err, source = fields
        try:
            sigma_v, err_v = float(sigma), float(err)
        except ValueError:
            raise ParseError("sigma and its uncertainty must be numbers", line=n, field="sigma_cm2") from None
        out.append(DeviceSensitivity(name, ErrorKind.parse(kind), sigma_v, err_v, source))
    return out


def load_devices(path: str | os.PathLike | None = None) -> list[DeviceSensitivity]:
    """Load a device-sensitivity file; ``None`` loads the built-in K20X table."""
    if path is None:
        text = (resources.files("nrisk") / "data" / "devices.csv").read_text(encoding="utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return parse_devices(text)


BUILTIN_DEVICES = tuple(load_devices())
K20X_SDC, K20X_CRASH = BUILTIN_DEVICES


def fit_rate(flux: float, sigma: float) -> float:
    """FIT = 1e5 * flux[m^-2 h^-1] * sigma[cm^2]."""
    if not flux > 0:
        raise ModelValidityError(f"flux must be positive, got {flux!r}")
    if not sigma > 0:
        raise ModelValidityError(f"sigma must be positive, got {sigma!r}")
    return FIT_SCALE * flux * sigma


def fit_rate_at_pressure(site: SiteRecord, band: EnergyBand | int | str, sigma: float, pressure: float) -> float:
    """FIT = 1e5 * sigma * xi_ref * (1 + beta * (P - P_ref)) for one energy band."""
    pressure = check_pressure(pressure)
    if not sigma > 0:
        raise ModelValidityError(f"sigma must be positive, got {sigma!r}")
    model = site.band(band)
    scale = 1.0 + model.beta * (pressure - site.ref_pressure)
    if scale <= 0:
        raise ModelValidityError(f"predicted flux <= 0 at {site.code}; linear model invalid")
    return FIT_SCALE * sigma * model.ref_flux * scale


def mtbf(fit: float) -> float:
    if not fit > 0:
        raise ModelValidityError(f"FIT must be positive, got {fit!r}")
    return FIT_HOURS / fit


def fleet_mtbf(fit_per_device: float, fleet_size: int) -> float:
    """MTBF of a fleet of identical devices, any single failure counting."""
    if not fit_per_device > 0:
        raise ModelValidityError(f"FIT must be positive, got {fit_per_device!r}")
    if not fleet_size >= 1:
        raise ModelValidityError(f"fleet size must be >= 1, got {fleet_size!r}")
    return FIT_HOURS / (fit_per_device * fleet_size)


def relative_fit_variation(site: SiteRecord, band: EnergyBand | int | str, pressure: float) -> float:
    """Relative FIT change; identical to the flux variation under the linear model."""
    return relative_variation(site, band, pressure)


def checkpoint_interval(mtbf_hours: float, checkpoint_cost: float) -> float:
    """First-order Young/Daly period sqrt(2 * C * MTBF), in seconds."""
    if not mtbf_hours > 0:
        raise ModelValidityError(f"MTBF must be positive, got {mtbf_hours!r}")
    if not checkpoint_cost > 0:
        raise ModelValidityError(f"checkpoint cost must be positive, got {checkpoint_cost!r}")
    mtbf_s = mtbf_hours * 3600.0
    if checkpoint_cost > mtbf_s / 10:
        warnings.warn(
            f"checkpoint cost {checkpoint_cost:g} s exceeds a tenth of the MTBF ({mtbf_s:g} s); "
            "the first-order interval is inaccurate",
            RuntimeWarning,
            stacklevel=2,
        )
    return math.sqrt(2.0 * checkpoint_cost * mtbf_s)


@dataclass(frozen=True)
class DeviceRisk:
    device_name: str
    error_kind: str
    sigma: float
    fit: float
    mtbf: float
    fleet_mtbf: float


@dataclass(frozen=True)
class RiskReport:
    site_code: str
    band: int
    pressure: float
    delta_p: float
    flux: float
    psi: float
    fleet_size: int
    devices: tuple[DeviceRisk, ...]
    fit: float
    mtbf: float
    fleet_mtbf: float
    checkpoint_cost: float | None
    checkpoint_interval: float | None
    extrapolation_flag: bool
    provenance: tuple[str, ...] = field(default=())
    annotations: tuple[str, ...] = field(default=())


def risk_report(
    site: SiteRecord,
    pressure: float,
    band: EnergyBand | int | str = EnergyBand.MID,
    devices: Sequence[DeviceSensitivity] | None = None,
    fleet_size: int = 1,
    checkpoint_cost: float | None = None,
    catalog_version: str | None = None,
) -> RiskReport:
    """FIT, MTBF and checkpoint advice for ``devices`` at ``site`` and ``pressure``.

    The total FIT is the sum over the listed devices/error kinds. Defaults to
    band 1 and the built-in K20X SDC cross-section.
    """
    devices = list(devices) if devices else [K20X_SDC]
    pred = predict_flux(site, band, pressure)
    if not fleet_size >= 1:
        raise ModelValidityError(f"fleet size must be >= 1, got {fleet_size!r}")
    rows = []
    for dev in devices:
        f = fit_rate(pred.flux, dev.sigma)
        rows.append(DeviceRisk(dev.device_name, dev.error_kind.value, dev.sigma, f, mtbf(f), fleet_mtbf(f, fleet_size)))
    total = math.fsum(r.fit for r in rows)
    total_mtbf = mtbf(total)
    total_fleet = fleet_mtbf(total, fleet_size)
    interval = checkpoint_interval(total_fleet, checkpoint_cost) if checkpoint_cost is not None else None

    model = site.band(pred.band)
    provenance = [
        f"site {site.code}: P_ref={site.ref_pressure:g} hPa, xi{int(pred.band)}={model.ref_flux:g} m^-2 h^-1, "
        f"beta{int(pred.band)}={model.beta:g} hPa^-1",
    ]
    if catalog_version:
        provenance.append(f"catalog {catalog_version}")
    provenance.extend(f"sigma {d.device_name}/{d.error_kind.value}={d.sigma:g} cm^2 ({d.source_note})" for d in devices)
    rel = site.flux_neutron_total.err / site.flux_neutron_total.value
    annotations = [f"neutron flux uncertainty at {site.code}: +/-{rel:.1%} (not propagated)"]
    annotations.extend(
        f"sigma uncertainty {d.device_name}/{d.error_kind.value}: +/-{d.sigma_err / d.sigma:.1%}" for d in devices
    )
    if pred.extrapolation_flag:
        annotations.append(f"|dP| = {abs(pred.delta_p):g} hPa exceeds the 20 hPa validity window")

    return RiskReport(
        site_code=site.code,
        band=int(pred.band),
        pressure=pred.pressure,
        delta_p=pred.delta_p,
        flux=pred.flux,
        psi=relative_fit_variation(site, pred.band, pressure),
        fleet_size=int(fleet_size),
        devices=tuple(rows),
        fit=total,
        mtbf=total_mtbf,
        fleet_mtbf=total_fleet,
        checkpoint_cost=checkpoint_cost,
        checkpoint_interval=interval,
        extrapolation_flag=pred.extrapolation_flag,
        provenance=tuple(provenance),
        annotations=tuple(annotations),
    )
