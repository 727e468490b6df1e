"""Linear barometric model of neutron flux: zeta = beta * (P - P_ref).

Predictions, the inverse (pressure for a target flux), and a least-squares
fit of beta from paired pressure/flux series.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .catalog import EnergyBand, SiteRecord
from .errors import FitError, ModelValidityError, OutOfRangeError

PRESSURE_RANGE_HPA = (500.0, 1100.0)
VALIDITY_WINDOW_HPA = 20.0
MAX_DELTA_P_HPA = 100.0


@dataclass(frozen=True)
class FluxPrediction:
    site_code: str
    band: EnergyBand
    pressure: float
    delta_p: float
    zeta: float
    flux: float
    extrapolation_flag: bool


def check_pressure(pressure: float) -> float:
    pressure = float(pressure)
    lo, hi = PRESSURE_RANGE_HPA
    if not lo < pressure < hi:
        raise OutOfRangeError(f"pressure out of range: {pressure!r} hPa not in ({lo:g}, {hi:g})")
    return pressure


def relative_variation(site: SiteRecord, band: EnergyBand | int | str, pressure: float) -> float:
    """Relative flux change beta_i * (P - P_ref) for one band; negative above P_ref."""
    pressure = check_pressure(pressure)
    return site.band(band).beta * (pressure - site.ref_pressure)


def predict_flux(site: SiteRecord, band: EnergyBand | int | str, pressure: float) -> FluxPrediction:
    band = EnergyBand.parse(band)
    pressure = check_pressure(pressure)
    model = site.band(band)
    delta_p = pressure - site.ref_pressure
    zeta = model.beta * delta_p
    flux = model.ref_flux * (1.0 + zeta)
    if flux <= 0:
        raise ModelValidityError(
            f"predicted flux {flux:.4g} <= 0 at {site.code} for dP = {delta_p:g} hPa; linear model invalid"
        )
    return FluxPrediction(
        site_code=site.code,
        band=band,
        pressure=pressure,
        delta_p=delta_p,
        zeta=zeta,
        flux=flux,
        extrapolation_flag=abs(delta_p) > VALIDITY_WINDOW_HPA,
    )


def pressure_for_flux(site: SiteRecord, band: EnergyBand | int | str, target_flux: float) -> float:
    """Invert the linear model: the station pressure giving ``target_flux``."""
    model = site.band(band)
    if not target_flux > 0:
        raise ModelValidityError(f"target flux must be positive, got {target_flux!r}")
    delta_p = (target_flux / model.ref_flux - 1.0) / model.beta
    if abs(delta_p) > MAX_DELTA_P_HPA:
        raise ModelValidityError(
            f"target flux {target_flux:.4g} needs dP = {delta_p:.1f} hPa, beyond +/-{MAX_DELTA_P_HPA:g} hPa"
        )
    return check_pressure(site.ref_pressure + delta_p)


@dataclass(frozen=True)
class BetaFit:
    beta: float
    ref_flux: float
    ref_pressure: float
    residual: float
    n: int


def fit_beta(series: Iterable[tuple[float, float]]) -> BetaFit:
    """Fit beta by ordinary least squares.

    The reference pressure and flux are the sample means; beta is the slope of
    ``flux / ref_flux - 1`` against ``pressure - ref_pressure`` and ``residual``
    the RMS of the fit residuals.
    """
    data = np.asarray(list(series), dtype=float)
    if data.ndim != 2 or data.shape[1] != 2:
        raise FitError("series must be a sequence of (pressure, flux) pairs")
    if len(data) < 3:
        raise FitError(f"need at least 3 points, got {len(data)}")
    if not np.all(np.isfinite(data)):
        raise FitError("series contains non-finite values")
    pressure, flux = data[:, 0], data[:, 1]
    if np.any(flux <= 0):
        raise FitError("fluxes must be positive")
    ref_pressure = float(pressure.mean())
    ref_flux = float(flux.mean())
    x = pressure - ref_pressure
    y = flux / ref_flux - 1.0
    sxx = float(np.dot(x, x))
    if sxx == 0.0:
        raise FitError("degenerate series: zero pressure variance")
    beta = float(np.dot(x, y)) / sxx
    resid = y - beta * x
    return BetaFit(
        beta=beta,
        ref_flux=ref_flux,
        ref_pressure=ref_pressure,
        residual=math.sqrt(float(np.dot(resid, resid)) / len(data)),
        n=len(data),
    )
