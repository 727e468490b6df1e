"""Acceptance gate. One test per criterion; the terminal summary prints a
PASS/FAIL line for each (see conftest.py).
"""

import math
import time
import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from scipy import integrate

from nrisk.atmosphere import (
    DensityProfile,
    LinsleyAtmosphere,
    density_at,
    depth_at,
    fit_linsley,
    pressure_at,
    sample_profile,
)
from nrisk.barometric import fit_beta, predict_flux
from nrisk.catalog import EnergyBand, validate_catalog
from nrisk.cli import main
from nrisk.errors import NriskError
from nrisk.ingest import (
    ForecastLogWarning,
    ForecastRecord,
    PressureSample,
    parse_forecasts,
    parse_pressure_series,
    parse_profile,
    serialize_pressure_series,
    serialize_profile,
)
from nrisk.reliability import (
    fit_rate,
    fit_rate_at_pressure,
    fleet_mtbf,
    mtbf,
    relative_fit_variation,
)
from models import smooth_atmosphere
from nrisk.spectrum import SPECIES, PowerLawSpectrum, integrate_count, integrate_count_quadrature

FUZZ = settings(max_examples=300, deadline=None, suppress_health_check=[HealthCheck.too_slow])


def _timed(fn):
    start = time.perf_counter()
    value = fn()
    return value, time.perf_counter() - start


def test_criterion_01_lanl_sunny_day(catalog):
    zeta, elapsed = _timed(lambda: predict_flux(catalog.get("LANL"), 0, 779.0).zeta)
    print(f"LANL zeta0 = {zeta:.6g} (expected -1.84e-2) in {elapsed * 1e3:.2f} ms")
    assert zeta == pytest.approx(-1.84e-2, abs=1e-6)
    assert elapsed < 1.0


def test_criterion_02_rccs_thunderstorm(catalog):
    zeta, elapsed = _timed(lambda: predict_flux(catalog.get("RCCS"), 0, 1002.0).zeta)
    print(f"RCCS zeta0 = {zeta:.6g} (expected +5.36e-2, quoted as ~6%) in {elapsed * 1e3:.2f} ms")
    assert zeta == pytest.approx(5.36e-2, abs=1e-6)
    # Quoted to one significant figure, rounded up.
    assert math.ceil(100 * zeta) == 6
    assert elapsed < 1.0


def test_criterion_03_ornl_fit_and_titan_mtbf(catalog):
    def run():
        fit = fit_rate_at_pressure(catalog.get("ORNL"), EnergyBand.MID, 4.8e-7, 979.0)
        return fit, fleet_mtbf(fit, 18_688)

    (fit, fleet), elapsed = _timed(run)
    print(f"ORNL FIT = {fit:.2f} (expected 2345 +/- 1); Titan MTBF = {fleet:.3f} h (22.8 +/- 0.2)")
    assert fit == pytest.approx(2345, abs=1)
    assert fleet == pytest.approx(22.8, abs=0.2)
    assert elapsed < 1.0


def test_criterion_04_catalog_integrity(catalog):
    assert len(catalog) == 23
    assert validate_catalog(catalog) == []
    for s in catalog:
        xi0, xi1, xi2 = (b.ref_flux for b in s.bands)
        assert abs(xi1 + xi2 - xi0) / xi0 <= 0.02, s.code
    # Anti-correlation: the exponential pressure/altitude fit across all sites has a negative slope
    # and a Spearman-style rank correlation well below zero.
    h = np.array([s.altitude for s in catalog])
    p = np.array([s.ref_pressure for s in catalog])
    slope = np.polyfit(h, np.log(p), 1)[0]
    ranks_h = np.argsort(np.argsort(h))
    ranks_p = np.argsort(np.argsort(p))
    rho = np.corrcoef(ranks_h, ranks_p)[0, 1]
    print(f"ln P vs h slope {slope:.3e} /m, rank correlation {rho:.3f}")
    assert slope < 0 and rho < -0.9
    flux0 = {s.code: s.band(0).ref_flux for s in catalog}
    assert flux0["NSCG"] == 3.7e4
    assert flux0["LANL"] == 26.4e4
    assert min(flux0.values()) == 3.7e4 and max(flux0.values()) == 26.4e4


def _depth_by_quadrature(atm, h):
    edges = [h] + [e for e in atm.boundaries if e > h] + [atm.top]
    total = 0.0
    for lo, hi in zip(edges, edges[1:]):
        value, _ = integrate.quad(lambda z: density_at(atm, min(z, atm.top - 1e-9)), lo, hi,
                                  epsabs=0.0, epsrel=1e-12, limit=200)
        total += value * 100.0
    return total


def test_criterion_05_atmosphere_oracle():
    iso = LinsleyAtmosphere.isothermal()
    p0 = pressure_at(iso, 0.0)
    print(f"isothermal ground pressure {p0:.4f} hPa (expected 1013.2 +/- 0.1)")
    assert p0 == pytest.approx(1013.2, abs=0.1)

    rng = np.random.default_rng(20240605)
    worst_q = worst_fd = 0.0
    for atm in (iso, LinsleyAtmosphere.us_standard()):
        for h in rng.uniform(0.0, atm.top - 1.0, 100):
            x = depth_at(atm, h)
            worst_q = max(worst_q, abs(x / _depth_by_quadrature(atm, h) - 1))
        for h in rng.uniform(10.0, atm.top - 10.0, 100):
            if any(abs(h - e) < 5.0 for e in atm.boundaries):
                continue
            step = 1.0
            slope = (depth_at(atm, h - step) - depth_at(atm, h + step)) / (2 * step * 100.0)
            worst_fd = max(worst_fd, abs(slope / density_at(atm, h) - 1))
    print(f"depth vs quadrature worst rel {worst_q:.2e}; finite difference worst rel {worst_fd:.2e}")
    assert worst_q <= 1e-4
    assert worst_fd <= 1e-6


def test_criterion_06_linsley_round_trip():
    truth = smooth_atmosphere()
    profile = sample_profile(truth, step=250.0)
    fitted = fit_linsley(profile).atmosphere
    for name in ("b", "c"):
        for got, want in zip(getattr(fitted, name), getattr(truth, name)):
            assert got == pytest.approx(want, rel=1e-6), name
    assert fitted.upper_density == pytest.approx(truth.upper_density, rel=1e-6)
    scale = max(truth.b)
    for got, want in zip(fitted.a, truth.a):
        assert got == pytest.approx(want, rel=1e-6, abs=1e-9 * scale)

    denser = DensityProfile(profile.altitudes, tuple(1.075 * d for d in profile.densities))
    shift = fit_linsley(denser).atmosphere.pressure(0.0) / fitted.pressure(0.0) - 1
    print(f"ground pressure shift for +7.5% density: {shift:.6%}")
    assert shift == pytest.approx(0.075, rel=1e-3)


def _random_spectrum(rng):
    return PowerLawSpectrum(
        phi0=10 ** rng.uniform(2, 5),
        e0=10 ** rng.uniform(-1, 2),
        alpha_below=rng.uniform(-3.5, -1.5),
        alpha_above=rng.uniform(-4.0, -1.5),
        e_knee=10 ** rng.uniform(1, 7),
    )


def test_criterion_07_spectrum_oracle():
    rng = np.random.default_rng(7)
    worst, straddling = 0.0, 0
    for _ in range(100):
        spec = _random_spectrum(rng)
        species = SPECIES[int(rng.integers(1, 27))]
        e_max = species.e_min * 10 ** rng.uniform(0.01, 9)
        straddling += species.e_min < spec.e_knee < e_max
        exposure = dict(t=10 ** rng.uniform(2, 6), area=rng.uniform(0.1, 10), solid_angle=rng.uniform(0.1, 2 * np.pi))
        closed = integrate_count(spec, species, e_max=e_max, **exposure)
        numeric = integrate_count_quadrature(spec, species, e_max=e_max, **exposure)
        worst = max(worst, abs(closed / numeric - 1))
    print(f"closed form vs quadrature worst rel {worst:.2e}; {straddling} ranges straddle the knee")
    assert straddling >= 20
    assert worst <= 1e-8

    spec = PowerLawSpectrum(phi0=1.0, e0=1.0, alpha_below=-3.0, alpha_above=-3.3, e_knee=1e12)
    for e_min, e_max in [(1.0, 10.0), (1.038, 1e6), (0.5, 2.0), (10.0, 1e3)]:
        exact = (e_min ** -2 - e_max ** -2) / 2
        got = integrate_count(spec, SPECIES[1], t=1.0, area=1.0, solid_angle=1.0, e_max=e_max, e_min=e_min)
        assert got == pytest.approx(exact, rel=1e-12, abs=0)


def test_criterion_08_fit_beta_recovery(catalog):
    offsets = np.array([-5.5, -4.5, -3.5, -2.5, -1.5, -0.5, 0.5, 1.5, 2.5, 3.5, 4.5, 5.5]) * (5 / 5.5)
    worst_lin = worst_exp = 0.0
    for s in catalog:
        for band in s.bands:
            p = s.ref_pressure + offsets
            linear = fit_beta(zip(p, band.ref_flux * (1 + band.beta * offsets)))
            worst_lin = max(worst_lin, abs(linear.beta / band.beta - 1))
            exponential = fit_beta(zip(p, band.ref_flux * np.exp(band.beta * offsets)))
            worst_exp = max(worst_exp, abs(exponential.beta / band.beta - 1))
    print(f"linear synthesis worst rel {worst_lin:.2e}; exponential law worst rel {worst_exp:.2e}")
    assert worst_lin <= 1e-9
    assert worst_exp <= 0.03


def test_criterion_09_identity_suite(catalog):
    seen = []
    sites = list(catalog)

    @settings(max_examples=1000, deadline=None, database=None)
    @given(
        idx=st.integers(0, len(sites) - 1),
        band=st.sampled_from(list(EnergyBand)),
        dp=st.floats(-60.0, 60.0),
        log_sigma=st.floats(-12.0, -4.0),
    )
    def identities(idx, band, dp, log_sigma):
        site = sites[idx]
        pressure = min(max(site.ref_pressure + dp, 500.5), 1099.5)
        sigma = 10 ** log_sigma
        pred = predict_flux(site, band, pressure)
        fit = fit_rate(pred.flux, sigma)
        assert fit * mtbf(fit) == pytest.approx(1e9, rel=1e-12)
        assert relative_fit_variation(site, band, pressure) == pred.zeta
        assert fit_rate_at_pressure(site, band, sigma, pressure) == pytest.approx(fit, rel=1e-12)
        seen.append(1)

    identities()
    print(f"identities held on {len(seen)} random inputs")
    assert len(seen) >= 1000


_canonical_row = st.tuples(
    st.integers(0, 100_000).map(float),
    st.floats(1e-10, 1e-2, allow_nan=False),
)


def _monotone_profile(rows):
    alts = sorted({h for h, _ in rows})
    dens = sorted((d for _, d in rows), reverse=True)[: len(alts)]
    return DensityProfile(tuple(alts), tuple(dens), (("site", "LANL"), ("month", "2020-01")))


def _record(ts, code, band, p):
    flux = 5e4 * (1 + 0.001 * (p - 980))
    fit = fit_rate(flux, 4.8e-7)
    return ForecastRecord(ts, code, band, p, 4.8e-7, flux, fit, mtbf(fit), "0.1.0", "abc123", "test")


def test_criterion_10_parser_totality_and_round_trips(tmp_path):
    parsers = (parse_profile, parse_pressure_series, parse_forecasts)

    @FUZZ
    @given(st.one_of(st.binary(max_size=400), st.text(max_size=400),
                     st.text(alphabet="0123456789.,-e#=:TZ{}\"[] \nabcdefghijklmnopqrstuvwxyz", max_size=400)))
    def total(doc):
        for parse in parsers:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ForecastLogWarning)
                try:
                    parse(doc)
                except NriskError:
                    pass

    @FUZZ
    @given(st.lists(_canonical_row, min_size=4, max_size=40, unique_by=lambda r: r[0]))
    def profile_round_trip(rows):
        profile = _monotone_profile(rows)
        text = serialize_profile(profile)
        again = parse_profile(text)
        assert again == profile
        assert serialize_profile(again) == text

    @FUZZ
    @given(st.lists(st.tuples(st.integers(0, 4_000_000_000), st.floats(300.5, 1099.5),
                              st.sampled_from(["station", "mean_sea_level"]),
                              st.text(alphabet="abcdefghijklmnopqrstuvwxyz-_", max_size=8)),
                    max_size=30, unique_by=lambda r: r[0]),
           st.sampled_from(["csv", "jsonl"]))
    def series_round_trip(rows, form):
        samples = [PressureSample(float(t), p, k, src) for t, p, k, src in sorted(rows)]
        text = serialize_pressure_series(samples, form)
        assert parse_pressure_series(text) == samples
        assert serialize_pressure_series(parse_pressure_series(text), form) == text

    @FUZZ
    @given(st.lists(st.tuples(st.integers(0, 4_000_000_000), st.sampled_from(["LANL", "ORNL", "RCCS"]),
                              st.integers(0, 2), st.floats(900.0, 1050.0)), max_size=20))
    def log_round_trip(rows):
        records = [_record(float(t), c, b, p) for t, c, b, p in rows]
        text = "".join(r.to_json() + "\n" for r in records)
        assert parse_forecasts(text) == records

    total()
    profile_round_trip()
    series_round_trip()
    log_round_trip()
    assert main(["paper-check"]) == 0
