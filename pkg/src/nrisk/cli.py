"""Command-line interface.

Exit codes: 0 on success, 1 on domain errors (one line on stderr), 2 on
usage errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from typing import Sequence

from . import __version__
from .atmosphere import fit_linsley, monthly_average
from .barometric import fit_beta, predict_flux
from .catalog import Catalog, EnergyBand, load_catalog
from .errors import NriskError, ParseError, ValidationError
from .ingest import parse_profile
from .papercheck import format_report, run_paper_check
from .reliability import (
    DeviceSensitivity,
    ErrorKind,
    K20X_SDC,
    checkpoint_interval,
    load_devices,
    risk_report,
)
from .views import jsonable, site_view

log = logging.getLogger("nrisk")


def _flux(x: float) -> str:
    return f"{x:.4g}"


def _pct(x: float) -> str:
    return f"{100 * x:+.2f}%"


def _read(path: str) -> bytes:
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise NriskError(f"cannot read {path}: {exc.strerror or exc}") from None


def _emit(args, payload, text: str) -> None:
    if args.format == "json":
        print(json.dumps(jsonable(payload), indent=2, ensure_ascii=False))
    else:
        print(text)


def _table(rows: list[list[str]], header: list[str]) -> str:
    widths = [max(len(str(r[i])) for r in [header] + rows) for i in range(len(header))]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    out = [fmt.format(*header), fmt.format(*("-" * w for w in widths))]
    out.extend(fmt.format(*r) for r in rows)
    return "\n".join(out)


def _catalog(args) -> Catalog:
    return load_catalog(args.catalog)


def cmd_sites(args) -> int:
    catalog = _catalog(args)
    if args.code:
        site = catalog.get(args.code)
        lines = [
            f"{site.code}  {site.name} ({site.country})",
            f"altitude            {site.altitude:g} m",
            f"location            {site.latitude:g}, {site.longitude:g}",
            f"reference pressure  {site.ref_pressure:g} hPa",
        ]
        for b in site.bands:
            lines.append(f"band {int(b.band)} ({b.band.label}): xi = {_flux(b.ref_flux)} m^-2 h^-1, beta = {b.beta:.3g} /hPa")
        _emit(args, site_view(site), "\n".join(lines))
        return 0
    rows = [
        [s.code, f"{s.altitude:g}", f"{s.ref_pressure:g}", _flux(s.band(0).ref_flux), f"{s.band(0).beta:.3g}", s.name]
        for s in catalog
    ]
    text = _table(rows, ["code", "alt_m", "P_ref_hPa", "xi0", "beta0", "name"])
    text += f"\n{len(catalog)} sites, catalog {catalog.version}"
    _emit(args, [site_view(s) for s in catalog], text)
    return 0


def cmd_flux(args) -> int:
    site = _catalog(args).get(args.site)
    pred = predict_flux(site, args.band, args.pressure)
    lines = [
        f"site      {pred.site_code}, band {int(pred.band)} ({pred.band.label})",
        f"pressure  {pred.pressure:g} hPa (dP = {pred.delta_p:+g} hPa)",
        f"zeta      {_pct(pred.zeta)}",
        f"flux      {_flux(pred.flux)} m^-2 h^-1",
    ]
    if pred.extrapolation_flag:
        lines.append("warning   |dP| > 20 hPa, outside the fitted range")
    _emit(args, pred, "\n".join(lines))
    return 0


def _devices(args) -> list[DeviceSensitivity]:
    if args.devices:
        return load_devices(args.devices)
    if args.sigma is not None:
        return [DeviceSensitivity("custom", ErrorKind.parse(args.error_kind), args.sigma, 0.0, "command line")]
    return [K20X_SDC]


def cmd_risk(args) -> int:
    catalog = _catalog(args)
    report = risk_report(
        catalog.get(args.site),
        args.pressure,
        band=args.band,
        devices=_devices(args),
        fleet_size=args.fleet,
        checkpoint_cost=args.ckpt_cost,
        catalog_version=catalog.version,
    )
    lines = [
        f"site {report.site_code}, band {report.band}, {report.pressure:g} hPa (dP = {report.delta_p:+g} hPa)",
        f"flux        {_flux(report.flux)} m^-2 h^-1",
        f"psi         {_pct(report.psi)}",
    ]
    for d in report.devices:
        lines.append(f"{d.device_name} {d.error_kind}: FIT {d.fit:.0f}, MTBF {d.mtbf:.4g} h")
    lines.append(f"total FIT   {report.fit:.0f}")
    lines.append(f"MTBF        {report.mtbf:.4g} h per device")
    if report.fleet_size > 1:
        lines.append(f"fleet MTBF  {report.fleet_mtbf:.4g} h for {report.fleet_size} devices")
    if report.checkpoint_interval is not None:
        lines.append(f"checkpoint  every {report.checkpoint_interval:.0f} s (cost {report.checkpoint_cost:g} s)")
    lines.extend(f"note: {a}" for a in report.annotations)
    _emit(args, report, "\n".join(lines))
    return 0


def cmd_checkpoint(args) -> int:
    interval = checkpoint_interval(args.mtbf, args.cost)
    payload = {"mtbf_hours": args.mtbf, "checkpoint_cost": args.cost, "checkpoint_interval": interval}
    _emit(args, payload, f"checkpoint every {interval:.0f} s ({interval / 3600:.2f} h)")
    return 0


def cmd_fit_profile(args) -> int:
    profiles = [parse_profile(_read(p)) for p in args.profiles]
    profile = profiles[0] if len(profiles) == 1 else monthly_average(profiles)
    result = fit_linsley(profile)
    atm = result.atmosphere
    payload = {
        "label": profile.label,
        "samples": len(profile.altitudes),
        "a": atm.a,
        "b": atm.b,
        "c": atm.c,
        "upper_density": atm.upper_density,
        "boundaries": atm.boundaries,
        "top": atm.top,
        "rms": result.rms,
        "extrapolated": result.extrapolated,
        "ground_pressure": atm.pressure(0.0),
    }
    lines = [f"profile {profile.label or '(no metadata)'}: {len(profile.altitudes)} samples"]
    lo = 0.0
    for i, hi in enumerate(list(atm.boundaries) + [atm.top]):
        if i < 4:
            lines.append(f"layer {i + 1} [{lo / 1000:g}, {hi / 1000:g}) km: a={atm.a[i]:.6g} b={atm.b[i]:.6g} "
                         f"c={atm.c[i]:.6g} rms={result.rms[i]:.3g}")
        else:
            lines.append(f"layer 5 [{lo / 1000:g}, {hi / 1000:g}] km: density={atm.upper_density:.3g} g/cm^3")
        lo = hi
    lines.append(f"ground pressure {atm.pressure(0.0):.2f} hPa")
    if args.altitude is not None:
        p = atm.pressure(args.altitude)
        payload["altitude"] = args.altitude
        payload["pressure"] = p
        lines.append(f"pressure at {args.altitude:g} m: {p:.2f} hPa")
    lines.extend(f"note: {e}" for e in result.extrapolated)
    _emit(args, payload, "\n".join(lines))
    return 0


def parse_pairs(document: bytes | str) -> list[tuple[float, float]]:
    """Rows of ``pressure_hpa,flux`` with an optional header line."""
    text = document.decode("utf-8", "replace") if isinstance(document, bytes) else document
    out = []
    for n, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or row[0].lstrip().startswith("#"):
            continue
        if n == 1 and row[0].strip().lower().startswith("pressure"):
            continue
        if len(row) < 2:
            raise ParseError("expected pressure_hpa,flux", line=n)
        try:
            out.append((float(row[0]), float(row[1])))
        except ValueError:
            raise ParseError("not a number", line=n) from None
    if not out:
        raise ValidationError("no data rows")
    return out


def cmd_fit_beta(args) -> int:
    result = fit_beta(parse_pairs(_read(args.series)))
    lines = [
        f"beta          {result.beta:.4g} /hPa",
        f"ref pressure  {result.ref_pressure:.2f} hPa",
        f"ref flux      {_flux(result.ref_flux)}",
        f"rms residual  {result.residual:.3g} over {result.n} points",
    ]
    _emit(args, result, "\n".join(lines))
    return 0


def cmd_paper_check(args) -> int:
    results = run_paper_check(_catalog(args))
    _emit(args, [r.as_dict() for r in results], format_report(results))
    return 0 if all(r.passed for r in results) else 1


def cmd_serve(args) -> int:
    import uvicorn

    from .ingest import ForecastLog, HttpWeatherClient
    from .service import PressurePoller, create_app

    catalog = _catalog(args)
    poller = None
    if args.poll:
        codes = [catalog.get(c).code for c in args.poll]
        forecast_log = ForecastLog(args.log) if args.log else None
        poller = PressurePoller(catalog, HttpWeatherClient(), codes, forecast_log, interval=args.interval)
        poller.start()
    try:
        uvicorn.run(create_app(catalog, poller), host=args.host, port=args.port, log_level="info")
    finally:
        if poller:
            poller.stop()
    return 0


def _band(value: str) -> EnergyBand:
    try:
        return EnergyBand.parse(value)
    except ValidationError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--catalog", metavar="PATH", help="site catalog CSV (default: shipped catalog)")
    common.add_argument("--format", choices=("table", "json"), default="table")

    parser = argparse.ArgumentParser(
        prog="nrisk", description="Atmospheric-pressure driven neutron flux and soft-error risk."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", metavar="VERB")
    sub.required = True

    p = sub.add_parser("sites", parents=[common], help="list sites or show one")
    p.add_argument("--code")
    p.set_defaults(func=cmd_sites)

    p = sub.add_parser("flux", parents=[common], help="predict neutron flux at a station pressure")
    p.add_argument("--site", required=True)
    p.add_argument("--pressure", type=float, required=True, help="station pressure, hPa")
    p.add_argument("--band", type=_band, default=EnergyBand.FULL)
    p.set_defaults(func=cmd_flux)

    p = sub.add_parser("risk", parents=[common], help="FIT, MTBF and checkpoint advice")
    p.add_argument("--site", required=True)
    p.add_argument("--pressure", type=float, required=True, help="station pressure, hPa")
    p.add_argument("--band", type=_band, default=EnergyBand.MID)
    p.add_argument("--sigma", type=float, help="cross-section, cm^2 (default: K20X SDC)")
    p.add_argument("--error-kind", default="SDC")
    p.add_argument("--devices", metavar="PATH", help="device-sensitivity CSV")
    p.add_argument("--fleet", type=int, default=1)
    p.add_argument("--ckpt-cost", type=float, help="checkpoint cost, s")
    p.set_defaults(func=cmd_risk)

    p = sub.add_parser("checkpoint", parents=[common], help="Young/Daly checkpoint interval")
    p.add_argument("--mtbf", type=float, required=True, help="MTBF, hours")
    p.add_argument("--cost", type=float, required=True, help="checkpoint cost, s")
    p.set_defaults(func=cmd_checkpoint)

    p = sub.add_parser("fit-profile", parents=[common], help="fit a layered atmosphere to density profiles")
    p.add_argument("profiles", nargs="+", metavar="PROFILE")
    p.add_argument("--altitude", type=float, help="also report pressure at this altitude, m")
    p.set_defaults(func=cmd_fit_profile)

    p = sub.add_parser("fit-beta", parents=[common], help="fit a barometric coefficient")
    p.add_argument("series", metavar="CSV", help="rows of pressure_hpa,flux")
    p.set_defaults(func=cmd_fit_beta)

    p = sub.add_parser("paper-check", parents=[common], help="rerun the published worked examples")
    p.set_defaults(func=cmd_paper_check)

    p = sub.add_parser("serve", parents=[common], help="run the read-only HTTP API")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--poll", action="append", metavar="CODE", help="poll live pressure for this site")
    p.add_argument("--interval", type=float, default=900.0, help="polling interval, s")
    p.add_argument("--log", metavar="PATH", help="forecast log (JSON lines)")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except NriskError as exc:
        print(f"nrisk: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
