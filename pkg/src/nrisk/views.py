"""Plain-dict views of domain objects, shared by the CLI and the HTTP service."""

from __future__ import annotations

import dataclasses
from enum import Enum
from typing import Any

from .catalog import SiteRecord


def jsonable(obj: Any) -> Any:
    """Recursively turn dataclasses, enums and tuples into JSON-ready values."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    return obj


def site_view(site: SiteRecord) -> dict:
    d = jsonable(site)
    d["bands"] = [
        {"band": int(b.band), "ref_flux": b.ref_flux, "beta": b.beta, "label": b.band.label} for b in site.bands
    ]
    return d
