"""Manifest, CSV/JSON-lines records and summary output."""
from __future__ import annotations

import csv
import json
import math
import platform
from pathlib import Path

import numpy as np
import scipy

from .. import __version__


def manifest_for(cfg, gates: dict | None = None, extra: dict | None = None) -> dict:
    out = {
        "tool": "fpphyp",
        "version": __version__,
        "experiment": cfg.kind,
        "seed": cfg.seed,
        "config_sha256": cfg.config_hash,
        "config": cfg.to_dict(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "gates": gates or {},
    }
    if extra:
        out.update(extra)
    return out


def _clean(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.generic):
        return _clean(v.item())
    return v


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, float):
        return repr(v)
    return v


def write_records(path: Path, fields: list[str], records: list[dict]) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fields)
        for r in records:
            w.writerow([_cell(r.get(f)) for f in fields])


def write_jsonl(path: Path, fields: list[str], records: list[dict]) -> None:
    with path.open("w") as fh:
        for r in records:
            fh.write(json.dumps(_clean({f: r.get(f) for f in fields})) + "\n")


def read_records(path: Path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))
