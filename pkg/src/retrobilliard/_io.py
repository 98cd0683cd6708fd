"""Deterministic CSV/JSON writers shared by the library and the CLI."""

from __future__ import annotations

import json
import math
import os
from datetime import datetime, timezone
from typing import Iterable, Sequence

from .errors import OutputError


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def config_line(config) -> str:
    return "# config=" + json.dumps(config, sort_keys=True, separators=(",", ":"), default=_jsonable)


def _jsonable(x):
    if hasattr(x, "tolist"):
        return x.tolist()
    if hasattr(x, "_asdict"):
        return x._asdict()
    return str(x)


def clean(obj):
    """Make ``obj`` JSON friendly: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if hasattr(obj, "item") and not hasattr(obj, "__len__"):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], config) -> None:
    try:
        with open(path, "w", newline="\n", encoding="utf-8") as f:
            f.write(config_line(clean(config)) + "\n")
            f.write(",".join(header) + "\n")
            for r in rows:
                f.write(",".join(_fmt(x) for x in r) + "\n")
    except OSError as e:
        raise OutputError(f"cannot write {path}: {e}") from e


def write_json(path, payload: dict, config, timestamp: bool = True) -> None:
    doc = dict(clean(payload))
    doc["config"] = clean(config)
    if timestamp:
        doc["meta"] = {"written": datetime.now(timezone.utc).isoformat(timespec="seconds")}
    try:
        with open(path, "w", newline="\n", encoding="utf-8") as f:
            json.dump(doc, f, sort_keys=True, indent=2)
            f.write("\n")
    except OSError as e:
        raise OutputError(f"cannot write {path}: {e}") from e


def ensure_dir(path) -> None:
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as e:
        raise OutputError(f"cannot create {path}: {e}") from e
