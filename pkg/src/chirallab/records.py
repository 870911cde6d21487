"""CSV and JSON writers with a fixed, reproducible byte format.

Floats are written with 17 significant digits, columns and rows in the
order given, and every file starts with ``#``-prefixed metadata lines.
"""
from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def content_hash(text: str) -> str:
    """Git-style blob hash of ``text``."""
    data = text.encode()
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def write_csv(path, columns: Sequence[str], rows: Iterable[Sequence],
              meta: Optional[Mapping[str, object]] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# {k}: {fmt(v)}" for k, v in (meta or {}).items()]
    lines.append(",".join(columns))
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")
    return path


def read_csv(path) -> tuple[dict, list[str], list[list[str]]]:
    """Inverse of :func:`write_csv` (values stay strings)."""
    meta, header, rows = {}, None, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition(": ")
            meta[key] = val
        elif header is None:
            header = line.split(",")
        elif line:
            rows.append(line.split(","))
    return meta, header or [], rows


def _jsonable(obj):
    if isinstance(obj, Mapping):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if hasattr(obj, "value") and hasattr(obj, "name"):  # enums
        return obj.value
    return obj


def write_json(path, payload: Mapping, meta: Optional[Mapping[str, object]] = None) -> Path:
    """JSON document; ``meta`` goes under a leading ``"#"`` key."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {"#": _jsonable(dict(meta or {}))} if meta else {}
    doc.update(_jsonable(dict(payload)))
    path.write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n")
    return path
