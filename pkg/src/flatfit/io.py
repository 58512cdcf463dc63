"""Point-set files and canonical JSON.

CSV: one point per line, comma-separated decimals, an optional first line
starting with ``#``.  JSON: ``{"points": [[...], ...]}``.  JSON output
writes every float with 17 significant digits so it reloads bit-exactly.
"""
from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .errors import ParseError
from .geometry import Flat

SCHEMA = "flatfit/1"


def parse_csv(text: str) -> np.ndarray:
    rows = []
    width = None
    for lineno, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            if rows or lineno != 1:
                raise ParseError(f"line {lineno}: header allowed only on the first line")
            continue
        try:
            row = [float(tok) for tok in s.split(",")]
        except ValueError:
            raise ParseError(f"line {lineno}: not a comma-separated list of numbers") from None
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ParseError(f"line {lineno}: expected {width} values, found {len(row)}")
        rows.append(row)
    if not rows:
        raise ParseError("no points found")
    X = np.array(rows, dtype=float)
    if not np.all(np.isfinite(X)):
        raise ParseError("non-finite coordinate")
    return X


def parse_json(text: str) -> np.ndarray:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from None
    pts = obj.get("points") if isinstance(obj, dict) else None
    if not isinstance(pts, list) or not pts:
        raise ParseError('JSON input needs a non-empty "points" list')
    width = None
    for i, row in enumerate(pts):
        if not isinstance(row, list) or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in row):
            raise ParseError(f"point {i} is not a list of numbers")
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ParseError(f"point {i}: expected {width} values, found {len(row)}")
    X = np.array(pts, dtype=float)
    if X.shape[1] == 0 or not np.all(np.isfinite(X)):
        raise ParseError("points must be non-empty and finite")
    return X


def read_points(path) -> tuple[np.ndarray, str]:
    """Load a point file; returns ``(points, sha256 of the raw bytes)``."""
    p = Path(path)
    try:
        raw = p.read_bytes()
    except OSError as exc:
        raise ParseError(f"cannot read {p}: {exc.strerror}") from None
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError:
        raise ParseError("input is not UTF-8 text") from None
    X = parse_json(text) if p.suffix.lower() == ".json" else parse_csv(text)
    return X, hashlib.sha256(raw).hexdigest()


def format_csv(X) -> str:
    # repr gives the shortest string that round-trips
    return "".join(",".join(repr(float(v)) for v in row) + "\n" for row in np.asarray(X))


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    s = format(x, ".17g")
    # keep floats recognisable as floats
    return s if any(c in s for c in ".e") else s + ".0"


def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, (bool, np.bool_)) or obj is None:
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (list, tuple, dict, np.ndarray)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        inner = (",\n" + pad).join(_encode(v, indent, level + 1) for v in obj)
        return "[\n" + pad + inner + "\n" + end + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [json.dumps(str(k)) + ": " + _encode(v, indent, level + 1) for k, v in obj.items()]
        return "{\n" + pad + (",\n" + pad).join(items) + "\n" + end + "}"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """Deterministic JSON with 17-significant-digit floats."""
    return _encode(obj, indent, 0) + "\n"


def flat_to_dict(F: Flat) -> dict:
    return {"anchor": F.anchor, "basis": F.basis, "dim": F.dim}


def flat_from_dict(d: dict) -> Flat:
    anchor = np.asarray(d["anchor"], dtype=float)
    basis = np.asarray(d["basis"], dtype=float).reshape(-1, anchor.shape[0])
    return Flat(anchor, basis)
