"""Canonical JSON and hashing.

Canonical form: UTF-8, sorted keys, no insignificant whitespace, shortest
round-trip float repr (Python's default). Non-finite floats are rejected;
callers encode infinities with :data:`POS_INF` / :data:`NEG_INF`.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import Any

import numpy as np

POS_INF = "+inf"
NEG_INF = "-inf"


def to_jsonable(obj: Any) -> Any:
    """Recursively convert numpy scalars/arrays, tuples and mappings to plain JSON types."""
    if isinstance(obj, dict) or hasattr(obj, "keys") and hasattr(obj, "__getitem__"):
        return {str(k): to_jsonable(obj[k]) for k in obj.keys()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if hasattr(obj, "to_json"):
        return to_jsonable(obj.to_json())
    return obj


def dumps(obj: Any) -> str:
    return json.dumps(
        to_jsonable(obj),
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
        allow_nan=False,
    )


def dump_bytes(obj: Any) -> bytes:
    return dumps(obj).encode("utf-8")


def write(path: str | Path, obj: Any) -> None:
    Path(path).write_bytes(dump_bytes(obj) + b"\n")


def read(path: str | Path) -> Any:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def digest(obj: Any) -> str:
    return sha256_hex(dump_bytes(obj))


def encode_real(x: float) -> float | str:
    """Map a real to a JSON-safe leaf, using sentinels for infinities."""
    if math.isinf(x):
        return POS_INF if x > 0 else NEG_INF
    return float(x)


def decode_real(x: float | str) -> float:
    if x == POS_INF:
        return math.inf
    if x == NEG_INF:
        return -math.inf
    return float(x)


def hash_directory(root: str | Path) -> str:
    """Hash every file under ``root`` (sorted relative paths) into one digest."""
    root = Path(root)
    h = hashlib.sha256()
    for p in sorted(q for q in root.rglob("*") if q.is_file()):
        h.update(p.relative_to(root).as_posix().encode("utf-8"))
        h.update(b"\0")
        h.update(hashlib.sha256(p.read_bytes()).digest())
    return h.hexdigest()
