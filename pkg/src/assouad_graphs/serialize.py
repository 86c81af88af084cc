"""Deterministic JSON, CSV and binary persistence.

All writers produce byte-identical output for identical inputs: keys are
sorted, floats are written with ``repr`` (shortest round-trip form) and no
timestamps are embedded.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import struct
from pathlib import Path

import numpy as np

from .funcspace import SampledFunction

MAGIC = b"ASLB1"
_HEAD = struct.Struct("<dddQI")


def to_jsonable(obj):
    """Plain JSON structure; non-finite floats become the strings
    ``"inf"``, ``"-inf"`` and ``"nan"``."""
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)
                if not callable(getattr(obj, f.name))}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps(obj), encoding="utf-8")
    return path


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    return str(v)


def csv_text(header, rows, meta=None) -> str:
    """CSV with optional ``# key=value`` comment lines before the header."""
    buf = io.StringIO()
    for k, v in sorted((meta or {}).items()):
        buf.write(f"# {k}={json.dumps(to_jsonable(v), sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows, meta=None) -> Path:
    path = Path(path)
    path.write_text(csv_text(header, rows, meta), encoding="utf-8")
    return path


def read_csv(path):
    """Return ``(meta, header, rows)`` with cells left as strings."""
    meta, lines = {}, []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("# "):
            k, _, v = line[2:].partition("=")
            meta[k] = json.loads(v)
        else:
            lines.append(line)
    reader = csv.reader(lines)
    header = next(reader)
    return meta, header, [row for row in reader]


# -- sampled functions ----------------------------------------------------------

def sampled_to_csv(f: SampledFunction, path) -> Path:
    meta = {"lo": f.lo, "hi": f.hi, "step": f.step, "n": f.n, "meta": f.meta}
    return write_csv(path, ["t", "value"], zip(f.t.tolist(), f.values.tolist()), meta)


def sampled_from_csv(path) -> SampledFunction:
    meta, header, rows = read_csv(path)
    if header != ["t", "value"]:
        raise ValueError(f"unexpected header {header}")
    values = np.array([float(r[1]) for r in rows])
    return SampledFunction(float(meta["lo"]), float(meta["hi"]), float(meta["step"]), values,
                           meta.get("meta", {}))


def sampled_to_bytes(f: SampledFunction) -> bytes:
    """``ASLB1`` magic, then lo, hi, step, n and the length of a JSON meta
    block, the block itself, and ``n`` little-endian doubles."""
    info = json.dumps(to_jsonable(f.meta), sort_keys=True).encode("utf-8")
    return (MAGIC + _HEAD.pack(f.lo, f.hi, f.step, f.n, len(info)) + info
            + np.asarray(f.values, dtype="<f8").tobytes())


def sampled_from_bytes(data: bytes) -> SampledFunction:
    if data[:len(MAGIC)] != MAGIC:
        raise ValueError("not an ASLB1 stream")
    off = len(MAGIC)
    lo, hi, step, n, k = _HEAD.unpack_from(data, off)
    off += _HEAD.size
    meta = json.loads(data[off:off + k].decode("utf-8"))
    off += k
    if len(data) - off != 8 * n:
        raise ValueError(f"expected {n} samples, found {(len(data) - off) / 8}")
    values = np.frombuffer(data, dtype="<f8", count=n, offset=off).astype(float)
    return SampledFunction(lo, hi, step, values, meta)


def write_binary(f: SampledFunction, path) -> Path:
    path = Path(path)
    path.write_bytes(sampled_to_bytes(f))
    return path


def read_binary(path) -> SampledFunction:
    return sampled_from_bytes(Path(path).read_bytes())
