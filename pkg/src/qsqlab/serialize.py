"""JSON helpers shared by the serialisable artifacts."""

from __future__ import annotations

import base64
import json
from typing import Any

import numpy as np

SCHEMA_VERSION = 1


def encode_array(arr: np.ndarray) -> dict:
    """Lossless JSON form of a float or complex array: dtype, shape and base64 bytes."""
    arr = np.ascontiguousarray(arr)
    if arr.dtype.kind == "c":
        arr = arr.astype("<c16")
    elif arr.dtype.kind in "fiub":
        arr = arr.astype("<f8")
    else:
        raise TypeError(f"unsupported dtype {arr.dtype}")
    return {
        "dtype": arr.dtype.str,
        "shape": list(arr.shape),
        "data": base64.b64encode(arr.tobytes()).decode("ascii"),
    }


def decode_array(data: dict) -> np.ndarray:
    raw = base64.b64decode(data["data"])
    return np.frombuffer(raw, dtype=np.dtype(data["dtype"])).reshape(data["shape"]).copy()


def dumps(payload: dict) -> str:
    """Serialise with the schema tag first. Floats use the shortest round-trip repr."""
    body = {"schema": SCHEMA_VERSION}
    body.update(payload)
    return json.dumps(body, indent=2, allow_nan=False, default=_default)


def _default(obj: Any):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"{type(obj).__name__} is not JSON serialisable")
