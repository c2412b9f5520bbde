"""File formats: binary field dumps, CSV slices and JSON documents.

Field files start with one ASCII line ``"n m R h\\n"`` followed by the node
values as little-endian float64 in C order.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .obstacle import GridField, GridSpec


def write_field(path, fld: GridField) -> Path:
    spec = fld.spec
    path = Path(path)
    header = f"{spec.dim} {spec.points_per_axis} {spec.box_radius!r} {spec.h!r}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(fld.values, dtype="<f8").tobytes())
    return path


def read_field(path) -> GridField:
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").split()
        data = fh.read()
    try:
        n, m, R, h = int(header[0]), int(header[1]), float(header[2]), float(header[3])
    except (IndexError, ValueError) as exc:
        raise ValidationError(f"{path}: malformed field header") from exc
    spec = GridSpec(n, R, m)
    if not math.isclose(spec.h, h, rel_tol=1e-12):
        raise ValidationError(f"{path}: header spacing {h} disagrees with 2R/(m-1)")
    values = np.frombuffer(data, dtype="<f8")
    if values.size != m**n:
        raise ValidationError(f"{path}: expected {m**n} values, found {values.size}")
    return GridField(spec, values.reshape(spec.shape).astype(float), {"source": str(path)})


def central_slice(fld: GridField, normal_axis: int | None = None):
    """``(x, y, u)`` on the coordinate plane through the origin.

    For 3D fields the plane is orthogonal to ``normal_axis`` (default: last
    axis); 2D fields are returned whole and 1D fields with ``y = 0``.
    """
    spec = fld.spec
    ax = spec.axis
    mid = spec.points_per_axis // 2
    if spec.dim == 1:
        return ax, np.zeros_like(ax), fld.values
    if spec.dim == 2:
        plane = fld.values
    else:
        k = spec.dim - 1 if normal_axis is None else normal_axis
        plane = np.take(fld.values, mid, axis=k)
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    return X.ravel(), Y.ravel(), plane.ravel()


def write_slice_csv(path, fld: GridField, normal_axis: int | None = None) -> Path:
    x, y, u = central_slice(fld, normal_axis)
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y", "u"])
        for row in zip(x, y, u):
            w.writerow([repr(float(v)) for v in row])
    return path


def _clean(obj):
    # JSON has no NaN/inf; keep them readable as strings
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else repr(f)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, doc) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_clean(doc), indent=2, sort_keys=True) + "\n")
    return path


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())
