"""NPY/JSON file formats.

Vector fields are float32 ``(H, W, D)``, label maps uint32 ``(H, W)``, graphs
float32 ``(num_offsets, H, W)`` plus a ``<name>.json`` sidecar holding the
graph kind and its offsets. Graph masks are implied by the grid bounds.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .core import AffinityGraph, MetricGraph


class FormatError(ValueError):
    """A file exists but its contents have the wrong shape, dtype or values."""


def _load(path: str | Path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    try:
        return np.load(path, allow_pickle=False)
    except ValueError as exc:
        raise FormatError(f"{path}: not a readable NPY array ({exc})") from exc


def save_field(path: str | Path, field: np.ndarray) -> None:
    np.save(path, np.ascontiguousarray(field, dtype=np.float32))


def load_field(path: str | Path) -> np.ndarray:
    arr = _load(path)
    if arr.dtype.kind != "f" or arr.ndim != 3:
        raise FormatError(f"{path}: expected a float (H, W, D) array, got {arr.dtype} {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise FormatError(f"{path}: non-finite values")
    return arr.astype(np.float64)


def save_labels(path: str | Path, labels: np.ndarray) -> None:
    np.save(path, np.ascontiguousarray(labels, dtype=np.uint32))


def load_labels(path: str | Path) -> np.ndarray:
    arr = _load(path)
    if arr.dtype.kind not in "iu" or arr.ndim != 2:
        raise FormatError(f"{path}: expected an integer (H, W) array, got {arr.dtype} {arr.shape}")
    if np.any(arr < 0):
        raise FormatError(f"{path}: negative labels")
    return arr.astype(np.int64)


def sidecar_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".json")


def save_graph(path: str | Path, graph: MetricGraph | AffinityGraph) -> None:
    np.save(path, np.ascontiguousarray(graph.channels, dtype=np.float32))
    meta = {
        "kind": graph.kind,
        "height": graph.shape[0],
        "width": graph.shape[1],
        "offsets": [list(o) for o in graph.offsets],
    }
    sidecar_path(path).write_text(json.dumps(meta, indent=2) + "\n")


def load_graph(path: str | Path) -> MetricGraph | AffinityGraph:
    arr = _load(path)
    side = sidecar_path(path)
    if not side.is_file():
        raise FileNotFoundError(f"no such file: {side}")
    try:
        meta = json.loads(side.read_text())
        offsets = [tuple(o) for o in meta["offsets"]]
        kind = meta["kind"]
    except (ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"{side}: malformed graph sidecar ({exc})") from exc
    if arr.dtype.kind != "f" or arr.ndim != 3 or arr.shape[0] != len(offsets):
        raise FormatError(f"{path}: expected float (num_offsets={len(offsets)}, H, W), got {arr.dtype} {arr.shape}")
    if (meta.get("height"), meta.get("width")) != arr.shape[1:]:
        raise FormatError(f"{path}: array shape {arr.shape[1:]} disagrees with sidecar")
    cls = {"metric": MetricGraph, "affinity": AffinityGraph}.get(kind)
    if cls is None:
        raise FormatError(f"{side}: unknown graph kind {kind!r}")
    try:
        return cls(offsets, arr.astype(np.float64))
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def write_json(path: str | Path, payload) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
