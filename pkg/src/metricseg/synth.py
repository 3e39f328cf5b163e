"""Synthetic ground truth: Voronoi label maps and within-object drift."""
from __future__ import annotations

import numpy as np

from .core import as_label_map, as_vector_field, make_rng


def voronoi_labels(height: int, width: int, num_objects: int, seed: int = 0) -> np.ndarray:
    """Label each pixel by its nearest of ``num_objects`` random sites.

    Sites are distinct pixels; distance is squared Euclidean in integers, so
    ties are exact and go to the lowest site id. Labels run 1..num_objects.
    """
    if height < 1 or width < 1:
        raise ValueError("height and width must be positive")
    if not 1 <= num_objects <= height * width:
        raise ValueError(f"num_objects must lie in [1, {height * width}]")
    sites = make_rng(seed).choice(height * width, size=num_objects, replace=False)
    sy, sx = np.divmod(sites.astype(np.int64), width)
    return nearest_site_labels(height, width, sy, sx)


def nearest_site_labels(height: int, width: int, sy, sx) -> np.ndarray:
    sy = np.asarray(sy, dtype=np.int64)
    sx = np.asarray(sx, dtype=np.int64)
    yy, xx = np.mgrid[:height, :width]
    best = np.full((height, width), np.iinfo(np.int64).max)
    out = np.zeros((height, width), dtype=np.int64)
    for k in range(len(sy)):
        d = (yy - sy[k]) ** 2 + (xx - sx[k]) ** 2
        closer = d < best
        best = np.where(closer, d, best)
        out[closer] = k + 1
    return out


def inject_drift(field: np.ndarray, labels: np.ndarray, target_label: int,
                 amplitude: float, wavelength: float, phase: float = 0.0) -> np.ndarray:
    """Add ``amplitude * sin(2*pi*(x - x0)/wavelength + phase)`` to every
    component of the vectors inside one object.

    ``x0`` is the object's leftmost column, so with zero phase the drift
    starts at zero on the object's left edge and varies along x only.
    """
    field = as_vector_field(field)
    labels = as_label_map(labels)
    if labels.shape != field.shape[:2]:
        raise ValueError("labels and field differ in shape")
    if not wavelength > 0:
        raise ValueError("wavelength must be positive")
    inside = labels == target_label
    if not inside.any():
        raise ValueError(f"label {target_label} not present")
    x0 = np.nonzero(inside.any(axis=0))[0][0]
    xs = np.arange(labels.shape[1]) - x0
    wave = amplitude * np.sin(2 * np.pi * xs / wavelength + phase)
    out = field.copy()
    out[inside] += np.broadcast_to(wave[None, :], labels.shape)[inside][:, None]
    return out
