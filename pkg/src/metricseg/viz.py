"""PCA projection of vector fields to RGB images."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .core import as_vector_field


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    axes: np.ndarray  # (k, D), orthonormal rows, k <= 3
    eigenvalues: np.ndarray
    padded: bool = False  # fewer than 3 axes; missing channels render as constant


def fit_pca(field: np.ndarray) -> PcaModel:
    field = as_vector_field(field)
    x = field.reshape(-1, field.shape[2])
    if x.shape[0] < 3:
        raise ValueError("need at least 3 pixels to fit PCA")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / x.shape[0]
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals, kind="stable")[::-1]
    k = min(3, x.shape[1])
    vals = np.clip(vals[order[:k]], 0.0, None)
    axes = vecs[:, order[:k]].T.copy()
    # make each axis's largest-magnitude coordinate positive
    lead = np.argmax(np.abs(axes), axis=1)
    axes *= np.sign(axes[np.arange(k), lead])[:, None]
    return PcaModel(mean=mean, axes=axes, eigenvalues=vals, padded=k < 3)


def project(field: np.ndarray, model: PcaModel) -> np.ndarray:
    """Coordinates of each pixel on the model's axes, zero-padded to 3 channels."""
    field = as_vector_field(field)
    if field.shape[2] != model.mean.shape[0]:
        raise ValueError(f"field dim {field.shape[2]} does not match model dim {model.mean.shape[0]}")
    coords = (field - model.mean) @ model.axes.T
    if coords.shape[2] < 3:
        coords = np.concatenate([coords, np.zeros(coords.shape[:2] + (3 - coords.shape[2],))], axis=2)
    return coords


def rgb_from_coords(coords: np.ndarray) -> np.ndarray:
    """Rescale each channel to [0, 255] by its own min/max; flat channels map to 128."""
    out = np.empty(coords.shape, dtype=np.uint8)
    for c in range(coords.shape[2]):
        ch = coords[..., c]
        lo, hi = ch.min(), ch.max()
        if hi > lo:
            out[..., c] = np.rint((ch - lo) / (hi - lo) * 255.0).astype(np.uint8)
        else:
            out[..., c] = 128
    return out


def render_rgb(field: np.ndarray, model: PcaModel | None = None) -> np.ndarray:
    if model is None:
        model = fit_pca(field)
    return rgb_from_coords(project(field, model))


def save_png(rgb: np.ndarray, path: str | Path) -> None:
    Image.fromarray(np.asarray(rgb, dtype=np.uint8), mode="RGB").save(path, format="PNG")
