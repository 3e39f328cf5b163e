"""Grid types, metric graphs built from vector fields, and connected relabeling.

A vector field is an ``(H, W, D)`` float array, a label map an ``(H, W)``
non-negative integer array with 0 reserved for background. Edge graphs store
one dense ``(H, W)`` plane per offset; the value at ``(y, x)`` belongs to the
edge between pixel ``(y, x)`` and pixel ``(y + dy, x + dx)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Sequence

import numpy as np

Offset = tuple[int, int]

NN4: tuple[Offset, ...] = ((0, 1), (1, 0))
NN8: tuple[Offset, ...] = ((0, 1), (1, 0), (1, 1), (1, -1))


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based 64-bit generator used for every seeded draw in the package."""
    return np.random.Generator(np.random.Philox(seed))


def nearest_neighbor_offsets(connectivity: int = 4) -> tuple[Offset, ...]:
    if connectivity == 4:
        return NN4
    if connectivity == 8:
        return NN8
    raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")


def is_canonical(offset: Offset) -> bool:
    dy, dx = offset
    return dy > 0 or (dy == 0 and dx > 0)


def as_vector_field(field: np.ndarray) -> np.ndarray:
    arr = np.asarray(field, dtype=np.float64)
    if arr.ndim != 3 or min(arr.shape) < 1:
        raise ValueError(f"vector field must have shape (H, W, D), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("vector field contains non-finite values")
    return arr


def as_label_map(labels: np.ndarray) -> np.ndarray:
    arr = np.asarray(labels)
    if arr.ndim != 2 or min(arr.shape) < 1:
        raise ValueError(f"label map must have shape (H, W), got {arr.shape}")
    if arr.dtype.kind not in "iu":
        if not np.all(np.mod(arr, 1) == 0):
            raise ValueError("label map must hold integers")
    if np.any(arr < 0):
        raise ValueError("label map must be non-negative")
    return arr.astype(np.int64)


def validate_offsets(offsets: Sequence[Offset], shape: tuple[int, int]) -> list[Offset]:
    offsets = [(int(dy), int(dx)) for dy, dx in offsets]
    if not offsets:
        raise ValueError("offset list is empty")
    if len(set(offsets)) != len(offsets):
        raise ValueError("duplicate offsets")
    h, w = shape
    for off in offsets:
        if not is_canonical(off):
            raise ValueError(f"offset {off} is not in canonical orientation")
        if abs(off[0]) >= h or abs(off[1]) >= w:
            raise ValueError(f"offset {off} does not fit a {h}x{w} grid")
    return offsets


def _source_slices(offset: Offset, shape: tuple[int, int]):
    """Slices selecting the in-bounds sources and their partners for one offset."""
    dy, dx = offset
    h, w = shape
    src = (slice(max(0, -dy), h - max(0, dy)), slice(max(0, -dx), w - max(0, dx)))
    dst = (slice(max(0, dy), h - max(0, -dy)), slice(max(0, dx), w - max(0, -dx)))
    return src, dst


def bounds_mask(offsets: Sequence[Offset], shape: tuple[int, int]) -> np.ndarray:
    mask = np.zeros((len(offsets),) + tuple(shape), dtype=bool)
    for k, off in enumerate(offsets):
        src, _ = _source_slices(off, shape)
        mask[k][src] = True
    return mask


@dataclass(frozen=True)
class _GridGraph:
    offsets: list[Offset]
    channels: np.ndarray
    mask: np.ndarray = dc_field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        offsets = [(int(dy), int(dx)) for dy, dx in self.offsets]
        channels = np.asarray(self.channels, dtype=np.float64)
        if channels.ndim != 3 or channels.shape[0] != len(offsets):
            raise ValueError("channels must have shape (num_offsets, H, W)")
        offsets = validate_offsets(offsets, channels.shape[1:])
        inb = bounds_mask(offsets, channels.shape[1:])
        mask = inb if self.mask is None else np.asarray(self.mask, dtype=bool) & inb
        if mask.shape != channels.shape:
            raise ValueError("mask shape does not match channels")
        if not np.all(np.isfinite(channels[mask])):
            raise ValueError("graph contains non-finite edge weights")
        channels = np.where(mask, channels, 0.0)
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "channels", channels)
        object.__setattr__(self, "mask", mask)

    @property
    def shape(self) -> tuple[int, int]:
        return self.channels.shape[1], self.channels.shape[2]

    def channel(self, offset: Offset) -> tuple[np.ndarray, np.ndarray]:
        k = self.offsets.index(tuple(offset))
        return self.channels[k], self.mask[k]

    def has_offsets(self, offsets: Sequence[Offset]) -> bool:
        return all(tuple(o) in self.offsets for o in offsets)


@dataclass(frozen=True)
class MetricGraph(_GridGraph):
    """Non-negative distances on grid edges."""

    kind = "metric"

    def __post_init__(self):
        super().__post_init__()
        if np.any(self.channels < 0):
            raise ValueError("distances must be non-negative")


@dataclass(frozen=True)
class AffinityGraph(_GridGraph):
    """Affinities in [0, 1] on grid edges."""

    kind = "affinity"

    def __post_init__(self):
        super().__post_init__()
        vals = self.channels[self.mask]
        if np.any(vals < 0) or np.any(vals > 1):
            raise ValueError("affinities must lie in [0, 1]")


def build_metric_graph(field: np.ndarray, offsets: Sequence[Offset] = NN4) -> MetricGraph:
    """L1 distances between the vectors at each pixel and its offset partners."""
    field = as_vector_field(field)
    shape = field.shape[:2]
    offsets = validate_offsets(offsets, shape)
    channels = np.zeros((len(offsets),) + shape)
    for k, off in enumerate(offsets):
        src, dst = _source_slices(off, shape)
        channels[k][src] = np.abs(field[src] - field[dst]).sum(axis=-1)
    return MetricGraph(offsets, channels)


def metric_to_affinity(graph: MetricGraph) -> AffinityGraph:
    return AffinityGraph(list(graph.offsets), np.where(graph.mask, np.exp(-graph.channels), 0.0), graph.mask.copy())


def affinity_to_metric(graph: AffinityGraph) -> MetricGraph:
    """Inverse of :func:`metric_to_affinity`; zero affinities become infinite-free large distances."""
    with np.errstate(divide="ignore"):
        d = -np.log(np.where(graph.mask, graph.channels, 1.0))
    d = np.minimum(d, np.finfo(np.float64).max)
    return MetricGraph(list(graph.offsets), np.where(graph.mask, d, 0.0), graph.mask.copy())


class UnionFind:
    """Disjoint sets over ``0..n-1`` with path compression and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, a: int) -> int:
        parent = self.parent
        root = a
        while parent[root] != root:
            root = parent[root]
        while parent[a] != root:
            parent[a], a = root, parent[a]
        return root

    def union(self, a: int, b: int) -> int:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return ra


def label_components(shape: tuple[int, int], joined: Sequence[tuple[Offset, np.ndarray]],
                     active: np.ndarray | None = None) -> np.ndarray:
    """Union pixels along joined edges and number the sets 1..K in scan order.

    ``joined`` pairs each offset with a boolean ``(H, W)`` plane marking which
    edges to merge. Pixels outside ``active`` get label 0.
    """
    h, w = shape
    uf = UnionFind(h * w)
    for (dy, dx), plane in joined:
        ys, xs = np.nonzero(plane)
        a = (ys * w + xs).tolist()
        b = ((ys + dy) * w + xs + dx).tolist()
        for i, j in zip(a, b):
            uf.union(i, j)
    act = np.ones(h * w, dtype=bool) if active is None else np.asarray(active, dtype=bool).ravel()
    out = np.zeros(h * w, dtype=np.int64)
    ids: dict[int, int] = {}
    find = uf.find
    for p in np.flatnonzero(act).tolist():
        r = find(p)
        lab = ids.get(r)
        if lab is None:
            lab = ids[r] = len(ids) + 1
        out[p] = lab
    return out.reshape(h, w)


def relabel_connected(labels: np.ndarray, connectivity: int = 4) -> tuple[np.ndarray, dict[int, int]]:
    """Split every positive label into its connected pieces.

    Returns the new label map (pieces numbered 1..K in scan order, background
    kept at 0) and a mapping from each new label to the original one.
    """
    labels = as_label_map(labels)
    shape = labels.shape
    joined = []
    for off in nearest_neighbor_offsets(connectivity):
        src, dst = _source_slices(off, shape)
        plane = np.zeros(shape, dtype=bool)
        plane[src] = (labels[src] == labels[dst]) & (labels[src] > 0)
        joined.append((off, plane))
    split = label_components(shape, joined, active=labels > 0)
    mapping: dict[int, int] = {}
    flat_new, flat_old = split.ravel(), labels.ravel()
    _, first = np.unique(flat_new, return_index=True)
    for idx in first:
        if flat_new[idx] > 0:
            mapping[int(flat_new[idx])] = int(flat_old[idx])
    return split, mapping
