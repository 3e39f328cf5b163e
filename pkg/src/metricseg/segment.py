"""Segmentations from graphs and vector fields."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    AffinityGraph,
    MetricGraph,
    as_label_map,
    as_vector_field,
    label_components,
    nearest_neighbor_offsets,
)
from .loss import object_means


@dataclass(frozen=True)
class SegmentationConfig:
    cc_threshold: float = 1.5
    affinity_threshold: float = 0.5
    min_size: int = 1
    max_dilation: int = 10
    connectivity: int = 4

    def __post_init__(self):
        if not self.cc_threshold > 0:
            raise ValueError("cc_threshold must be positive")
        if not 0 < self.affinity_threshold < 1:
            raise ValueError("affinity_threshold must lie in (0, 1)")
        if self.max_dilation < 0:
            raise ValueError("max_dilation must be non-negative")
        if self.min_size < 0:
            raise ValueError("min_size must be non-negative")
        nearest_neighbor_offsets(self.connectivity)


def connected_components(graph: MetricGraph | AffinityGraph,
                         config: SegmentationConfig = SegmentationConfig()) -> np.ndarray:
    """Join nearest-neighbor pixels whose edge passes the threshold.

    Metric graphs join on ``distance < cc_threshold``, affinity graphs on
    ``affinity > affinity_threshold``. Longer-range channels are ignored.
    """
    offsets = nearest_neighbor_offsets(config.connectivity)
    if not graph.has_offsets(offsets):
        raise ValueError(f"graph lacks nearest-neighbor offsets {list(offsets)}")
    joined = []
    for off in offsets:
        values, valid = graph.channel(off)
        if isinstance(graph, MetricGraph):
            passes = values < config.cc_threshold
        elif isinstance(graph, AffinityGraph):
            passes = values > config.affinity_threshold
        else:
            raise TypeError(f"unsupported graph type {type(graph).__name__}")
        joined.append((off, valid & passes))
    return label_components(graph.shape, joined)


def _shift(a: np.ndarray, dy: int, dx: int, fill: int) -> np.ndarray:
    """``out[y, x] = a[y + dy, x + dx]`` with ``fill`` outside the grid."""
    h, w = a.shape
    out = np.full_like(a, fill)
    out[max(0, -dy):h - max(0, dy), max(0, -dx):w - max(0, dx)] = \
        a[max(0, dy):h - max(0, -dy), max(0, dx):w - max(0, -dx)]
    return out


def remove_small(labels: np.ndarray, min_size: int = 1) -> np.ndarray:
    labels = as_label_map(labels)
    counts = np.bincount(labels.ravel())
    small = counts <= min_size
    small[0] = False
    return np.where(small[labels], 0, labels)


def dilate(labels: np.ndarray, rounds: int = 10) -> np.ndarray:
    """Grow positive labels into background, one 4-neighbor ring per round.

    A background pixel touched by several labels in the same round takes the
    smallest. Positive pixels are never overwritten.
    """
    labels = as_label_map(labels)
    big = np.iinfo(np.int64).max
    for _ in range(rounds):
        bg = labels == 0
        if not bg.any():
            break
        src = np.where(labels > 0, labels, big)
        best = np.minimum.reduce([_shift(src, dy, dx, big) for dy, dx in ((0, 1), (0, -1), (1, 0), (-1, 0))])
        grow = bg & (best < big)
        if not grow.any():
            break
        labels = np.where(grow, best, labels)
    return labels


def postprocess(labels: np.ndarray, config: SegmentationConfig = SegmentationConfig()) -> np.ndarray:
    """Drop segments of size <= ``min_size`` to background, then dilate."""
    return dilate(remove_small(labels, config.min_size), config.max_dilation)


def seed_segment(field: np.ndarray, gt: np.ndarray) -> np.ndarray:
    """Assign every foreground pixel the gt label with the L1-nearest object mean.

    Means come from the ground-truth masks, so this is an upper bound on
    seed-based clustering. Ties go to the smallest label; gt background stays 0.
    """
    field = as_vector_field(field)
    gt = as_label_map(gt)
    ids, _, means = object_means(field, gt)
    fg = gt > 0
    vecs = field[fg]
    dist = np.stack([np.abs(vecs - mu).sum(-1) for mu in means], axis=1)
    out = np.zeros_like(gt)
    out[fg] = ids[np.argmin(dist, axis=1)]
    return out
