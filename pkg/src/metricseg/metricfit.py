"""Fit embedding vectors to an arbitrary affinity graph.

The fitted affinities ``exp(-|u_i - u_j|_1)`` come from L1 distances, so
they are consistent with a metric whatever the target looked like. Fitting
is least squares over the target's valid edges, optimized with Adam.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field as dc_field
from typing import Sequence

import numpy as np

from .core import (
    AffinityGraph,
    MetricGraph,
    Offset,
    _source_slices,
    bounds_mask,
    build_metric_graph,
    make_rng,
    metric_to_affinity,
    validate_offsets,
)
from .optimize import AdamState, adam_step

logger = logging.getLogger(__name__)


def sampled_offsets(radius: int = 32, connectivity: int = 4) -> list[Offset]:
    """Nearest-neighbor offsets plus a sparse set of longer ones up to ``radius``.

    Long offsets are the four canonical directions at power-of-two lengths.
    """
    offsets: list[Offset] = [(0, 1), (1, 0)]
    if connectivity == 8:
        offsets += [(1, 1), (1, -1)]
    r = 2
    while r <= radius:
        for off in ((0, r), (r, 0), (r, r), (r, -r)):
            if off not in offsets:
                offsets.append(off)
        r *= 2
    return offsets


@dataclass(frozen=True)
class ProjectionConfig:
    embed_dim: int = 3
    max_radius: int = 32
    offsets: tuple[Offset, ...] | None = None  # None: every offset in the target
    lr: float = 0.01
    max_iters: int = 5000
    seed: int = 0
    init_scale: float = 0.5
    # stop once the objective falls by less than rtol * objective + atol over tol_window steps
    rtol: float = 1e-4
    atol: float = 1e-12
    tol_window: int = 100

    def __post_init__(self):
        if self.embed_dim < 1:
            raise ValueError("embed_dim must be >= 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.rtol < 0 or self.atol < 0 or self.tol_window < 1:
            raise ValueError("tolerances must be non-negative and tol_window >= 1")
        if self.offsets is not None:
            for dy, dx in self.offsets:
                if max(abs(dy), abs(dx)) > self.max_radius:
                    raise ValueError(f"offset {(dy, dx)} exceeds radius {self.max_radius}")


@dataclass
class ProjectionResult:
    field: np.ndarray
    metric: MetricGraph
    affinity: AffinityGraph
    objective: float
    num_edges: int
    converged: bool
    history: list[float] = dc_field(default_factory=list)

    @property
    def residual(self) -> float:
        """Mean squared affinity error per valid edge."""
        return self.objective / self.num_edges


def _select(target: AffinityGraph, config: ProjectionConfig) -> tuple[list[Offset], np.ndarray, np.ndarray]:
    for dy, dx in target.offsets:
        if max(abs(dy), abs(dx)) > config.max_radius:
            raise ValueError(f"target offset {(dy, dx)} exceeds radius {config.max_radius}")
    if config.offsets is None:
        keep = list(target.offsets)
    else:
        keep = [tuple(o) for o in config.offsets]
        missing = [o for o in keep if o not in target.offsets]
        if missing:
            raise ValueError(f"target graph lacks offsets {missing}")
    idx = [target.offsets.index(o) for o in keep]
    return keep, target.channels[idx], target.mask[idx]


def projection_objective(u: np.ndarray, offsets: Sequence[Offset], targets: np.ndarray,
                         mask: np.ndarray) -> tuple[float, np.ndarray]:
    """Sum of squared affinity errors over masked edges, and its gradient in ``u``."""
    shape = u.shape[:2]
    grad = np.zeros_like(u)
    total = 0.0
    for k, off in enumerate(offsets):
        src, dst = _source_slices(off, shape)
        diff = u[src] - u[dst]
        aff = np.exp(-np.abs(diff).sum(-1))
        valid = mask[k][src]
        r = np.where(valid, aff - targets[k][src], 0.0)
        total += float(np.sum(r * r))
        # d/du_i (aff - a)^2 = -2 r aff sign(u_i - u_j)
        g = (-2.0 * r * aff)[..., None] * np.sign(diff)
        grad[src] += g
        grad[dst] -= g
    return total, grad


def project_to_metric(target: AffinityGraph, config: ProjectionConfig = ProjectionConfig()) -> ProjectionResult:
    offsets, targets, mask = _select(target, config)
    num_edges = int(mask.sum())
    if num_edges == 0:
        raise ValueError("target graph has no valid edges")
    h, w = target.shape
    u = config.init_scale * make_rng(config.seed).standard_normal((h, w, config.embed_dim))
    state = AdamState.zeros_like(u, lr=config.lr)
    history: list[float] = []
    converged = False
    for it in range(config.max_iters + 1):
        obj, grad = projection_objective(u, offsets, targets, mask)
        history.append(obj)
        if len(history) > config.tol_window:
            before = history[-1 - config.tol_window]
            if before - obj < config.rtol * abs(before) + config.atol:
                converged = True
                break
        if it == config.max_iters:
            break
        u, state = adam_step(u, grad, state)
    if not converged:
        logger.info("projection stopped at max_iters=%d (objective %.3g)", config.max_iters, history[-1])
    metric = build_metric_graph(u, target.offsets)
    return ProjectionResult(
        field=u,
        metric=metric,
        affinity=metric_to_affinity(metric),
        objective=history[-1],
        num_edges=num_edges,
        converged=converged,
        history=history,
    )


def make_inconsistent_fixture(shape: tuple[int, int] = (16, 16), merge_fraction: float = 0.5,
                              offsets: Sequence[Offset] | None = None, *,
                              nn_intra: float = 0.95, long_intra: float = 0.9,
                              boundary_merge: float = 0.9, boundary_split: float = 0.1,
                              long_inter: float = 0.1) -> AffinityGraph:
    """Two objects stacked vertically with a contradictory affinity graph.

    The top half of the grid is one object, the bottom half another. Vertical
    nearest-neighbor edges crossing their shared boundary get
    ``boundary_merge`` over the leftmost ``merge_fraction`` of the columns and
    ``boundary_split`` elsewhere. All other nearest-neighbor edges lie inside
    an object and get ``nn_intra``; longer edges get ``long_intra`` inside an
    object and ``long_inter`` across the boundary. With ``merge_fraction=0``
    the boundary is uniformly split and nothing contradicts.
    """
    h, w = shape
    if h < 16 or w < 16:
        raise ValueError("fixture needs a grid of at least 16x16")
    if not 0 <= merge_fraction <= 1:
        raise ValueError("merge_fraction must lie in [0, 1]")
    if offsets is None:
        offsets = sampled_offsets(radius=min(32, min(h, w) - 1))
    offsets = validate_offsets(offsets, shape)
    obj = np.where(np.arange(h) < h // 2, 1, 2)[:, None] * np.ones((1, w), dtype=np.int64)
    merge_cols = np.arange(w) < int(round(merge_fraction * w))
    mask = bounds_mask(offsets, shape)
    channels = np.zeros((len(offsets), h, w))
    for k, off in enumerate(offsets):
        src, dst = _source_slices(off, shape)
        same = obj[src] == obj[dst]
        nn = max(abs(off[0]), abs(off[1])) == 1
        plane = np.where(same, nn_intra if nn else long_intra, long_inter)
        if off == (1, 0):
            cross = ~same
            cols = np.broadcast_to(merge_cols[src[1]][None, :], cross.shape)
            plane = np.where(cross & cols, boundary_merge, np.where(cross, boundary_split, plane))
        channels[k][src] = plane
    return AffinityGraph(list(offsets), channels, mask)
