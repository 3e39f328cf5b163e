"""Rand F-score and Variation of Information, split into merge and split parts.

Conventions: the merge score penalizes predicted segments that span several
ground-truth objects, the split score penalizes ground-truth objects cut
into several predicted segments. VI is in nats. Predicted label 0 is scored
as an ordinary segment.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy import ndimage

from .core import as_label_map


@dataclass(frozen=True)
class ContingencyTable:
    """``counts[i, j]`` = evaluated pixels with predicted label ``pred_labels[i]``
    and ground-truth label ``gt_labels[j]``."""

    pred_labels: np.ndarray
    gt_labels: np.ndarray
    counts: np.ndarray

    @property
    def row_sums(self) -> np.ndarray:
        return self.counts.sum(1)

    @property
    def col_sums(self) -> np.ndarray:
        return self.counts.sum(0)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class EvalReport:
    rand_f: float
    rand_merge: float
    rand_split: float
    vi_total: float
    vi_merge: float
    vi_split: float
    evaluated: int
    excluded: int

    def to_dict(self) -> dict:
        return asdict(self)

    def table(self) -> str:
        rows = [
            ("rand_f", self.rand_f), ("rand_merge", self.rand_merge), ("rand_split", self.rand_split),
            ("vi_total", self.vi_total), ("vi_merge", self.vi_merge), ("vi_split", self.vi_split),
        ]
        lines = [f"{'metric':<12}{'value':>12}"]
        lines += [f"{name:<12}{value:>12.6f}" for name, value in rows]
        lines.append(f"{'evaluated':<12}{self.evaluated:>12d}")
        lines.append(f"{'excluded':<12}{self.excluded:>12d}")
        return "\n".join(lines)


def boundary_exclusion_mask(gt: np.ndarray, radius: int = 2) -> np.ndarray:
    """True where a pixel is left out of evaluation.

    A pixel is excluded if any pixel within Chebyshev distance ``radius``
    carries a different gt label, or if it is gt background itself.
    """
    gt = as_label_map(gt)
    if radius < 0:
        raise ValueError("radius must be non-negative")
    size = 2 * radius + 1
    # nearest-mode padding only repeats labels already inside the window
    hi = ndimage.maximum_filter(gt, size=size, mode="nearest")
    lo = ndimage.minimum_filter(gt, size=size, mode="nearest")
    return (hi != lo) | (gt == 0)


def contingency_table(pred: np.ndarray, gt: np.ndarray, exclude: np.ndarray | None = None) -> ContingencyTable:
    pred = as_label_map(pred)
    gt = as_label_map(gt)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs gt {gt.shape}")
    keep = np.ones(gt.shape, dtype=bool) if exclude is None else ~np.asarray(exclude, dtype=bool)
    if keep.shape != gt.shape:
        raise ValueError("exclusion mask shape does not match labels")
    p, g = pred[keep], gt[keep]
    if p.size == 0:
        raise ValueError("no pixels left to evaluate")
    pred_labels, pi = np.unique(p, return_inverse=True)
    gt_labels, gi = np.unique(g, return_inverse=True)
    counts = np.zeros((len(pred_labels), len(gt_labels)), dtype=np.int64)
    np.add.at(counts, (pi, gi), 1)
    return ContingencyTable(pred_labels, gt_labels, counts)


def _entropy(counts: np.ndarray, n: int) -> float:
    p = counts[counts > 0] / n
    return float(-np.sum(p * np.log(p)))


def scores(table: ContingencyTable) -> dict[str, float]:
    n = table.total
    nij = table.counts.astype(np.float64)
    s, t = table.row_sums.astype(np.float64), table.col_sums.astype(np.float64)
    sum_nij2 = float(np.sum(nij**2))
    rand_merge = sum_nij2 / float(np.sum(s**2))
    rand_split = sum_nij2 / float(np.sum(t**2))
    rand_f = 2 * rand_merge * rand_split / (rand_merge + rand_split)
    h_joint = _entropy(table.counts.ravel(), n)
    h_pred = _entropy(table.row_sums, n)
    h_gt = _entropy(table.col_sums, n)
    vi_split = max(h_joint - h_gt, 0.0)  # H(pred | gt)
    vi_merge = max(h_joint - h_pred, 0.0)  # H(gt | pred)
    return {"rand_f": rand_f, "rand_merge": rand_merge, "rand_split": rand_split,
            "vi_total": vi_merge + vi_split, "vi_merge": vi_merge, "vi_split": vi_split}


def conditional_entropies(table: ContingencyTable) -> tuple[float, float]:
    """``(H(pred | gt), H(gt | pred))`` summed directly over table cells."""
    n = table.total
    s, t = table.row_sums, table.col_sums
    i, j = np.nonzero(table.counts)
    nij = table.counts[i, j].astype(np.float64)
    h_pred_given_gt = float(-np.sum(nij / n * np.log(nij / t[j])))
    h_gt_given_pred = float(-np.sum(nij / n * np.log(nij / s[i])))
    return h_pred_given_gt, h_gt_given_pred


def evaluate(pred: np.ndarray, gt: np.ndarray, exclude: np.ndarray | None = None) -> EvalReport:
    """Score ``pred`` against ``gt`` over the pixels not in ``exclude``."""
    table = contingency_table(pred, gt, exclude)
    excluded = 0 if exclude is None else int(np.count_nonzero(exclude))
    return EvalReport(**scores(table), evaluated=table.total, excluded=excluded)
