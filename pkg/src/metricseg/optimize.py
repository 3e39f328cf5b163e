"""Adam and the direct per-pixel embedding fit.

Instead of training a network, the embedding vectors themselves are the
parameters: every pixel's vector is optimized against the discriminative
loss on the full patch each step.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field as dc_field

import numpy as np

from .core import as_label_map, make_rng
from .loss import LossParams, LossReport, loss_and_gradient, patch_ext_mask

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: np.ndarray, **hyper) -> "AdamState":
        return cls(np.zeros_like(params, dtype=np.float64), np.zeros_like(params, dtype=np.float64), **hyper)


def adam_step(params: np.ndarray, grad: np.ndarray, state: AdamState) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update. Inputs are not modified."""
    params = np.asarray(params, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if params.shape != grad.shape or state.m.shape != params.shape:
        raise ValueError(f"shape mismatch: params {params.shape}, grad {grad.shape}, state {state.m.shape}")
    if not np.all(np.isfinite(grad)):
        raise FloatingPointError("gradient contains non-finite values")
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    new = params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return new, AdamState(m, v, t, state.lr, state.beta1, state.beta2, state.eps)


@dataclass(frozen=True)
class FitConfig:
    max_iters: int = 2000
    loss: LossParams = LossParams()
    seed: int = 0
    init_scale: float = 0.1
    lr: float = 0.001
    tol: float = 1e-7
    tol_window: int = 50
    connectivity: int = 4

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.init_scale > 0:
            raise ValueError("init_scale must be positive")


@dataclass
class FitResult:
    field: np.ndarray
    report: LossReport
    converged: bool
    iterations: int
    log: list[dict] = dc_field(default_factory=list)


def fit_embeddings(labels: np.ndarray, config: FitConfig = FitConfig()) -> FitResult:
    """Optimize a per-pixel embedding so the label map's objects separate.

    Disconnected pieces of one object are treated as separate objects with
    no hinge term between them. Stops once the total loss changes by less
    than ``config.tol`` over ``config.tol_window`` iterations; otherwise the
    best iterate seen is returned with ``converged=False``.
    """
    labels = as_label_map(labels)
    split, ext = patch_ext_mask(labels, config.connectivity)
    h, w = labels.shape
    params = config.init_scale * make_rng(config.seed).standard_normal((h, w, config.loss.dim))
    state = AdamState.zeros_like(params, lr=config.lr)

    log: list[dict] = []
    history: list[float] = []
    best = (np.inf, params, None)
    converged = False
    it = 0
    for it in range(config.max_iters + 1):
        report, grad = loss_and_gradient(params, split, config.loss, ext)
        history.append(report.total)
        log.append({"iteration": it, "l_int": report.l_int, "l_ext": report.l_ext,
                    "l_norm": report.l_norm, "total": report.total})
        if report.total < best[0]:
            best = (report.total, params, report)
        if len(history) > config.tol_window and abs(history[-1 - config.tol_window] - history[-1]) < config.tol:
            converged = True
            break
        if it == config.max_iters:
            break
        params, state = adam_step(params, grad, state)

    if converged:
        field, final = params, report
    else:
        logger.warning("embedding fit did not converge in %d iterations", config.max_iters)
        _, field, final = best
    return FitResult(field=field, report=final, converged=converged, iterations=it, log=log)
