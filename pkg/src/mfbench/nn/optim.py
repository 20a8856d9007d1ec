from __future__ import annotations

import numpy as np

from mfbench.errors import TrainingError
from mfbench.nn.params import ParamStore


def adamw_step(
    params: ParamStore,
    lr: float,
    betas: tuple[float, float] = (0.9, 0.999),
    weight_decay: float = 0.0,
    eps: float = 1e-8,
) -> ParamStore:
    """One AdamW update with decoupled weight decay; clears gradients.

    theta <- theta * (1 - lr*wd) - lr * m_hat / (sqrt(v_hat) + eps)
    """
    for name, t in params:
        if not np.all(np.isfinite(t.grad)):
            raise TrainingError(f"non-finite gradient in parameter {name!r}")
    b1, b2 = betas
    params.step += 1
    c1 = 1.0 - b1**params.step
    c2 = 1.0 - b2**params.step
    for name, t in params:
        g = t.grad
        m = params.m[name]
        v = params.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        if weight_decay:
            t.data *= 1.0 - lr * weight_decay
        t.data -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
        g[...] = 0.0
    return params


def clip_grad_norm(params: ParamStore, max_norm: float) -> float:
    total = float(np.sqrt(sum(float((t.grad * t.grad).sum()) for _, t in params)))
    if np.isfinite(total) and total > max_norm:
        s = max_norm / (total + 1e-12)
        for _, t in params:
            t.grad *= s
    return total


def linear_decay(base_lr: float, step: int, total: int) -> float:
    """Linear schedule from ``base_lr`` at step 0 down to 0 at ``total``."""
    if total <= 0:
        return base_lr
    return base_lr * max(0.0, 1.0 - step / total)
