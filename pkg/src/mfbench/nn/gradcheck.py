from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from mfbench.errors import ConfigError, DeterminismError
from mfbench.nn.params import ParamStore
from mfbench.nn.tensor import Tape, Tensor, no_grad


@dataclass
class GradCheckReport:
    per_param: dict[str, float]
    epsilon: float
    tolerance: float
    max_rel_error: float = field(init=False)
    passed: bool = field(init=False)

    def __post_init__(self):
        self.max_rel_error = max(self.per_param.values(), default=0.0)
        self.passed = self.max_rel_error < self.tolerance


def finite_diff_check(
    loss_fn: Callable[[ParamStore], Tensor],
    params: ParamStore,
    epsilon: float = 1e-3,
    samples: int = 64,
    tolerance: float = 1e-4,
    seed: int = 0,
    names: list[str] | None = None,
) -> GradCheckReport:
    """Compare tape gradients with central differences at random coordinates.

    ``loss_fn`` must rebuild the forward pass from ``params`` on every call.
    Relative error uses the denominator max(|analytic|, |numeric|, 1e-8).
    """
    if not epsilon > 0:
        raise ConfigError(f"epsilon must be positive, got {epsilon}")
    params.zero_grad()
    with Tape() as tape:
        loss = loss_fn(params)
    tape.backward(loss)
    analytic = params.grads()
    params.zero_grad()

    def value() -> float:
        with no_grad():
            return float(loss_fn(params).data)

    base = value()
    if value() != base:
        raise DeterminismError("loss_fn returned different values for identical parameters")

    rng = np.random.default_rng(seed)
    pool = names if names is not None else params.names()
    sizes = np.array([params[n].data.size for n in pool], dtype=float)
    errors: dict[str, float] = {}
    for _ in range(samples):
        name = pool[rng.choice(len(pool), p=sizes / sizes.sum())]
        flat = params[name].data.reshape(-1)
        i = int(rng.integers(flat.size))
        orig = flat[i]
        flat[i] = orig + epsilon
        up = value()
        flat[i] = orig - epsilon
        down = value()
        flat[i] = orig
        numeric = (up - down) / (2.0 * epsilon)
        a = float(analytic[name].reshape(-1)[i])
        rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
        errors[name] = max(errors.get(name, 0.0), rel)
    return GradCheckReport(errors, epsilon, tolerance)
