"""DDPM noise schedule, forward noising, and ancestral sampling steps."""

from __future__ import annotations

import math

import numpy as np

from mfbench.errors import ConfigError, DimensionError

BASE_STEPS = 1000
BETA_START = 1e-4
BETA_END = 0.02


class NoiseSchedule:
    """Linear 1e-4..0.02 base schedule over 1000 steps, respaced to ``steps``.

    Step ``i`` (1-indexed) takes the base cumulative product at position
    ``tau = i*1000/steps`` (base step ``tau`` when integral, log-linear
    interpolation between neighbouring base steps otherwise, so spacing
    stays even and betas stay increasing).  Betas are re-derived from
    consecutive cumulative products so the respaced chain is a proper
    Markov chain.  Index 0 holds alpha_bar = 1.
    """

    def __init__(self, steps: int):
        if steps < 1:
            raise ConfigError("diffusion steps must be >= 1")
        self.steps = steps
        base_beta = np.linspace(BETA_START, BETA_END, BASE_STEPS)
        log_abar = np.concatenate([[0.0], np.cumsum(np.log1p(-base_beta))])
        tau = np.arange(1, steps + 1) * (BASE_STEPS / steps)
        exact = np.isclose(tau, np.round(tau), rtol=0, atol=1e-9)
        picked = np.where(exact, log_abar[np.round(tau).astype(int)],
                          np.interp(tau, np.arange(BASE_STEPS + 1), log_abar))
        self.alpha_bar = np.concatenate([[1.0], np.exp(picked)])
        self.beta = np.concatenate([[0.0], 1.0 - self.alpha_bar[1:] / self.alpha_bar[:-1]])
        self.alpha = 1.0 - self.beta

    def check_timestep(self, i) -> None:
        i = np.asarray(i)
        if np.any(i < 1) or np.any(i > self.steps):
            raise DimensionError(f"timestep outside [1, {self.steps}]: {i}")

    def q_sample(self, clean: np.ndarray, noise: np.ndarray, i: np.ndarray) -> np.ndarray:
        """noised = sqrt(abar_i) * clean + sqrt(1 - abar_i) * noise."""
        self.check_timestep(i)
        ab = self.alpha_bar[np.asarray(i)].reshape((-1,) + (1,) * (clean.ndim - 1))
        return np.sqrt(ab) * clean + np.sqrt(1.0 - ab) * noise

    def posterior_step(self, x: np.ndarray, eps_hat: np.ndarray, i: int,
                       z: np.ndarray | None, clip: float = 1.0) -> np.ndarray:
        """x_{i-1} from x_i given predicted noise; ``z`` unused at i == 1."""
        ab, ab_prev = self.alpha_bar[i], self.alpha_bar[i - 1]
        b = self.beta[i]
        x0 = (x - math.sqrt(1.0 - ab) * eps_hat) / math.sqrt(ab)
        x0 = np.clip(x0, -clip, clip)
        mean = (b * math.sqrt(ab_prev) / (1.0 - ab)) * x0 \
            + ((1.0 - ab_prev) * math.sqrt(self.alpha[i]) / (1.0 - ab)) * x
        if i == 1:
            return mean
        var = b * (1.0 - ab_prev) / (1.0 - ab)
        return mean + math.sqrt(var) * z


def timestep_features(i: np.ndarray, dim: int) -> np.ndarray:
    """Sinusoidal embedding (cos | sin) of integer timesteps, shape (B, dim)."""
    half = dim // 2
    freqs = np.exp(-math.log(10000.0) * np.arange(half) / half)
    args = np.asarray(i, dtype=np.float64).reshape(-1, 1) * freqs
    emb = np.concatenate([np.cos(args), np.sin(args)], axis=1)
    if dim % 2:
        emb = np.concatenate([emb, np.zeros((emb.shape[0], 1))], axis=1)
    return emb
