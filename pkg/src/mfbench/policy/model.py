"""Training loss, denoising sampler and cached inference for the policy."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from mfbench.errors import ConsistencyError, DimensionError
from mfbench.nn import tensor as T
from mfbench.nn.params import ParamStore, load_params, save_params
from mfbench.nn.tensor import Tensor, no_grad
from mfbench.policy import network
from mfbench.policy.chunk import FeatureChunk
from mfbench.policy.config import ModelConfig
from mfbench.policy.schedule import NoiseSchedule

ACTION_CLAMP = 1.5


@dataclass
class DiffusionBatch:
    clean: np.ndarray          # (B, K, n) normalised actions
    noise: np.ndarray          # (B, K, n)
    timesteps: np.ndarray      # (B,) in [1, steps]
    current: Tensor            # (B, d), carries gradient into the encoder
    past: Tensor | None        # (B, M-1, d); constant when regularisation is on


def encode_window(images: np.ndarray, instructions: np.ndarray, params: ParamStore,
                  config: ModelConfig) -> tuple[Tensor | None, Tensor]:
    """Encode (B, M, H, W, 3) windows into (past, current) features.

    With regularisation on, the M-1 past frames go through the encoder with
    recording disabled, so they reach the loss as constants.
    """
    b, m = images.shape[:2]
    current = network.encode_frames(images[:, -1], instructions, params, config)
    if m == 1:
        return None, current
    flat = images[:, :-1].reshape((b * (m - 1),) + images.shape[2:])
    rep = np.repeat(instructions, m - 1)
    if config.regularization:
        with no_grad():
            past = network.encode_frames(flat, rep, params, config)
    else:
        past = network.encode_frames(flat, rep, params, config)
    return T.reshape(past, (b, m - 1, config.feature_dim)), current


def make_batch(images, instructions, clean, params, config, schedule, rng,
               repeats: int = 1) -> DiffusionBatch:
    """Encode windows once, then pair each with ``repeats`` noise/timestep draws."""
    images = np.asarray(images)
    instructions = np.asarray(instructions, dtype=np.int64)
    past, current = encode_window(images, instructions, params, config)
    if repeats > 1:
        b = clean.shape[0]
        sel = np.tile(np.arange(b), repeats)
        clean = clean[sel]
        current = T.take_rows(current, sel)
        if past is not None:
            past = T.take_rows(past, sel)
    noise = rng.standard_normal(clean.shape)
    ts = rng.integers(1, schedule.steps + 1, size=clean.shape[0])
    return DiffusionBatch(clean, noise, ts, current, past)


def diffusion_loss(batch: DiffusionBatch, config: ModelConfig, params: ParamStore,
                   schedule: NoiseSchedule | None = None) -> Tensor:
    """Mean squared error between sampled and predicted noise."""
    if config.regularization and batch.past is not None and batch.past.requires_grad:
        raise ConsistencyError("regularisation is on but past features carry a gradient path")
    schedule = schedule or NoiseSchedule(config.diffusion_steps)
    noised = schedule.q_sample(batch.clean, batch.noise, batch.timesteps)
    zf = network.modulate(batch.past, batch.current, params, config)
    eps_hat = network.decode_noise(zf, Tensor(noised), batch.timesteps, params, config)
    return T.mse(eps_hat, Tensor(batch.noise))


def sample_actions(features: np.ndarray, params: ParamStore, config: ModelConfig,
                   rng: np.random.Generator, schedule: NoiseSchedule | None = None) -> np.ndarray:
    """Ancestral DDPM sampling of one normalised (K, n) action chunk.

    ``features`` is the full (M, d) chunk, oldest first.
    """
    schedule = schedule or NoiseSchedule(config.diffusion_steps)
    feats = np.asarray(features, dtype=np.float64)
    if feats.shape != (config.frames, config.feature_dim):
        raise DimensionError(f"chunk of shape {feats.shape}, expected "
                             f"({config.frames}, {config.feature_dim})")
    shape = (1, config.chunk_len, config.action_dim)
    with no_grad():
        past = Tensor(feats[None, :-1]) if config.frames > 1 else None
        zf = network.modulate(past, Tensor(feats[None, -1]), params, config)
        x = rng.standard_normal(shape)
        for i in range(schedule.steps, 0, -1):
            eps = network.decode_noise(zf, Tensor(x), np.array([i]), params, config).data
            z = rng.standard_normal(shape) if i > 1 else None
            x = schedule.posterior_step(x, eps, i, z)
    return np.clip(x[0], -ACTION_CLAMP, ACTION_CLAMP)


@dataclass
class ActionNormalizer:
    """Per-dimension affine map of the [p1, p99] training range onto [-1, 1]."""

    low: np.ndarray
    high: np.ndarray

    @classmethod
    def fit(cls, actions: np.ndarray) -> ActionNormalizer:
        a = np.asarray(actions, dtype=np.float64).reshape(-1, actions.shape[-1])
        low, high = np.percentile(a, 1, axis=0), np.percentile(a, 99, axis=0)
        same = high - low < 1e-8
        low = np.where(same, low - 1.0, low)
        high = np.where(same, high + 1.0, high)
        return cls(low, high)

    @classmethod
    def identity(cls, n: int) -> ActionNormalizer:
        return cls(-np.ones(n), np.ones(n))

    def normalize(self, a: np.ndarray) -> np.ndarray:
        return np.clip(2.0 * (a - self.low) / (self.high - self.low) - 1.0, -1.0, 1.0)

    def unnormalize(self, a: np.ndarray) -> np.ndarray:
        return (np.asarray(a) + 1.0) * 0.5 * (self.high - self.low) + self.low

    def to_dict(self) -> dict:
        return {"low": self.low.tolist(), "high": self.high.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> ActionNormalizer:
        return cls(np.array(d["low"], dtype=np.float64), np.array(d["high"], dtype=np.float64))


class Policy:
    """Trainable multi-frame policy with an encoder-call counter."""

    def __init__(self, config: ModelConfig, params: ParamStore | None = None, seed: int = 0,
                 normalizer: ActionNormalizer | None = None):
        self.config = config
        self.params = params if params is not None else network.init_params(config, seed)
        self.normalizer = normalizer or ActionNormalizer.identity(config.action_dim)
        self.schedule = NoiseSchedule(config.diffusion_steps)
        self.encoder_calls = 0

    def encode_frame(self, image: np.ndarray, instruction: int) -> np.ndarray:
        self.encoder_calls += 1
        with no_grad():
            return network.encode_frames(image[None], [instruction], self.params, self.config).data[0]

    def new_chunk(self) -> FeatureChunk:
        return FeatureChunk(self.config.frames, self.config.feature_dim)

    def sample_actions(self, chunk: FeatureChunk, rng: np.random.Generator) -> np.ndarray:
        return sample_actions(chunk.features(), self.params, self.config, rng, self.schedule)

    def _execute(self, chunk_actions: np.ndarray) -> np.ndarray:
        # receding horizon: only the first action of the chunk is executed
        return np.clip(self.normalizer.unnormalize(chunk_actions[0]), -1.0, 1.0)

    def predict_step(self, image: np.ndarray, instruction: int, cache: FeatureChunk,
                     rng: np.random.Generator) -> tuple[np.ndarray, FeatureChunk]:
        """Encode only the new frame, push it, sample a chunk, act on its head."""
        cache.push(self.encode_frame(image, instruction))
        return self._execute(self.sample_actions(cache, rng)), cache

    def predict_uncached(self, history: list[np.ndarray], instruction: int,
                         rng: np.random.Generator) -> np.ndarray:
        """Reference path: re-encode the last M raw frames every step."""
        m = self.config.frames
        idx = [max(0, len(history) - m + j) for j in range(m)]
        feats = np.stack([self.encode_frame(history[i], instruction) for i in idx])
        acts = sample_actions(feats, self.params, self.config, rng, self.schedule)
        return self._execute(acts)

    def save(self, path: str | Path, extra: dict | None = None) -> Path:
        meta = {"kind": "mfbench-policy", "config": self.config.to_dict(),
                "normalizer": self.normalizer.to_dict(), **(extra or {})}
        return save_params(self.params, path, meta)

    @classmethod
    def load(cls, path: str | Path) -> Policy:
        params, meta = load_params(path)
        return cls(ModelConfig.from_dict(meta["config"]), params,
                   normalizer=ActionNormalizer.from_dict(meta["normalizer"]))

    def fingerprint(self) -> str:
        return self.params.fingerprint()
