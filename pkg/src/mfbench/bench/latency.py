"""Per-step timing and encoder-invocation accounting.

``measure_latency`` splits each control step into encoder time (new frame
features) and decoder time (modulator plus denoising loop).  The uncached
reference re-encodes all M frames every step; ``naive_multiframe_encode``
goes further and puts every frame's patches in one attention sequence,
which is the quadratic baseline the feature cache avoids.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from mfbench.nn import layers as L
from mfbench.nn import tensor as T
from mfbench.nn.params import ParamStore
from mfbench.nn.tensor import Tensor, no_grad
from mfbench.policy.config import ModelConfig
from mfbench.policy.model import Policy, sample_actions
from mfbench.policy.network import patchify
from mfbench.simenv import HORIZON, reset, step


@dataclass
class LatencyReport:
    steps: int
    encoder_calls: int
    encoder_time: float   # mean seconds per step
    decoder_time: float   # mean seconds per step
    cached: bool

    @property
    def calls_per_step(self) -> float:
        return self.encoder_calls / self.steps


def measure_latency(policy: Policy, task: str, seed: int, steps: int = HORIZON,
                    cached: bool = True, clock=time.perf_counter) -> LatencyReport:
    """Run up to ``steps`` control steps on clean frames and time each half."""
    state, frame = reset(task, seed)
    rng = np.random.default_rng(seed)
    cache = policy.new_chunk()
    history: list[np.ndarray] = []
    calls0 = policy.encoder_calls
    enc, dec, n = 0.0, 0.0, 0
    m = policy.config.frames
    for _ in range(steps):
        t0 = clock()
        if cached:
            cache.push(policy.encode_frame(frame, state.instruction))
            feats = cache.features()
        else:
            history.append(frame)
            idx = [max(0, len(history) - m + j) for j in range(m)]
            feats = np.stack([policy.encode_frame(history[i], state.instruction) for i in idx])
        t1 = clock()
        acts = sample_actions(feats, policy.params, policy.config, rng, policy.schedule)
        action = np.clip(policy.normalizer.unnormalize(acts[0]), -1.0, 1.0)
        t2 = clock()
        enc += t1 - t0
        dec += t2 - t1
        n += 1
        state, frame, done, _ = step(state, action)
        if done:
            break
    return LatencyReport(n, policy.encoder_calls - calls0, enc / n, dec / n, cached)


def naive_multiframe_encode(images: np.ndarray, instruction: int, params: ParamStore,
                            config: ModelConfig) -> np.ndarray:
    """Encode M frames jointly: one sequence of M*P patch tokens plus the
    instruction and summary tokens, reusing the single-frame encoder weights."""
    c = config
    frames = np.asarray(images)
    m = frames.shape[0]
    with no_grad():
        x = L.linear_forward(Tensor(patchify(frames, c.patch_size)), params, "enc.patch")
        x = x + params["enc.pos"]
        x = T.reshape(x, (1, m * c.num_patches, c.feature_dim))
        tok_l = T.reshape(T.embedding(params["enc.instr"], np.array([instruction])),
                          (1, 1, c.feature_dim))
        tok_s = T.reshape(params["enc.summary"], (1, 1, c.feature_dim))
        x = T.concat([x, tok_l, tok_s], axis=1)
        for i in range(c.encoder_layers):
            p = f"enc.block{i}"
            h = L.layer_norm_forward(x, params, f"{p}.ln1")
            x = x + L.attention_block(h, h, params, f"{p}.attn", c.encoder_heads)
            x = x + L.mlp_forward(L.layer_norm_forward(x, params, f"{p}.ln2"), params,
                                  f"{p}.mlp")
        last = x.shape[1]
        out = T.slice_axis(x, last - 1, last, axis=1)
        return L.layer_norm_forward(T.reshape(out, (1, c.feature_dim)), params,
                                    "enc.ln_f").data[0]


def time_encoder_work(policy: Policy, frames: int, repeats: int = 20, naive: bool = False,
                      seed: int = 0, clock=time.perf_counter) -> float:
    """Median seconds of per-step encoder work when the window holds
    ``frames`` frames: one new frame (cached) or all frames jointly (naive)."""
    _, img = reset("pick_place", seed)
    window = np.repeat(img[None], frames, axis=0)
    times = []
    for _ in range(repeats):
        t0 = clock()
        if naive:
            naive_multiframe_encode(window, 0, policy.params, policy.config)
        else:
            policy.encode_frame(window[-1], 0)
        times.append(clock() - t0)
    return float(np.median(times))
