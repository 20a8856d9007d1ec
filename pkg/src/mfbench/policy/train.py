from __future__ import annotations

import csv
import dataclasses
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from mfbench.errors import ConfigError, TrainingError
from mfbench.nn import layers as L
from mfbench.nn import tensor as T
from mfbench.nn.optim import adamw_step, clip_grad_norm, linear_decay
from mfbench.nn.tensor import Tape, Tensor
from mfbench.policy.config import ModelConfig
from mfbench.policy import network
from mfbench.policy.model import ActionNormalizer, Policy, diffusion_loss, make_batch
from mfbench.simenv.dataset import IDLE_ACTION, EpisodeRecord

log = logging.getLogger(__name__)


@dataclass
class TrainHyper:
    steps: int = 1500
    batch_size: int = 32
    lr: float = 1e-3
    betas: tuple[float, float] = (0.9, 0.999)
    weight_decay: float = 0.0
    grad_clip: float | None = 1.0
    diffusion_repeats: int = 8
    pretrain_steps: int = 3000
    pretrain_lr: float = 2e-3
    augment_shift: int = 4
    seed: int = 0
    log_every: int = 50


class WindowDataset:
    """All (M frames, instruction, next-K actions) windows of a set of episodes.

    Frames are stored once; windows are index rows into that frame table.
    Early steps repeat the first frame (the same padding used at inference).
    """

    def __init__(self, records: Sequence[EpisodeRecord], frames: int, chunk: int,
                 normalizer: ActionNormalizer | None = None):
        if not records:
            raise ConfigError("empty dataset")
        self.frames_per_window = frames
        imgs, win, instr, acts = [], [], [], []
        base = 0
        for rec in records:
            imgs.append(rec.images)
            n_act = len(rec.actions)
            padded = np.concatenate([rec.actions, np.tile(IDLE_ACTION, (chunk, 1))])
            for t in range(n_act):
                win.append([base + max(0, t - frames + 1 + j) for j in range(frames)])
                instr.append(rec.instruction)
                acts.append(padded[t:t + chunk])
            base += rec.length
        self.images = np.concatenate(imgs)
        self.index = np.array(win, dtype=np.int64)
        self.instructions = np.array(instr, dtype=np.int64)
        raw = np.array(acts)
        self.normalizer = normalizer or ActionNormalizer.fit(
            np.concatenate([r.actions for r in records]))
        self.actions = self.normalizer.normalize(raw)

    def __len__(self) -> int:
        return len(self.index)

    def batch(self, idx: np.ndarray):
        return self.images[self.index[idx]], self.instructions[idx], self.actions[idx]


def shift_augment(images: np.ndarray, rng: np.random.Generator, max_shift: int) -> np.ndarray:
    """Translate each (M, H, W, 3) window by one random offset in
    [-max_shift, max_shift] pixels, replicating edge pixels.

    Actions depend on relative positions only, so labels are unchanged.
    """
    if max_shift <= 0:
        return images
    b, m, h, w, _ = images.shape
    s = max_shift
    padded = np.pad(images, ((0, 0), (0, 0), (s, s), (s, s), (0, 0)), mode="edge")
    out = np.empty_like(images)
    for j, (dy, dx) in enumerate(rng.integers(-s, s + 1, size=(b, 2))):
        out[j] = padded[j, :, s - dy:s - dy + h, s - dx:s - dx + w]
    return out


@dataclass
class TrainResult:
    policy: Policy
    curve: list[tuple[int, float, float]] = field(default_factory=list)

    @property
    def losses(self) -> np.ndarray:
        """Diffusion-stage losses (pretraining rows excluded)."""
        return np.array([c[1] for c in self.curve if c[0] >= 0])


def pretrain_encoder(dataset: WindowDataset, policy: Policy, steps: int, lr: float = 2e-3,
                     batch_size: int = 32, seed: int = 0, grad_clip: float | None = 1.0,
                     log_every: int = 0, augment_shift: int = 0) -> list[tuple[int, float, float]]:
    """Single-frame stage: regress the normalised K-step action chunk from the
    current frame through the encoder and a throwaway linear head.

    Only ``enc.*`` parameters are updated (in place); the head and its
    optimiser state are discarded afterwards.
    """
    config = policy.config
    store = policy.params.subset("enc.", seed)
    head = "pretrain.head"
    L.init_linear(store, head, config.feature_dim, config.chunk_len * config.action_dim)
    rng = np.random.default_rng(seed)
    curve = []
    for step in range(steps):
        idx = rng.integers(len(dataset), size=batch_size)
        images, instr, clean = dataset.batch(idx)
        images = shift_augment(images[:, -1:], rng, augment_shift)
        with Tape() as tape:
            feats = network.encode_frames(images[:, -1], instr, store, config)
            pred = L.linear_forward(feats, store, head)
            loss = T.mse(pred, Tensor(clean.reshape(len(idx), -1)))
        value = float(loss.data)
        if not math.isfinite(value):
            raise TrainingError(f"non-finite pretraining loss {value} at step {step}")
        tape.backward(loss)
        if grad_clip:
            clip_grad_norm(store, grad_clip)
        cur = linear_decay(lr, step, steps)
        adamw_step(store, cur)
        curve.append((step, value, cur))
        if log_every and step % log_every == 0:
            log.info("pretrain step %d loss %.5f lr %.3g", step, value, cur)
    return curve


def train(dataset: WindowDataset, config: ModelConfig, policy: Policy | None = None,
          hyper: TrainHyper | None = None, curve_path: str | Path | None = None) -> TrainResult:
    """Minibatch AdamW on the diffusion loss with linear LR decay to zero.

    With ``hyper.pretrain_steps > 0`` the encoder first goes through the
    single-frame stage (``pretrain_encoder``); its steps are logged in the
    curve with negative step numbers.
    """
    hyper = hyper or TrainHyper()
    if dataset.frames_per_window != config.frames:
        raise ConfigError("dataset window length does not match config.frames")
    policy = policy or Policy(config, seed=hyper.seed, normalizer=dataset.normalizer)
    policy.normalizer = dataset.normalizer
    params = policy.params
    curve = []
    if hyper.pretrain_steps:
        pre = pretrain_encoder(dataset, policy, hyper.pretrain_steps, hyper.pretrain_lr,
                               hyper.batch_size, hyper.seed, hyper.grad_clip, hyper.log_every,
                               hyper.augment_shift)
        curve.extend((s - hyper.pretrain_steps, v, lr) for s, v, lr in pre)
    rng = np.random.default_rng(hyper.seed)
    for step in range(hyper.steps):
        idx = rng.integers(len(dataset), size=hyper.batch_size)
        images, instr, clean = dataset.batch(idx)
        images = shift_augment(images, rng, hyper.augment_shift)
        with Tape() as tape:
            batch = make_batch(images, instr, clean, params, config, policy.schedule, rng,
                               hyper.diffusion_repeats)
            loss = diffusion_loss(batch, config, params, policy.schedule)
        value = float(loss.data)
        if not math.isfinite(value):
            raise TrainingError(f"non-finite loss {value} at step {step} "
                                f"(lr={linear_decay(hyper.lr, step, hyper.steps):.3g}, "
                                f"timesteps={batch.timesteps.tolist()})")
        tape.backward(loss)
        if hyper.grad_clip:
            clip_grad_norm(params, hyper.grad_clip)
        lr = linear_decay(hyper.lr, step, hyper.steps)
        adamw_step(params, lr, hyper.betas, hyper.weight_decay)
        curve.append((step, value, lr))
        if hyper.log_every and step % hyper.log_every == 0:
            log.info("step %d loss %.5f lr %.3g", step, value, lr)
    if curve_path is not None:
        write_loss_curve(curve, curve_path)
    return TrainResult(policy, curve)


def transfer_encoder(source: Policy, target: Policy) -> Policy:
    """Copy every ``enc.*`` parameter of ``source`` into ``target``.

    Lets policies with different M start post-training from one shared
    single-frame encoder.
    """
    if source.config.feature_dim != target.config.feature_dim:
        raise ConfigError("encoders differ in feature_dim")
    for name, t in source.params:
        if name.startswith("enc."):
            if name not in target.params or target.params[name].shape != t.shape:
                raise ConfigError(f"encoder parameter {name} does not match")
            target.params.set(name, t.data.copy())
    return target


def train_shared_encoder(records: Sequence[EpisodeRecord], configs: Sequence[ModelConfig],
                         hyper: TrainHyper | None = None) -> list[TrainResult]:
    """Run the single-frame encoder stage once, then post-train one policy
    per config from that shared encoder with identical seeds and budgets.

    ``hyper.pretrain_steps`` sizes the shared stage; ``hyper.steps`` the
    diffusion stage of every policy. Each result's curve starts with the
    shared stage's rows (negative step numbers).
    """
    hyper = hyper or TrainHyper()
    if not configs:
        raise ConfigError("no model configs given")
    first = configs[0]
    base = Policy(dataclasses.replace(first, frames=1), seed=hyper.seed)
    single = WindowDataset(records, 1, first.chunk_len)
    pre = pretrain_encoder(single, base, hyper.pretrain_steps, hyper.pretrain_lr,
                           hyper.batch_size, hyper.seed, hyper.grad_clip, hyper.log_every,
                           hyper.augment_shift)
    pre_rows = [(s - hyper.pretrain_steps, v, lr) for s, v, lr in pre]
    post = dataclasses.replace(hyper, pretrain_steps=0)
    results = []
    for config in configs:
        ds = WindowDataset(records, config.frames, config.chunk_len)
        policy = transfer_encoder(base, Policy(config, seed=hyper.seed, normalizer=ds.normalizer))
        res = train(ds, config, policy=policy, hyper=post)
        results.append(TrainResult(res.policy, pre_rows + res.curve))
    return results


def write_loss_curve(curve, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "loss", "lr"])
        for step, loss, lr in curve:
            w.writerow([step, repr(loss), repr(lr)])


def hyper_to_dict(h: TrainHyper) -> dict:
    d = asdict(h)
    d["betas"] = list(h.betas)
    return d
