"""Expert episode containers.

Directory layout::

    index.json                    {"format": "mfbench-episodes/1", "task",
                                   "seed", "image_shape": [64, 64, 3],
                                   "episodes": [{"id", "instruction",
                                   "length", "success", "images", "actions"}]}
    episode_00000.images.u8       length*64*64*3 raw bytes, (t, y, x, rgb)
    episode_00000.actions.f64     (length-1)*3 little-endian float64

``length`` counts frames; an episode with L frames has L-1 actions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from mfbench.errors import ConfigError
from mfbench.simenv.expert import expert_action
from mfbench.simenv.world import IMAGE_SIZE, reset, step

EPISODE_FORMAT = "mfbench-episodes/1"
IDLE_ACTION = np.array([0.0, 0.0, -1.0])


@dataclass
class EpisodeRecord:
    instruction: int
    images: np.ndarray  # (L, 64, 64, 3) uint8
    actions: np.ndarray  # (L-1, 3) float64
    success: bool

    @property
    def length(self) -> int:
        return len(self.images)


def episode_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence((seed, index)).generate_state(1)[0])


def rollout_expert(task: str, seed: int) -> EpisodeRecord:
    state, img = reset(task, seed)
    images, actions = [img], []
    done = False
    while not done:
        a = expert_action(state)
        state, img, done, _ = step(state, a)
        images.append(img)
        actions.append(a)
    return EpisodeRecord(state.instruction, np.stack(images), np.array(actions), state.success)


def generate_dataset(task: str, episodes: int, seed: int, out_dir: str | Path) -> Path:
    if episodes < 1:
        raise ConfigError("episodes must be >= 1")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for i in range(episodes):
        rec = rollout_expert(task, episode_seed(seed, i))
        stem = f"episode_{i:05d}"
        (out / f"{stem}.images.u8").write_bytes(np.ascontiguousarray(rec.images).tobytes())
        (out / f"{stem}.actions.f64").write_bytes(rec.actions.astype("<f8").tobytes())
        entries.append({"id": i, "instruction": rec.instruction, "length": rec.length,
                        "success": bool(rec.success), "images": f"{stem}.images.u8",
                        "actions": f"{stem}.actions.f64"})
    index = {"format": EPISODE_FORMAT, "task": task, "seed": seed,
             "image_shape": [IMAGE_SIZE, IMAGE_SIZE, 3], "episodes": entries}
    (out / "index.json").write_text(json.dumps(index, indent=2, sort_keys=True))
    return out


def load_dataset(path: str | Path) -> list[EpisodeRecord]:
    path = Path(path)
    index = json.loads((path / "index.json").read_text())
    if index.get("format") != EPISODE_FORMAT:
        raise ConfigError(f"{path}: not an episode container")
    shape = tuple(index["image_shape"])
    records = []
    for e in index["episodes"]:
        imgs = np.frombuffer((path / e["images"]).read_bytes(), dtype=np.uint8)
        acts = np.frombuffer((path / e["actions"]).read_bytes(), dtype="<f8")
        records.append(EpisodeRecord(
            e["instruction"], imgs.reshape((e["length"],) + shape),
            acts.astype(np.float64).reshape(e["length"] - 1, 3), e["success"]))
    return records


def window_indices(length: int, frames: int, pad: bool = True) -> Iterator[int]:
    """Decision steps t with an action; without padding t >= frames-1."""
    start = 0 if pad else frames - 1
    return iter(range(start, length - 1))


def window(rec: EpisodeRecord, t: int, frames: int, chunk: int) -> tuple[np.ndarray, np.ndarray]:
    """Frames t-M+1..t (clamped to frame 0) and actions t..t+K-1 (idle-padded)."""
    fidx = [max(0, t - frames + 1 + j) for j in range(frames)]
    acts = np.tile(IDLE_ACTION, (chunk, 1))
    avail = rec.actions[t:t + chunk]
    acts[:len(avail)] = avail
    return rec.images[fidx], acts
