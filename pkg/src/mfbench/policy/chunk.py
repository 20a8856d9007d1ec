from __future__ import annotations

from collections import deque

import numpy as np

from mfbench.errors import DimensionError, StateError


class FeatureChunk:
    """FIFO of the last M per-frame features, oldest first.

    The first push of an episode fills every slot with that feature, so the
    chunk always holds exactly M entries once anything has been pushed.
    """

    def __init__(self, frames: int, dim: int):
        self.frames = frames
        self.dim = dim
        self._buf: deque[np.ndarray] = deque(maxlen=frames)
        self.steps: deque[int] = deque(maxlen=frames)
        self.pushes = 0

    def __len__(self) -> int:
        return len(self._buf)

    @property
    def full(self) -> bool:
        return len(self._buf) == self.frames

    def push(self, feature: np.ndarray, step: int | None = None) -> FeatureChunk:
        f = np.asarray(feature, dtype=np.float64).reshape(-1)
        if f.size != self.dim:
            raise DimensionError(f"feature of width {f.size}, chunk expects {self.dim}")
        step = self.pushes if step is None else step
        if self.pushes == 0:
            for _ in range(self.frames):
                self._buf.append(f.copy())
                self.steps.append(step)
        else:
            self._buf.append(f.copy())
            self.steps.append(step)
        self.pushes += 1
        return self

    def features(self) -> np.ndarray:
        if not self.full:
            raise StateError("feature chunk is empty")
        return np.stack(self._buf)


def push_feature(chunk: FeatureChunk, feature: np.ndarray) -> FeatureChunk:
    return chunk.push(feature)
