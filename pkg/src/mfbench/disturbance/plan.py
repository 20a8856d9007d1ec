"""Temporal schedules and per-trial disturbance plans.

Plan file (JSON)::

    {"format": "mfbench-plan/1", "trial_id": str, "family": str,
     "category": str, "schedule": {"disturbed": int, "clean": int,
     "mode": str}, "horizon": int, "phase": int,
     "frames": [{"frame": int, "disturbed": bool,
                 "params": {...} | null, "seed": "0x%016x" | null}, ...]}

Seeds are hex strings so 64-bit values survive any JSON reader.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from mfbench.disturbance.families import (
    CATEGORY,
    DisturbanceContext,
    DisturbanceSpec,
    apply_disturbance,
    sample_params,
)
from mfbench.disturbance.rng import SplitMix64, derive_trial_seed
from mfbench.errors import ConfigError

PLAN_FORMAT = "mfbench-plan/1"


@dataclass(frozen=True)
class TemporalSchedule:
    """Disturbed:clean frame ratio, e.g. 1:0 constant, 1:1 cyclic, 1:3 sparse."""

    disturbed: int
    clean: int

    def __post_init__(self):
        if self.disturbed < 0 or self.clean < 0 or self.disturbed + self.clean == 0:
            raise ConfigError(f"invalid ratio {self.disturbed}:{self.clean}")
        if self.disturbed != 1 or self.clean == 2:
            raise ConfigError(f"ratio {self.disturbed}:{self.clean} is not constant (1:0), "
                              "cyclic (1:1) or sparse (1:3+)")

    @property
    def mode(self) -> str:
        if self.clean == 0:
            return "constant"
        return "cyclic" if self.clean == 1 else "sparse"

    @property
    def label(self) -> str:
        return f"{self.disturbed}:{self.clean}"

    @classmethod
    def parse(cls, text: str) -> TemporalSchedule:
        try:
            a, b = (int(x) for x in str(text).split(":"))
        except ValueError:
            raise ConfigError(f"bad ratio {text!r}, expected like '1:3'") from None
        return cls(a, b)

    def to_dict(self) -> dict:
        return {"disturbed": self.disturbed, "clean": self.clean, "mode": self.mode}


def schedule_mask(schedule: TemporalSchedule, horizon: int, phase: int = 0) -> list[bool]:
    """Frame k is disturbed iff (k + phase) mod period falls in the first
    ``disturbed`` slots of its period."""
    if horizon < 1:
        raise ConfigError("horizon must be >= 1")
    period = schedule.disturbed + schedule.clean
    return [(k + phase) % period < schedule.disturbed for k in range(horizon)]


@dataclass
class FrameDecision:
    frame: int
    disturbed: bool
    spec: DisturbanceSpec | None = None
    seed: int | None = None


@dataclass
class DisturbancePlan:
    trial_id: str
    family: str
    schedule: TemporalSchedule
    horizon: int
    phase: int = 0
    frames: list[FrameDecision] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "format": PLAN_FORMAT, "trial_id": self.trial_id, "family": self.family,
            "category": CATEGORY[self.family], "schedule": self.schedule.to_dict(),
            "horizon": self.horizon, "phase": self.phase,
            "frames": [{"frame": d.frame, "disturbed": d.disturbed,
                        "params": d.spec.to_dict()["params"] if d.spec else None,
                        "seed": f"0x{d.seed:016x}" if d.seed is not None else None}
                       for d in self.frames],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict) -> DisturbancePlan:
        if d.get("format") != PLAN_FORMAT:
            raise ConfigError("not a disturbance plan")
        sched = TemporalSchedule(d["schedule"]["disturbed"], d["schedule"]["clean"])
        frames = [FrameDecision(
            f["frame"], f["disturbed"],
            DisturbanceSpec.from_dict({"family": d["family"], "params": f["params"]})
            if f["params"] is not None else None,
            int(f["seed"], 16) if f["seed"] is not None else None) for f in d["frames"]]
        return cls(d["trial_id"], d["family"], sched, d["horizon"], d["phase"], frames)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path: str | Path) -> DisturbancePlan:
        return cls.from_dict(json.loads(Path(path).read_text()))

    def disturbed_frames(self) -> list[int]:
        return [d.frame for d in self.frames if d.disturbed]


def plan_trial(trial_id: str, family: str, schedule: TemporalSchedule, horizon: int,
               phase: int = 0) -> DisturbancePlan:
    """Resolve mask and per-frame parameters eagerly from the trial-id seed.

    Each disturbed frame draws its parameters, then a 64-bit seed for the
    pixel-level randomness used when the disturbance is applied.
    """
    if family not in CATEGORY:
        raise ConfigError(f"unknown disturbance family {family!r}")
    rng = SplitMix64(derive_trial_seed(trial_id))
    frames = []
    for k, hit in enumerate(schedule_mask(schedule, horizon, phase)):
        if hit:
            spec = sample_params(family, rng)
            frames.append(FrameDecision(k, True, spec, rng.next_u64()))
        else:
            frames.append(FrameDecision(k, False))
    return DisturbancePlan(trial_id, family, schedule, horizon, phase, frames)


class PlanPlayer:
    """Applies a plan frame by frame and tracks the last clean frame."""

    def __init__(self, plan: DisturbancePlan | None):
        self.plan = plan
        self.ctx = DisturbanceContext()

    def observe(self, frame: int, image: np.ndarray) -> np.ndarray:
        d = None
        if self.plan is not None and frame < len(self.plan.frames):
            d = self.plan.frames[frame]
        if d is None or not d.disturbed:
            self.ctx.last_clean = image.copy()
            return image
        return apply_disturbance(image, d.spec, self.ctx, SplitMix64(d.seed))
