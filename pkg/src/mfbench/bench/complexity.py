"""Attention cost model: naive multi-image encoding vs. cached single frames."""

from __future__ import annotations

from dataclasses import dataclass

from mfbench.errors import ConfigError

MODES = ("naive_multiframe", "chunked", "chunked_warm")


@dataclass(frozen=True)
class ComplexityModel:
    """``past_frames`` is M, the number of frames besides the current one."""

    patch_tokens: int
    instruction_tokens: int
    past_frames: int

    def __post_init__(self):
        if self.patch_tokens < 1 or self.instruction_tokens < 1:
            raise ConfigError("token counts must be positive")
        if self.past_frames < 0:
            raise ConfigError("past_frames must be >= 0")

    @property
    def frames(self) -> int:
        return self.past_frames + 1


def attention_cost(model: ComplexityModel, mode: str = "naive_multiframe") -> int:
    """Quadratic self-attention cost in token-pair units.

    naive_multiframe: all frames in one sequence, ((M+1)P + I)^2.
    chunked: cold start, every frame encoded alone, (M+1)(P + I)^2.
    chunked_warm: one new frame per step, (P + I)^2.
    """
    p, i, m = model.patch_tokens, model.instruction_tokens, model.past_frames
    if mode == "naive_multiframe":
        return ((m + 1) * p + i) ** 2
    if mode == "chunked":
        return (m + 1) * (p + i) ** 2
    if mode == "chunked_warm":
        return (p + i) ** 2
    raise ConfigError(f"unknown mode {mode!r}, expected one of {MODES}")


def naive_over_warm(model: ComplexityModel) -> float:
    return attention_cost(model, "naive_multiframe") / attention_cost(model, "chunked_warm")
