"""Success rate and R-Score, both reported half-up to one decimal."""

from __future__ import annotations

from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable

from mfbench.errors import ScoreError


def round_half_up(value: float, places: int = 1) -> float:
    """Round the shortest decimal repr of ``value`` half-up.

    Going through ``repr`` means 96.25 rounds to 96.3 even though the binary
    double sits just below it.
    """
    q = Decimal(1).scaleb(-places)
    return float(Decimal(repr(float(value))).quantize(q, rounding=ROUND_HALF_UP))


def success_rate(results: Iterable) -> float:
    """100 * successes / trials. Accepts TrialResults or plain booleans."""
    flags = [bool(getattr(r, "success", r)) for r in results]
    if not flags:
        raise ScoreError("success rate of zero trials is undefined")
    return round_half_up(100.0 * sum(flags) / len(flags))


def r_score_raw(sr_i: float, sr_baseline: float) -> float:
    if not sr_baseline > 0:
        raise ScoreError(f"R-Score undefined for baseline success rate {sr_baseline}")
    return 100.0 * sr_i / sr_baseline


def r_score(sr_i: float, sr_baseline: float) -> float:
    """100 * SR^i / SR, rounded half-up to one decimal."""
    return round_half_up(r_score_raw(sr_i, sr_baseline))
