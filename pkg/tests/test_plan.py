import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mfbench.disturbance import (
    SUPPORTED_RATIOS,
    DisturbancePlan,
    PlanPlayer,
    TemporalSchedule,
    plan_trial,
    schedule_mask,
)
from mfbench.errors import ConfigError


def _mask(text, n=12, phase=0):
    return "".join("D" if m else "c" for m in schedule_mask(TemporalSchedule.parse(text), n, phase))


def test_mask_conventions():
    assert _mask("1:0") == "D" * 12
    assert _mask("1:1") == "Dc" * 6
    assert _mask("1:3") == "Dccc" * 3
    assert _mask("1:5") == "Dccccc" * 2
    assert _mask("1:1", phase=1) == "cD" * 6


@given(st.sampled_from([1, 3, 4, 5, 7]), st.integers(1, 80), st.integers(0, 10))
def test_mask_density(clean, horizon, phase):
    mask = schedule_mask(TemporalSchedule(1, clean), horizon, phase)
    assert len(mask) == horizon
    period = clean + 1
    assert abs(sum(mask) - horizon / period) <= 1
    for k in range(horizon - period):
        assert mask[k] == mask[k + period]


def test_schedule_validation():
    for bad in ("0:0", "2:1", "1:2", "x", "1:1:1"):
        with pytest.raises(ConfigError):
            TemporalSchedule.parse(bad)
    assert TemporalSchedule.parse("1:0").mode == "constant"
    assert TemporalSchedule.parse("1:1").mode == "cyclic"
    assert TemporalSchedule.parse("1:5").mode == "sparse"
    assert all(TemporalSchedule(*r) for rs in SUPPORTED_RATIOS.values() for r in rs)


@given(st.text(min_size=1, max_size=30), st.sampled_from(sorted(SUPPORTED_RATIOS)))
def test_plan_depends_only_on_trial_id(trial_id, family):
    ratio = TemporalSchedule(*SUPPORTED_RATIOS[family][1])
    a = plan_trial(trial_id, family, ratio, 16)
    b = plan_trial(trial_id, family, ratio, 16)
    assert a.dumps() == b.dumps()
    assert DisturbancePlan.from_dict(a.to_dict()).dumps() == a.dumps()
    assert a.disturbed_frames() == [k for k, m in enumerate(schedule_mask(ratio, 16)) if m]


def test_plans_differ_across_trials():
    s = TemporalSchedule(1, 0)
    a = plan_trial("t/1", "impulse_noise", s, 8)
    b = plan_trial("t/2", "impulse_noise", s, 8)
    assert a.dumps() != b.dumps()


def test_plan_file_round_trip(tmp_path):
    p = plan_trial("trial-7", "overexposing", TemporalSchedule(1, 3), 9)
    p.save(tmp_path / "plan.json")
    assert DisturbancePlan.load(tmp_path / "plan.json").dumps() == p.dumps()
    with pytest.raises(ConfigError):
        DisturbancePlan.from_dict({"format": "other"})


def test_player_applies_plan_and_tracks_clean_frames():
    plan = plan_trial("x", "frame_dropping", TemporalSchedule(1, 1), 6, phase=1)
    player = PlanPlayer(plan)
    frames = [np.full((4, 4, 3), 10 * k, np.uint8) for k in range(6)]
    seen = [player.observe(k, f)[0, 0, 0] for k, f in enumerate(frames)]
    assert seen == [0, 0, 20, 20, 40, 40]
    occl = PlanPlayer(plan_trial("x", "full_occlusion", TemporalSchedule(1, 1), 4))
    out = [occl.observe(k, np.full((4, 4, 3), 240, np.uint8))[0, 0, 0] for k in range(4)]
    assert out == [0, 240, 0, 240]
    clean = PlanPlayer(None)
    np.testing.assert_array_equal(clean.observe(0, frames[3]), frames[3])


def test_unknown_family_rejected():
    with pytest.raises(ConfigError):
        plan_trial("x", "rain", TemporalSchedule(1, 1), 4)
