import pytest
from hypothesis import given
from hypothesis import strategies as st

from mfbench.bench import ComplexityModel, attention_cost, naive_over_warm
from mfbench.bench.metrics import r_score, r_score_raw, round_half_up, success_rate
from mfbench.errors import ConfigError, ScoreError


def test_r_score_reference_pairs():
    assert r_score(58.1, 60.4) == 96.2
    assert r_score(29.4, 55.2) == 53.3


def test_half_up_rounding():
    assert round_half_up(96.25) == 96.3
    assert round_half_up(0.05) == 0.1
    assert round_half_up(-0.05) == -0.1
    assert round_half_up(2.675, 2) == 2.68


def test_success_rate():
    assert success_rate([True] * 29 + [False] * 19) == 60.4
    assert success_rate([True, True]) == 100.0
    with pytest.raises(ScoreError):
        success_rate([])


def test_zero_baseline_is_an_error():
    with pytest.raises(ScoreError):
        r_score(10.0, 0.0)


@given(st.floats(0, 100), st.floats(0.1, 100))
def test_r_score_within_half_ulp_of_raw(sr, base):
    assert abs(r_score(sr, base) - r_score_raw(sr, base)) <= 0.05 + 1e-9


@given(st.floats(0.1, 100))
def test_r_score_of_baseline_is_100(base):
    assert r_score(base, base) == 100.0


def test_complexity_reference_ratio():
    m = ComplexityModel(256, 16, 6)
    assert naive_over_warm(m) == pytest.approx(((7 * 256 + 16) / (256 + 16)) ** 2, rel=1e-12)
    assert f"{naive_over_warm(m):.3g}" == "44.2"
    assert attention_cost(m, "chunked") == 7 * 272 ** 2


@given(st.integers(1, 512), st.integers(1, 64), st.integers(0, 10))
def test_complexity_shape(p, i, m):
    model = ComplexityModel(p, i, m)
    warm = attention_cost(model, "chunked_warm")
    assert warm == (p + i) ** 2
    assert attention_cost(model, "chunked") == (m + 1) * warm
    assert attention_cost(model, "naive_multiframe") >= warm
    more = ComplexityModel(p, i, m + 1)
    assert attention_cost(more, "naive_multiframe") > attention_cost(model, "naive_multiframe")
    assert attention_cost(more, "chunked_warm") == warm


def test_complexity_errors():
    with pytest.raises(ConfigError):
        ComplexityModel(0, 1, 1)
    with pytest.raises(ConfigError):
        ComplexityModel(1, 1, -1)
    with pytest.raises(ConfigError):
        attention_cost(ComplexityModel(1, 1, 1), "sparse")
