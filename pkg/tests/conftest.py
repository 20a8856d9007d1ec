import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_config():
    from mfbench.policy import ModelConfig

    return ModelConfig(feature_dim=8, decoder_dim=8, frames=3, chunk_len=2, decoder_layers=1,
                       heads=2, encoder_heads=2, encoder_layers=1, diffusion_steps=5)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance():
    """Record one pass/fail line per criterion; repeated in the terminal summary."""

    def record(number: int, title: str, passed: bool, detail: str) -> bool:
        line = f"ACCEPTANCE {number} {'PASS' if passed else 'FAIL'} {title}: {detail}"
        print(line)
        ACCEPTANCE_LINES.append(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
