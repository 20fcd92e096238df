import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fbcap import channel as chmod
from fbcap.processes import NoiseModel

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", deadline=None, max_examples=400,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def gated_xor(xs, zs):
    """m=1 test channel: the output sees the noise difference only when the input repeats."""
    return (xs[1] ^ zs[0] ^ zs[1]) if xs[0] == xs[1] else zs[1]


@pytest.fixture
def bsc():
    return chmod.SlidingBlockChannel.additive(2)


@pytest.fixture
def bern011():
    return NoiseModel.iid([0.89, 0.11])


@pytest.fixture
def memory_channel():
    return chmod.SlidingBlockChannel.from_function(1, 2, 2, 2, gated_xor)


@pytest.fixture
def sticky_noise():
    return NoiseModel.symmetric_markov(0.9)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES] = []


@pytest.fixture
def criterion(request, capsys):
    """Record and print one PASS/FAIL line for a numbered acceptance criterion."""
    def report(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        request.config.stash[_LINES].append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok
    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
