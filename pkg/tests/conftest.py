import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from wmlimits.process_models import SequencePmf

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@st.composite
def pmf_vectors(draw, min_size=2, max_size=8, allow_zero=False):
    """Random probability vectors built from integer weights, so sums are exact-ish."""
    size = draw(st.integers(min_size, max_size))
    low = 0 if allow_zero else 1
    weights = draw(st.lists(st.integers(low, 1000), min_size=size, max_size=size))
    if sum(weights) == 0:
        weights[0] = 1
    probs = np.array(weights, dtype=float)
    return probs / probs.sum()


def pmf(values) -> SequencePmf:
    return SequencePmf.from_vector(np.asarray(values, dtype=float))


@pytest.fixture
def uniform4() -> SequencePmf:
    return pmf([0.25] * 4)


@pytest.fixture
def skewed3() -> SequencePmf:
    return pmf([0.5, 0.3, 0.2])


@pytest.fixture
def merge_example() -> SequencePmf:
    return pmf([0.5, 0.17, 0.17, 0.16])


# one line per acceptance criterion, filled by tests/test_acceptance.py
ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def criterion():
    def record(number: int, passed: bool, detail: str) -> None:
        ACCEPTANCE_LINES[number] = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        assert passed, detail

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
