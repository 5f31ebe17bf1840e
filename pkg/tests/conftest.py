import numpy as np
import pytest

from partial_ia.channels import gen_fig3_example


@pytest.fixture(scope="session")
def fig3():
    return gen_fig3_example(seed=0)


def random_complex(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


def record_criterion(label: str, ok: bool, detail: str) -> None:
    """Print and keep one PASS/FAIL line, then fail the test if needed."""
    line = f"{'PASS' if ok else 'FAIL'} {label}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
