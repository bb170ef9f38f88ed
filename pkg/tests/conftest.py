import numpy as np
import pytest

from stablehomog import kernel as K


@pytest.fixture(scope="session")
def additive():
    return K.additive_cosine()


@pytest.fixture(scope="session")
def product():
    return K.product_cosine()


@pytest.fixture(scope="session")
def unit():
    return K.constant_kernel(1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE_LINES = []


@pytest.fixture
def verdict(capsys):
    """Record and print one PASS/FAIL line per acceptance criterion."""
    def emit(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print("\n    " + line)
        return ok
    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
