import numpy as np
import pytest

from diffuse_cpf.core import make_rng
from diffuse_cpf.models import NoisyAR, NoisyArParams, simulate_noisy_ar


@pytest.fixture
def rng():
    return make_rng(12345)


@pytest.fixture(scope="session")
def rw_small():
    """RW model with T=10, proper prior sigma_1=3."""
    p = NoisyArParams(rho=1.0, sigma_x=1.0, sigma_y=1.0, sigma_1=3.0)
    y, x = simulate_noisy_ar(p, 10, 0.0, make_rng(7, "data"))
    return NoisyAR(p, y)


def pytest_report_header(config):
    return f"numpy {np.__version__}"


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion."""

    def record(cid, ok, detail):
        line = f"criterion {cid:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        ACCEPTANCE_LINES.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
