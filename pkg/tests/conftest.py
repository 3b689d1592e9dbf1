import math

import pytest
from hypothesis import settings

from qedmodel import ModelParams, tp1

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")

AXP_2010 = dict(theta=-1.6485, sigma=0.0318, kappa=-4.9464, g=3.7041)


@pytest.fixture
def axp():
    return ModelParams(**AXP_2010)


@pytest.fixture
def tp1_002():
    return tp1(0.02)


@pytest.fixture
def confining():
    # theta_bar > 0: normalizable, unbroken SUSY
    return ModelParams(theta=0.3, kappa=0.1, g=0.01, sigma=0.25)


def rel(a, b):
    return abs(a - b) / abs(b)


def sigma_of(s2):
    return math.sqrt(s2)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per criterion; echoed in the terminal summary."""

    def record(number: int, title: str, checks: dict, runtime: float, budget: float) -> bool:
        checks = dict(checks, runtime=(runtime <= budget, f"{runtime:.3g}s <= {budget:g}s"))
        ok = all(flag for flag, _ in checks.values())
        detail = "; ".join(f"{k}: {msg}{'' if flag else ' [FAIL]'}" for k, (flag, msg) in checks.items())
        line = f"criterion {number} {'PASS' if ok else 'FAIL'} {title} | {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
