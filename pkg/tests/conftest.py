import numpy as np
import pytest

from conenorm.grid import GridConfig
from conenorm.hardy import HardyProblem
from conenorm.measure import ExpDensity, GammaDensity, PowerDensity
from conenorm.oracle import OracleConfig
from conenorm.shapes import ONE, PowerShape

#: modest oracle budget for a suite that must finish in minutes on one core
FAST_ORACLE = OracleConfig(samples=300, hill_climb_steps=100, extremal_points=512, quad_points=512)


def random_exact_hardy(rng) -> HardyProblem:
    """A Hardy problem with p <= min(q, r) whose extremal supremum is finite."""
    p = rng.uniform(0.5, 2.0)
    q, r = p * rng.uniform(1, 2), p * rng.uniform(1, 2)
    kappa = 0.0 if rng.random() < 0.5 else rng.uniform(-0.3, 0.8)
    k = ONE if kappa == 0 else PowerShape(kappa)
    power_mu = rng.random() < 0.6
    am = rng.uniform(-0.5, 1.0)
    mu = PowerDensity(am) if power_mu else ExpDensity(rng.uniform(0.2, 2))
    growth = (kappa * r + (am if power_mu else 0.0) + 1) / r
    top = growth * p - kappa * p - 1
    # keep the beta exponent margin so that omega_kp(+0) = 0 holds comfortably
    lo = max(0.3 - 1 - kappa * p, top - 1.0)
    ab = rng.uniform(lo, max(lo, top))
    gamma = ExpDensity(rng.uniform(0.3, 3)) if rng.random() < 0.5 else \
        GammaDensity(rng.uniform(-0.5, 2), rng.uniform(0.3, 3))
    return HardyProblem(p, q, r, gamma, k, PowerDensity(ab), mu)


@pytest.fixture
def grid():
    return GridConfig()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_CRITERIA = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_CRITERIA] = []


@pytest.fixture
def criterion(request):
    """Record one pass/fail line for an acceptance criterion, then assert it."""
    lines = request.config.stash[_CRITERIA]

    def record(number: int, ok: bool, detail: str):
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        lines.append((number, line))
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_CRITERIA, [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
