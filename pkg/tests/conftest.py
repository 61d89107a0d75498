from fractions import Fraction

import pytest

from nifldp.core_model import DataPoint, Dataset, initial_infrastructure
from nifldp.learning import DiscreteLaplace, Grid, LearningConfig, LossModel
from nifldp.transition import System

# Filled by tests/test_acceptance.py, printed after the run.
ACCEPTANCE_RESULTS: dict[str, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE_RESULTS, key=lambda n: int(n.split()[0])):
        ok, detail = ACCEPTANCE_RESULTS[name]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {name}: {detail}")


def pt(pid, value, *features, secret=False):
    return DataPoint(pid, tuple(Fraction(f) for f in features), Fraction(value), secret=secret)


def ds(*points):
    return Dataset.of(*points)


@pytest.fixture
def one_client():
    return initial_infrastructure({"c1": ds(pt("p1", 3))}, [0])


@pytest.fixture
def noiseless():
    return System(LearningConfig(eta=Fraction(1)))


def noisy_system(t=Fraction(1, 2), s=1, lo=-10, hi=10, q=1, rounds=1, model=LossModel.MEAN_ESTIMATION):
    cfg = LearningConfig(eta=Fraction(1), rounds=rounds, grid=Grid(Fraction(q), Fraction(lo), Fraction(hi)))
    return System(cfg, model, mech=DiscreteLaplace(Fraction(t), s))
