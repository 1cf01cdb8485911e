import numpy as np
import pytest
from hypothesis import settings

from cablequad.dynamics import CableParams, QuadParams
from cablequad.flatness import FlatOutputsSingle, flat_single
from cablequad.signals import Constant, lissajous

settings.register_profile("default", max_examples=50, deadline=None)
settings.load_profile("default")

# acceptance outcomes, printed as one line per criterion at the end of the run
_ACCEPTANCE = {}


@pytest.fixture(scope="session")
def qp():
    return QuadParams()


@pytest.fixture(scope="session")
def cp5():
    return CableParams.uniform(5)


@pytest.fixture(scope="session")
def fo_liss():
    return FlatOutputsSingle(lissajous(), Constant(0.0))


@pytest.fixture(scope="session")
def fo_hover():
    from cablequad.signals import VecSignal
    return FlatOutputsSingle(VecSignal(0.0, 0.0, 0.0), Constant(0.0))


@pytest.fixture(scope="session")
def ref_point(qp, cp5, fo_liss):
    """Reference at t = 0.5 s along the Lissajous path."""
    return flat_single(fo_liss, qp, cp5, 0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _ACCEPTANCE[name] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE, key=lambda s: int(s.split("_")[2])):
        outcome = {"passed": "PASS", "failed": "FAIL"}.get(_ACCEPTANCE[name], _ACCEPTANCE[name].upper())
        terminalreporter.write_line(f"{outcome:5s} {name}")
