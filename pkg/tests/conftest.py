import numpy as np
import pytest
from hypothesis import settings

from thiele.lifestate import TransitionModel, reference_mortality
from thiele.shortrate import reference_vasicek

settings.register_profile("default", deadline=None, max_examples=25)
settings.load_profile("default")


@pytest.fixture(scope="session")
def mortality():
    return reference_mortality()


@pytest.fixture(scope="session")
def life(mortality):
    return TransitionModel.two_state(mortality)


@pytest.fixture(scope="session")
def model():
    return reference_vasicek()


@pytest.fixture(scope="session")
def no_mortality():
    return TransitionModel.constant(("alive", "dead"), np.zeros((2, 2)))


_verdicts = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, text): numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    rep = (yield).get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when == "teardown":
        return
    n, text = mark.args
    if rep.when == "call" or rep.failed:
        _verdicts[n] = (text, "PASS" if rep.passed else "FAIL")


def pytest_terminal_summary(terminalreporter):
    if not _verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_verdicts):
        text, verdict = _verdicts[n]
        terminalreporter.write_line(f"criterion {n:>2}: {verdict}  {text}")
