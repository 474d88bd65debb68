import importlib

import pytest

from committee_sortition import _pykernels


def _compiled():
    try:
        return importlib.import_module("committee_sortition._kernels")
    except ImportError:
        return None


BACKENDS = [pytest.param(_pykernels, id="python")]
if _compiled() is not None:
    BACKENDS.append(pytest.param(_compiled(), id="cython"))


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture
def compiled():
    mod = _compiled()
    if mod is None:
        pytest.skip("compiled kernels not built")
    return mod


_CRITERIA = []


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    mark = getattr(report, "criterion", None)
    if mark is not None:
        _CRITERIA.append((mark, report.outcome))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        report.criterion = mark.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for label, outcome in _CRITERIA:
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"[{status}] {label}")
