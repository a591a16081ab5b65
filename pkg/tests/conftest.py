import numpy as np
import pytest

# criterion number -> [title, set of outcomes]
_CRITERIA: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion a test covers")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    entry = _CRITERIA.setdefault(number, [title, set()])
    if rep.failed:
        entry[1].add("FAIL")
    elif rep.skipped:
        entry[1].add("SKIP")
    elif rep.when == "call":
        entry[1].add("PASS")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, seen = _CRITERIA[number]
        status = "FAIL" if "FAIL" in seen else "PASS" if "PASS" in seen else "SKIP"
        terminalreporter.write_line(f"{status}  criterion {number:>2}: {title}")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
