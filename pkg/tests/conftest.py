import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion checked by this test")


@pytest.fixture
def record(request):
    """Attach a short measurement string to the current criterion line."""
    def _record(text):
        request.node.user_properties.append(("detail", text))
    return _record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call" and not rep.failed:
        return
    n, title = mark.args
    details = "; ".join(v for k, v in item.user_properties if k == "detail")
    prev = _RESULTS.get(n)
    passed = rep.passed if rep.when == "call" else False
    if prev is not None:
        passed = passed and prev[1]
        details = "; ".join(d for d in (prev[2], details) if d)
    _RESULTS[n] = (title, passed, details)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_RESULTS):
        title, passed, details = _RESULTS[n]
        line = f"criterion {n} {'PASS' if passed else 'FAIL'}: {title}"
        terminalreporter.write_line(line + (f" ({details})" if details else ""))
