import pytest

from tscopypaste import geometry


@pytest.fixture(params=geometry.available())
def backend(request):
    """Run the test once per available kernel backend."""
    previous = geometry.use_backend(request.param)
    yield request.param
    geometry.use_backend(previous)


@pytest.fixture(autouse=True)
def _restore_backend():
    # the CLI's --pure-python flag switches the process-wide backend
    previous = geometry.backend()
    yield
    geometry.use_backend(previous)


_CRITERIA = {}


@pytest.fixture
def criterion(request):
    """Attach (number, title, detail) to the test so the summary can list it."""
    def note(number, title, detail=""):
        request.node.user_properties.append(("criterion", (number, title, detail)))
    return note


def pytest_runtest_logreport(report):
    for key, value in report.user_properties:
        if key == "criterion" and report.when == "call":
            number, title, detail = value
            _CRITERIA[number] = (title, report.outcome, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, outcome, detail = _CRITERIA[number]
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {number} {title}: {verdict}  {detail}")
