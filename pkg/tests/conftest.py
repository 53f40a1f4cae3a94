import warnings

import pytest

from kfbi_stokes.geometry import GeometryWarning

ACCEPTANCE_LINES = {}


def report_criterion(number, ok, detail):
    """Record one pass/fail line for the acceptance summary."""
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture(autouse=True)
def _quiet_geometry():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GeometryWarning)
        yield
