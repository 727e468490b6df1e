import pytest

from nrisk.catalog import load_catalog

_criteria: dict[str, str] = {}


@pytest.fixture(scope="session")
def catalog():
    return load_catalog()


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid or "::test_criterion_" not in report.nodeid:
        return
    name = report.nodeid.split("::test_criterion_", 1)[1]
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _criteria[name] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_criteria):
        number, _, label = name.partition("_")
        terminalreporter.write_line(f"criterion {int(number):>2}  {_criteria[name]}  {label.replace('_', ' ')}")
