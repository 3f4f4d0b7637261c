"""Collects acceptance-criterion outcomes and prints one line per criterion."""

_criteria: dict[str, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    detail = dict(report.user_properties).get("detail", "")
    if report.when == "call" or report.skipped:
        outcome = "SKIP" if report.skipped else ("PASS" if report.passed else "FAIL")
        if report.skipped and isinstance(report.longrepr, tuple):
            detail = report.longrepr[2].removeprefix("Skipped: ")
        _criteria[name] = (outcome, detail)
    elif report.failed:
        _criteria[name] = ("FAIL", f"{report.when} error")


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_criteria, key=lambda n: int(n.split("_")[2])):
        outcome, detail = _criteria[name]
        terminalreporter.write_line(f"{outcome:4}  {name}  {detail}".rstrip())
