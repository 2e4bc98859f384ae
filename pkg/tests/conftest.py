"""Collects acceptance outcomes and prints one line per criterion at the end of the run."""

CRITERIA = {}
OUTCOMES = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion check")


def pytest_collection_modifyitems(items):
    for item in items:
        marker = item.get_closest_marker("criterion")
        if marker is not None:
            CRITERIA[item.nodeid] = marker.args


def pytest_runtest_logreport(report):
    if report.nodeid not in CRITERIA:
        return
    if report.when == "call" or report.failed:
        measured = dict(report.user_properties).get("measured", "")
        OUTCOMES[report.nodeid] = ("PASS" if report.passed else "FAIL", measured)


def pytest_terminal_summary(terminalreporter):
    if not OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, (number, title) in sorted(CRITERIA.items(), key=lambda kv: kv[1][0]):
        if nodeid in OUTCOMES:
            status, measured = OUTCOMES[nodeid]
            line = f"criterion {number}: {status} - {title}"
            terminalreporter.write_line(f"{line} ({measured})" if measured else line)
