"""Collects outcomes of tests marked ``criterion`` and prints one verdict line per criterion."""

import pytest

_VERDICTS: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by this test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (report.when != "call" and not report.failed):
        return
    number, title = marker.args
    entry = _VERDICTS.setdefault(number, {"title": title, "ok": True, "notes": []})
    if report.when == "call" and hasattr(report, "wasxfail"):
        entry["ok"] = False
        entry["notes"].append(f"{item.name}: expected failure ({report.wasxfail})")
    elif report.failed:
        entry["ok"] = False
        entry["notes"].append(f"{item.name}: failed")
    for key, value in item.user_properties:
        if key == "detail":
            entry["notes"].append(value)


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_VERDICTS):
        entry = _VERDICTS[number]
        verdict = "PASS" if entry["ok"] else "FAIL"
        terminalreporter.write_line(f"criterion {number} {verdict}: {entry['title']}")
        for note in entry["notes"]:
            terminalreporter.write_line(f"    {note}")
