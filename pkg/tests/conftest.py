"""Collect outcomes of tests marked ``criterion`` and print one line per criterion."""

from __future__ import annotations

import pytest

_RESULTS: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, description): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    num, desc = mark.args
    entry = _RESULTS.setdefault(num, {"desc": desc, "ok": True, "notes": []})
    if rep.when == "call" or rep.failed:
        if hasattr(rep, "wasxfail"):
            entry["ok"] = False
            entry["notes"].append(f"expected failure: {rep.wasxfail}")
        elif rep.failed:
            entry["ok"] = False
        elif rep.skipped:
            entry["ok"] = False
            entry["notes"].append("skipped")


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_RESULTS):
        e = _RESULTS[num]
        line = f"Criterion {num}: {'PASS' if e['ok'] else 'FAIL'} - {e['desc']}"
        if e["notes"]:
            line += f" ({'; '.join(sorted(set(e['notes'])))})"
        terminalreporter.write_line(line)
