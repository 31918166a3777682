"""Shared pytest hooks: one PASS/FAIL summary line per acceptance criterion.

Acceptance tests carry ``@pytest.mark.criterion(k, "title")``. A criterion
passes only when every test carrying its number passes; tests may attach
measured values through the ``criterion_detail`` fixture.
"""

from __future__ import annotations

import pytest

_RESULTS: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(k, title): acceptance criterion number k")


def _entry(item):
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return None
    k, title = mark.args
    return _RESULTS.setdefault(k, {"title": title, "ok": True, "ran": 0, "details": []})


@pytest.fixture
def criterion_detail(request):
    entry = _entry(request.node)

    def add(text: str):
        if entry is not None:
            entry["details"].append(text)

    return add


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    entry = _entry(item)
    if entry is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        entry["ran"] += 1
        if not rep.passed:
            entry["ok"] = False


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k in sorted(_RESULTS):
        e = _RESULTS[k]
        status = "PASS" if e["ok"] and e["ran"] else "FAIL"
        detail = "; ".join(e["details"])
        tr.write_line(f"criterion {k} [{status}] {e['title']}" + (f" -- {detail}" if detail else ""))
