"""Shared pytest wiring: print one verdict line per acceptance check."""

from __future__ import annotations


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    del exitstatus, config
    verdicts: dict[str, str] = {}
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py" not in nodeid:
                continue
            if outcome == "passed" and getattr(report, "when", "call") != "call":
                continue
            name = nodeid.split("::")[-1]
            verdict = "PASS" if outcome == "passed" else "FAIL"
            # A failed setup/teardown must not be masked by a passed call.
            if verdicts.get(name) != "FAIL":
                verdicts[name] = verdict
    if verdicts:
        terminalreporter.section("acceptance checks")
        for name in sorted(verdicts):
            terminalreporter.write_line(f"{name}: {verdicts[name]}")
