from __future__ import annotations


def pytest_runtest_logreport(report):
    """One pass/fail line per acceptance criterion, straight to the terminal."""
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    label = name.removeprefix("test_criterion_").replace("_", " ")
    verdict = "PASS" if report.passed else "FAIL"
    print(f"\n[{verdict}] acceptance: {label}", flush=True)
