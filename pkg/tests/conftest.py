"""Shared fixtures plus a terminal summary of the acceptance suite.

Acceptance tests are named ``test_c<NN>_*``; the summary prints one
PASS/FAIL line per criterion, aggregating over all tests that share the
criterion prefix.
"""

import re

import numpy as np
import pytest

CRITERIA_LABELS = {
    "c01": "kernel correctness",
    "c02": "analytic gradient checks",
    "c03": "posterior/likelihood oracle",
    "c04": "interpolation and prior reversion",
    "c05": "synthetic GPR-vs-LASSO benchmark",
    "c06": "published percent-error tables",
    "c07": "crash-metric identities",
    "c08": "LHS stratification",
    "c09": "MC propagation analytic check",
    "c10": "LASSO optimality and recovery",
    "c11": "reproducibility and pipeline runtime",
}

_CRITERION_RE = re.compile(r"test_acceptance\.py::test_(c\d\d)_")


def pytest_configure(config):
    config._acceptance_outcomes = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    match = _CRITERION_RE.search(report.nodeid)
    if match and report.when == "call":
        store = item.config._acceptance_outcomes
        key = match.group(1)
        store.setdefault(key, []).append(report.passed)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    outcomes = getattr(config, "_acceptance_outcomes", {})
    if not outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for key in sorted(CRITERIA_LABELS):
        if key not in outcomes:
            continue
        verdict = "PASS" if all(outcomes[key]) else "FAIL"
        label = CRITERIA_LABELS[key]
        tr.write_line(f"  {key} {label:.<45s} {verdict}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)
