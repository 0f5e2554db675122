"""Suite-wide fixtures and the acceptance summary banner."""

from __future__ import annotations

import pytest

ACCEPTANCE_PREFIX = "tests/test_acceptance.py::test_criterion_"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Print one PASS/FAIL line per acceptance criterion at the end of the
    run, derived from the actual test outcomes."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, ()):
            nodeid = getattr(report, "nodeid", "")
            if ACCEPTANCE_PREFIX not in nodeid.replace("\\", "/"):
                continue
            name = nodeid.split("::")[-1]
            verdict = "PASS" if outcome == "passed" else "FAIL"
            lines.append((name, verdict))
    if not lines:
        return
    lines.sort()
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, verdict in lines:
        terminalreporter.write_line(f"{verdict}  {name}")


@pytest.fixture(scope="session")
def sweep_grid_rows():
    """The 12-cell scenario grid, shared by the trend and rate-cap checks."""
    from mixplan.scenarios import ScenarioSpec, sweep

    specs = [
        ScenarioSpec(kind=kind, distribution=dist, participant_count=n)
        for kind, ns in (("odl", (100, 200, 500)), ("mmog", (100, 2000, 3000)))
        for dist in ("homogeneous", "heterogeneous")
        for n in ns
    ]
    return sweep(specs)
