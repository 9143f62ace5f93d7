import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from alertlab import experiment  # noqa: E402

REFERENCE_RULES = {
    "Base90": "alert: Base90\nexpr: errorRate[90s] > 0.03\n",
    "Win120": "alert: Win120\nexpr: errorRate[120s] > 0.03\n",
    "For60": "alert: For60\nexpr: errorRate[90s] > 0.03\nfor: 60s\n",
}


@pytest.fixture(scope="session")
def reference_spec():
    return experiment.load_reference_spec()


@pytest.fixture(scope="session")
def reference_result(reference_spec):
    return experiment.run_experiment(reference_spec)


_acceptance_lines: list[str] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if item.module.__name__.endswith("test_acceptance") and rep.when == "call":
        doc = (item.function.__doc__ or item.name).strip().splitlines()[0]
        _acceptance_lines.append(f"{'PASS' if rep.passed else 'FAIL'}  {doc}")


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
