import json
import sys
from pathlib import Path

import pytest

REPO = Path(__file__).resolve().parent.parent
SCENARIOS = REPO / "scenarios"
sys.path.insert(0, str(Path(__file__).resolve().parent))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def scenarios_dir():
    return SCENARIOS


def load_scenario_doc(name):
    with open(SCENARIOS / f"{name}.json") as f:
        return json.load(f)
