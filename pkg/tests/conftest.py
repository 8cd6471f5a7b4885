import json
from pathlib import Path

import pytest

from swarmform.world import Scenario, scenario_from_dict

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"

TRIANGLE = "-1 2 -1\n-1 0 -1\n1 -1 3"
WEDGE = " 1  2  3  4  5 -1\n-1  6  7  0  8  9"


def load_scenario(name: str, **overrides) -> Scenario:
    """Load a shipped scenario file, optionally overriding top-level keys."""
    path = SCENARIO_DIR / name
    doc = json.loads(path.read_text(encoding="utf-8"))
    doc.update(overrides)
    return scenario_from_dict(doc, base_dir=SCENARIO_DIR)


@pytest.fixture(scope="session")
def scenario_dir() -> Path:
    return SCENARIO_DIR
