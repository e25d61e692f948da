import json
from pathlib import Path

import pytest

CASSETTES = Path(__file__).parent / "cassettes"


@pytest.fixture(scope="session")
def manifest():
    return json.loads((CASSETTES / "manifest.json").read_text())


@pytest.fixture(scope="session")
def cassette_dir():
    return CASSETTES
