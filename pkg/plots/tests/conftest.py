from pathlib import Path

import pytest

from fixture_data import FIXTURES


@pytest.fixture(scope="session")
def fixtures() -> Path:
    return FIXTURES
