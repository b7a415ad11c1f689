import pathlib
import sys

import pytest

sys.path.insert(0, str(pathlib.Path(__file__).parent))  # for `reference`

from protoverb.store import load_dataset

FIXTURE_PATH = pathlib.Path(__file__).parent / "data" / "fixture_4c.ndjson"


@pytest.fixture(scope="session")
def fixture_path():
    return str(FIXTURE_PATH)


@pytest.fixture(scope="session")
def fixture_dataset():
    return load_dataset(str(FIXTURE_PATH))
