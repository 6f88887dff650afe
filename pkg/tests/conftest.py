import pathlib

import pytest

from planhorizon import tasks

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> pathlib.Path:
    return FIXTURES


@pytest.fixture(scope="session")
def kopl_dataset():
    return tasks.load_dataset(FIXTURES / "kopl_tasks.json")


@pytest.fixture(scope="session")
def atomic_dataset():
    return tasks.load_dataset(FIXTURES / "atomic_tasks.json")


@pytest.fixture(scope="session")
def mock_dataset():
    return tasks.load_dataset(FIXTURES / "mock_tasks.json")
