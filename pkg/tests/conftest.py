"""Shared test fixtures: paths to the bundled data files."""

import os

import pytest

DATA_DIR = os.path.join(
    os.path.dirname(__file__), os.pardir, "src", "privforge", "data"
)


def data_path(name: str) -> str:
    return os.path.abspath(os.path.join(DATA_DIR, name))


@pytest.fixture(scope="session")
def mini_corpus_path() -> str:
    return data_path("mini_corpus.jsonl")


@pytest.fixture(scope="session")
def prompts_path() -> str:
    return data_path("prompts.txt")


@pytest.fixture(scope="session")
def tasks_path() -> str:
    return data_path("benchmark_tasks.jsonl")


@pytest.fixture(scope="session")
def canaries_path() -> str:
    return data_path("canaries.jsonl")


@pytest.fixture(scope="session")
def prose_path() -> str:
    return data_path("prose_corpus.txt")
