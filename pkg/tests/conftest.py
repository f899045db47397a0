import json
from pathlib import Path

import pytest

from geoproof.dataset import load_problem, load_theorem_dictionary
from geoproof.synth import corpus_problems

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(scope="session")
def dictionary():
    return load_theorem_dictionary()


@pytest.fixture(scope="session")
def nested():
    """Two nested parallels cutting a triangle; CE = 9."""
    return load_problem(json.loads((FIXTURES / "nested_parallels.json").read_text()))


@pytest.fixture(scope="session")
def small_corpus():
    return corpus_problems(300, seed=7)


def fixture_problem(name: str):
    return load_problem(json.loads((FIXTURES / name).read_text()))


@pytest.fixture(scope="session")
def desk_corpus():
    return corpus_problems(1200, seed=0)


@pytest.fixture(scope="session")
def desk_model(desk_corpus):
    from geoproof.analogy import build_pair_dataset, train_regressor

    return train_regressor(build_pair_dataset(desk_corpus, seed=0), seed=0)


ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
