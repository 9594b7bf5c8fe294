from __future__ import annotations

from pathlib import Path

import pytest

from navsynth import navgraph, scorer, templates

FIXTURES = Path(__file__).parent / "fixtures"


def load_fixture_graph(name: str) -> navgraph.NavGraph:
    with open(FIXTURES / name, "r", encoding="utf-8") as fh:
        return navgraph.load_graph(fh)


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def hexa_graph() -> navgraph.NavGraph:
    return load_fixture_graph("hexa.graph")


@pytest.fixture(scope="session")
def unit_square() -> navgraph.NavGraph:
    return load_fixture_graph("unit_square.graph")


@pytest.fixture(scope="session")
def star_graph() -> navgraph.NavGraph:
    return load_fixture_graph("star.graph")


@pytest.fixture(scope="session")
def grid_graph() -> navgraph.NavGraph:
    return load_fixture_graph("grid25.graph")


@pytest.fixture(scope="session")
def lexicon() -> templates.Lexicon:
    with open(FIXTURES / "lexicon.txt", "r", encoding="utf-8") as fh:
        return templates.load_lexicon(fh)


@pytest.fixture(scope="session")
def seed_instructions() -> list[str]:
    text = (FIXTURES / "seed_instructions.txt").read_text(encoding="utf-8")
    return [line.strip() for line in text.splitlines() if line.strip()]


@pytest.fixture(scope="session")
def template_bank(seed_instructions, lexicon) -> list[templates.Template]:
    bank, _ = templates.build_bank(seed_instructions, lexicon)
    return bank


@pytest.fixture()
def mock_backend() -> scorer.ScorerBackend:
    return scorer.CachingBackend(scorer.MockBackend(11))
