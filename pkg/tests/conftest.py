from pathlib import Path

import pytest

from treecube.xmlio import parse_facts, parse_hierarchy

CORPUS = Path(__file__).resolve().parent.parent / "corpus"


@pytest.fixture(scope="session")
def corpus_dir() -> Path:
    return CORPUS


@pytest.fixture()
def sales_cube():
    """The five-fact sample cube with its geography hierarchy attached."""
    cube = parse_facts((CORPUS / "sales.xml").read_text())
    geo = parse_hierarchy((CORPUS / "geo.xml").read_text())
    return cube.with_hierarchies(cube.hierarchies.add(geo))


@pytest.fixture()
def geo_hierarchy():
    return parse_hierarchy((CORPUS / "geo.xml").read_text())
