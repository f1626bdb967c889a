from __future__ import annotations

import json
from pathlib import Path

import pytest

from cardforge.corpus import load_fixture_corpus
from cardforge.lint import compute_corpus_stats
from cardforge.model import CardRecord
from cardforge.retrieval import StubEmbedder, build_index
from cardforge.synth import load_render_template

from .backends import MockBackend

REPO = Path(__file__).resolve().parent.parent
FIXTURES = REPO / "fixtures"


@pytest.fixture(scope="session")
def repo_root() -> Path:
    return REPO


@pytest.fixture(scope="session")
def corpus() -> list[CardRecord]:
    return load_fixture_corpus(FIXTURES / "corpus_snapshot.ndjson")


@pytest.fixture(scope="session")
def corpus_by_id(corpus):
    return {r.id: r for r in corpus}


@pytest.fixture(scope="session")
def zeraora(corpus) -> CardRecord:
    return next(r for r in corpus if r.name == "Zeraora")


@pytest.fixture(scope="session")
def stub_backend() -> StubEmbedder:
    return StubEmbedder()


@pytest.fixture(scope="session")
def corpus_index(corpus, stub_backend):
    return build_index(corpus, stub_backend)


@pytest.fixture(scope="session")
def corpus_stats(corpus):
    return compute_corpus_stats(corpus)


@pytest.fixture(scope="session")
def render_template():
    return load_render_template(REPO / "assets")


@pytest.fixture(scope="session")
def test_art() -> bytes:
    return (FIXTURES / "test_art_1024x768.png").read_bytes()


@pytest.fixture
def mock_backend():
    backend = MockBackend()
    yield backend
    backend.close()


@pytest.fixture
def flawed_fixture_dir() -> Path:
    return FIXTURES / "flawed"


def load_flawed(name: str) -> dict:
    return json.loads((FIXTURES / "flawed" / name).read_text(encoding="utf-8"))
