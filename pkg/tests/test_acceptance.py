"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line. Run with `pytest tests/test_acceptance.py -v -s`.

Everything here runs offline: embeddings come from the deterministic stub,
chat and diffusion from scripted local mock servers.
"""
from __future__ import annotations

import functools
import hashlib
import json
import math
import random
import time
from pathlib import Path

import numpy as np
import pytest

from cardforge.corpus import load_cached_dump, dedupe_and_filter
from cardforge.errors import ValidationFailed
from cardforge.lint import lint_card, lint_card_dict
from cardforge.mechgen import (
    GenParams,
    assemble_messages,
    generate_mechanics,
    open_ended_json_text,
    validate_and_merge,
)
from cardforge.model import CardSpec, validate_record
from cardforge.retrieval import (
    EmbeddingVector,
    StubEmbedder,
    build_index,
    cosine_similarity,
    retrieve_top_k,
)
from cardforge.synth import load_render_template, placeholder_art, render_card

from .conftest import load_flawed
from .test_mechgen import ScriptedChat, VALID_COMPLETION, ZERAORA_SPEC

REPO = Path(__file__).resolve().parent.parent
FIXTURE = REPO / "fixtures" / "corpus_snapshot.ndjson"


def criterion(name):
    def decorate(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                result = fn(*args, **kwargs)
            except BaseException:
                print(f"\n[ACCEPTANCE] {name}: FAIL")
                raise
            print(f"\n[ACCEPTANCE] {name}: PASS")
            return result
        return wrapper
    return decorate


# ---------------------------------------------------------------------------
# 1. Corpus
# ---------------------------------------------------------------------------


@criterion("corpus: fixture dedupes to exactly 993 valid records in < 5 s")
def test_corpus_993_under_5s():
    start = time.perf_counter()
    records = dedupe_and_filter(load_cached_dump(FIXTURE))
    invalid = [r.id for r in records if validate_record(r)]
    elapsed = time.perf_counter() - start
    assert len(records) == 993, f"expected 993 records, got {len(records)}"
    assert invalid == [], f"records violating invariants: {invalid[:5]}"
    assert elapsed < 5.0, f"took {elapsed:.2f}s"


# ---------------------------------------------------------------------------
# 2. Retrieval
# ---------------------------------------------------------------------------


@criterion("retrieval: self-retrieval, top-k prefix, cosine oracle in < 10 s")
def test_retrieval_criteria(corpus):
    start = time.perf_counter()
    backend = StubEmbedder()
    index = build_index(corpus, backend)

    # (a) self-retrieval rank-1 for 100 randomly sampled corpus cards
    rng = random.Random(2025)
    misses = []
    for record in rng.sample(corpus, 100):
        spec = CardSpec(name=record.name, flavorText=record.flavorText,
                        types=list(record.types))
        top = retrieve_top_k(spec, index, 1, backend)
        if top[0].card_id != record.id:
            misses.append(record.id)
    assert misses == [], f"self-retrieval missed: {misses}"

    # (b) prefix property across k in {1, 5, 10}
    for record in rng.sample(corpus, 10):
        spec = CardSpec(name=record.name, flavorText=record.flavorText,
                        types=list(record.types))
        k1 = retrieve_top_k(spec, index, 1, backend)
        k5 = retrieve_top_k(spec, index, 5, backend)
        k10 = retrieve_top_k(spec, index, 10, backend)
        assert k10[:5] == k5 and k5[:1] == k1

    # (c) cosine agreement with an independent fsum oracle on 1,000 pairs
    vec_rng = np.random.default_rng(99)
    for _ in range(1000):
        a = vec_rng.standard_normal(24)
        b = vec_rng.standard_normal(24)
        oracle = (math.fsum(x * y for x, y in zip(a, b))
                  / (math.sqrt(math.fsum(x * x for x in a))
                     * math.sqrt(math.fsum(y * y for y in b))))
        got = cosine_similarity(
            EmbeddingVector(dim=24, values=a, model_id="t"),
            EmbeddingVector(dim=24, values=b, model_id="t"))
        assert got == pytest.approx(oracle, abs=1e-6)

    elapsed = time.perf_counter() - start
    assert elapsed < 10.0, f"took {elapsed:.2f}s"


# ---------------------------------------------------------------------------
# 3. Prompt golden
# ---------------------------------------------------------------------------


@criterion("prompt: Zeraora golden bytes with the pinned instruction sentences")
def test_prompt_golden(corpus, corpus_by_id, corpus_index, stub_backend):
    results = retrieve_top_k(ZERAORA_SPEC, corpus_index, 5, stub_backend)
    bundle = assemble_messages(ZERAORA_SPEC,
                               [corpus_by_id[r.card_id] for r in results],
                               GenParams(seed=42))
    text = bundle.to_text()
    golden = (REPO / "fixtures" / "prompts" / "zeraora_5card.txt").read_bytes()
    assert text.encode("utf-8") == golden
    assert "You are a Pokémon Card Generator" in text
    assert "Respond only with valid JSON." in text
    assert bundle.messages[-1].content.rstrip().endswith('"hp":')


# ---------------------------------------------------------------------------
# 4. Validator soundness
# ---------------------------------------------------------------------------


def _valid_cases() -> list[str]:
    def completion(**fields) -> str:
        base = {
            "hp": 70,
            "abilities": [],
            "attacks": [{"name": "Spark", "cost": ["Lightning"], "damage": "20"}],
            "weaknesses": [{"type": "Fighting", "value": "x2"}],
            "resistances": [],
            "retreatCost": 1,
        }
        base.update(fields)
        return json.dumps(base)

    prefix = open_ended_json_text(ZERAORA_SPEC)
    return [
        completion(),
        "Sure, here you go!\n" + completion() + "\nHope you like it.",
        "<think>the stats should be modest</think>" + completion(),
        # suffix continuation of the open-ended prompt
        " 70,\n" + completion()[1:].split(",", 1)[1],
        completion(hp="120"),                      # numeric string hp
        completion(retreatCost="2"),               # numeric string retreat
        completion(retreatCost=["Colorless"] * 3),  # list-form retreat
        json.dumps({**json.loads(completion()), "convertedRetreatCost": 2}
                   ).replace('"retreatCost": 1, ', ""),
        completion(ability={"name": "Veil", "text": "Prevent all effects."},
                   abilities=None)
        .replace('"abilities": null, ', ""),
        completion(attacks=[{"name": "Spark", "cost": ["lightning"], "damage": 20}]),
        completion(attacks=[{"name": "Surge", "cost": ["Lightning"], "damage": "20+"}]),
        completion(attacks=[{"name": "Volley", "cost": ["Lightning"], "damage": "30x"}]),
        completion(attacks=[{"name": "Storm", "cost": ["Lightning"], "damage": "40×"}]),
        completion(attacks=[{"name": "Stare", "cost": ["Lightning"], "damage": "",
                             "text": "Your opponent's Active Pokémon is now Asleep."}]),
        completion(attacks=[{"name": f"Hit {i}", "cost": ["Colorless"],
                             "damage": "10"} for i in range(4)]),
        completion(abilities=[{"name": "One", "text": "Draw a card."},
                              {"name": "Two", "text": "Heal 10 damage."}]),
        completion(hp=400, retreatCost=5),
        completion(hp=10, retreatCost=0),
        completion(weaknesses=[], resistances=[]),
        completion(resistances=[{"type": "Metal", "value": "-30"}]),
    ]


def _invalid_cases() -> list[str]:
    def completion(**fields) -> str:
        base = {
            "hp": 70,
            "attacks": [{"name": "Spark", "cost": ["Lightning"], "damage": "20"}],
        }
        base.update(fields)
        return json.dumps(base)

    return [
        "",                                       # handled as ValueError separately
        "utterly not json",
        "<think>only reasoning, no json</think>",
        "[1, 2, 3]",
        '{"hp": 70, "attacks": [{"name": "Spark"',  # truncated
        "{}",
        completion(hp=None).replace('"hp": null, ', ""),   # missing hp
        json.dumps({"hp": 70}),                   # missing attacks
        completion(hp="lots"),
        completion(hp=75),                        # not a multiple of 10
        completion(hp=1205),
        completion(hp=0),
        completion(hp=70.5),
        completion(attacks=[]),
        completion(attacks=[{"name": "A", "cost": [], "damage": "10"}] * 5),
        completion(attacks=[{"name": "", "cost": ["Lightning"], "damage": "20"}]),
        completion(attacks=[{"name": "Blank", "cost": ["Lightning"], "damage": ""}]),
        completion(attacks=[{"name": "Bad", "cost": ["Lightning"], "damage": "x20"}]),
        completion(attacks=[{"name": "Bad", "cost": ["Lightning"], "damage": "20xx"}]),
        completion(attacks=[{"name": "Bad", "cost": ["Lightning"], "damage": "twenty"}]),
        completion(attacks=[{"name": "Bad", "cost": ["Lightning"], "damage": "12"}]),
        completion(attacks=[{"name": "Bad", "cost": ["Lightning"], "damage": "405"}]),
        completion(attacks=[{"name": "Bad", "cost": ["Electric"], "damage": "20"}]),
        completion(attacks=[{"name": "Bad", "cost": ["Lightning"] * 6, "damage": "20"}]),
        completion(abilities=[{"name": "NoText"}]),
        completion(abilities=[{"name": "Empty", "text": ""}]),
        completion(abilities=[{"name": "Long", "text": "x" * 401}]),
        completion(abilities=[{"name": f"A{i}", "text": "t"} for i in range(3)]),
        completion(weaknesses=[{"type": "Fighting", "value": "2x"}]),
        completion(weaknesses=[{"type": "Fighting", "value": "20"}]),
        completion(weaknesses=[{"type": "Plastic", "value": "x2"}]),
        completion(weaknesses=[{"type": "Fighting", "value": "x2"}] * 3),
        completion(resistances=[{"type": "Metal", "value": "+20"}]),
        completion(resistances=[{"type": "Metal", "value": "-20"}] * 3),
        completion(retreatCost=6),
        completion(retreatCost=-1),
        completion(retreatCost="many"),
    ]


@criterion("validator: 50-case adversarial suite sound, repairs converge <= 3")
def test_validator_soundness(corpus, corpus_index, stub_backend):
    prefix = open_ended_json_text(ZERAORA_SPEC)
    valid, invalid = _valid_cases(), _invalid_cases()
    assert len(valid) + len(invalid) >= 50

    rejected_valid = []
    for i, raw in enumerate(valid):
        try:
            record = validate_and_merge(ZERAORA_SPEC, raw, prefix_text=prefix)
        except (ValidationFailed, ValueError) as exc:
            rejected_valid.append((i, str(exc)))
            continue
        assert validate_record(record) == []
        assert record.name == ZERAORA_SPEC.name
    assert rejected_valid == [], f"valid completions rejected: {rejected_valid}"

    accepted_invalid = []
    for i, raw in enumerate(invalid):
        try:
            validate_and_merge(ZERAORA_SPEC, raw, prefix_text=prefix)
        except (ValidationFailed, ValueError):
            continue
        accepted_invalid.append(i)
    assert accepted_invalid == [], f"invalid completions accepted: {accepted_invalid}"

    # repair loop convergence on scripted recover scenarios
    for junk_count in (1, 2, 3):
        chat = ScriptedChat(["{}"] * junk_count + [VALID_COMPLETION])
        result = generate_mechanics(ZERAORA_SPEC, corpus_index, corpus, chat,
                                    stub_backend,
                                    GenParams(seed=1, max_repair_attempts=3))
        assert result.repair_count == junk_count
        assert result.repair_count <= 3


# ---------------------------------------------------------------------------
# 5. Lint calibration
# ---------------------------------------------------------------------------


@criterion("lint: <= 2% corpus error rate; every rule fires on its fixture only")
def test_lint_calibration(corpus, corpus_stats):
    failing = [r.id for r in corpus if not lint_card(r, corpus_stats).passed]
    limit = 0.02 * len(corpus)
    assert len(failing) <= limit, \
        f"{len(failing)} cards fail lint (limit {limit:.0f}): {failing[:10]}"

    pairs = [
        ("repetition.json", "repetition_ok.json", "REPETITION"),
        ("underspecified.json", "underspecified_ok.json", "UNDERSPECIFIED"),
        ("imbalanced_strong.json", "imbalanced_ok.json", "IMBALANCED_STRONG"),
        ("unknown_mechanic.json", "unknown_mechanic_ok.json", "UNKNOWN_MECHANIC"),
        ("schema.json", "schema_ok.json", "SCHEMA"),
    ]
    for positive, negative, rule in pairs:
        pos = lint_card_dict(load_flawed(positive), corpus_stats)
        neg = lint_card_dict(load_flawed(negative), corpus_stats)
        assert any(f.rule == rule for f in pos.findings), f"{rule} did not fire"
        assert not any(f.rule == rule for f in neg.findings), \
            f"{rule} fired on its negative twin"


# ---------------------------------------------------------------------------
# 6. Render determinism
# ---------------------------------------------------------------------------


@criterion("render: golden hash stable x3; all 993 render with placeholder < 60 s")
def test_render_determinism(corpus, zeraora, test_art):
    golden = (REPO / "fixtures" / "golden" / "zeraora_card.sha256").read_text().strip()
    template = load_render_template(REPO / "assets")
    hashes = {
        hashlib.sha256(render_card(zeraora, test_art, template).png_bytes).hexdigest()
        for _ in range(3)
    }
    assert hashes == {golden}, f"hash drifted: {hashes} != {golden}"

    start = time.perf_counter()
    art = placeholder_art()
    fresh_template = load_render_template(REPO / "assets")
    for record in corpus:
        render_card(record, art, fresh_template)
    elapsed = time.perf_counter() - start
    assert elapsed < 60.0, f"993 renders took {elapsed:.1f}s"


# ---------------------------------------------------------------------------
# 7. End-to-end CLI with mocked backends
# ---------------------------------------------------------------------------


@criterion("e2e: CLI generate yields 4 artifacts, overhead < 100 ms, "
           "seed-identical reruns byte-identical")
def test_end_to_end_cli(mock_backend, tmp_path):
    from cardforge.cli import main

    mock_backend.chat_default = VALID_COMPLETION
    config = {
        "store_dir": str(tmp_path / "store"),
        "fixture_path": str(FIXTURE),
        "index_path": str(tmp_path / "index" / "corpus.idx"),
        "stats_path": str(tmp_path / "index" / "corpus_stats.json"),
        "assets_dir": str(REPO / "assets"),
        "workflow_template": str(REPO / "config" / "workflow.template.json"),
        "cardmaker_map": str(REPO / "config" / "cardmaker_map.json"),
        "ui_dir": str(tmp_path / "no-ui"),
        "chat": {"base_url": mock_backend.base_url},
        "diffusion": {"base_url": mock_backend.base_url,
                      "poll_interval_s": 0.01, "timeout_s": 5.0},
    }
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(config), encoding="utf-8")

    args = ["--config", str(config_path), "generate",
            "--name", "Voltail", "--type", "Lightning",
            "--dex", "It naps inside transformer boxes and hums in its sleep.",
            "--seed", "77"]

    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert main([*args, "--out-dir", str(out_a)]) == 0
    assert main([*args, "--out-dir", str(out_b)]) == 0

    attempt_dir = next(out_a.glob("session-*/attempt-*"))
    names = {p.name for p in attempt_dir.iterdir()}
    assert {"card.json", "art.png", "card.png", "lint.json"} <= names

    attempt = json.loads((attempt_dir / "attempt.json").read_text())
    overhead = attempt["timings"]["overhead_ms"]
    assert overhead < 100.0, f"pipeline overhead {overhead:.1f} ms"

    card_a = next(out_a.glob("*/*/card.json")).read_bytes()
    card_b = next(out_b.glob("*/*/card.json")).read_bytes()
    assert card_a == card_b, "same seed produced different card.json bytes"

    graphs = mock_backend.submitted_graphs
    assert len(graphs) == 2
    assert json.dumps(graphs[0], sort_keys=True) == json.dumps(graphs[1], sort_keys=True), \
        "same seed produced different diffusion graphs"


# ---------------------------------------------------------------------------
# 8. Ratings aggregation
# ---------------------------------------------------------------------------


@criterion("ratings: seeded store reproduces means 4.25 / 3.95 / 4.04 (+-0.01)")
def test_ratings_aggregation(mock_backend, tmp_path):
    from fastapi.testclient import TestClient

    from cardforge.service import create_app
    from .test_service import make_config, seed_rating_fixture, shared_index_dir  # noqa: F401

    # build a private index dir for this test
    from cardforge.corpus import load_fixture_corpus, corpus_content_hash
    from cardforge.lint import compute_corpus_stats, save_corpus_stats
    from cardforge.retrieval import save_index

    index_dir = tmp_path / "index"
    records = load_fixture_corpus(FIXTURE)
    index = build_index(records, StubEmbedder(),
                        corpus_hash=corpus_content_hash(records))
    save_index(index, index_dir / "corpus.idx")
    save_corpus_stats(compute_corpus_stats(records), index_dir / "corpus_stats.json")

    config = make_config(mock_backend, tmp_path / "store", index_dir)
    client = TestClient(create_app(config))
    seed_rating_fixture(client.app.state.cardforge.store)

    stats = client.get("/stats/ratings").json()
    assert stats["aesthetics"]["mean"] == pytest.approx(4.25, abs=0.01)
    assert stats["representativeness_image"]["mean"] == pytest.approx(3.95, abs=0.01)
    assert stats["representativeness_mechanics"]["mean"] == pytest.approx(4.04, abs=0.01)
