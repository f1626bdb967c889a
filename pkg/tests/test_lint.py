from __future__ import annotations

import json
import math
from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from cardforge.lint import (
    RULE_IMBALANCED_STRONG,
    RULE_IMBALANCED_WEAK,
    RULE_REPETITION,
    RULE_SCHEMA,
    RULE_UNDERSPECIFIED,
    RULE_UNKNOWN_MECHANIC,
    CorpusStats,
    LintConfig,
    NumericStats,
    compute_corpus_stats,
    lint_card,
    lint_card_dict,
    load_corpus_stats,
    save_corpus_stats,
    tokenize,
    trigram_overlap,
    z_score,
)
from cardforge.model import Attack, CardRecord, TypeModifier

from .conftest import load_flawed


def simple_record(**overrides) -> CardRecord:
    base = dict(
        name="Voltail",
        flavorText="It naps inside transformer boxes. Its tail sparks when it dreams.",
        types=["Lightning"],
        hp=70,
        attacks=[Attack(name="Spark", cost=["Lightning"], damage="20")],
        weaknesses=[TypeModifier(type="Fighting", value="x2")],
        retreatCost=1,
    )
    base.update(overrides)
    return CardRecord(**base)


class TestComputeCorpusStats:
    def test_covers_all_energy_types_with_sane_minima(self, corpus_stats):
        assert len(corpus_stats.hp_by_type) == 11
        for entry in corpus_stats.hp_by_type.values():
            assert entry.min >= 30

    def test_single_card_corpus_has_zero_stddev(self, corpus):
        stats = compute_corpus_stats(corpus[:1])
        entry = next(iter(stats.hp_by_type.values()))
        assert entry.stddev == 0.0

    def test_deterministic(self, corpus):
        a = compute_corpus_stats(corpus[:100])
        b = compute_corpus_stats(corpus[:100])
        assert a.to_json() == b.to_json()

    def test_persist_round_trip(self, corpus_stats, tmp_path):
        path = tmp_path / "stats.json"
        save_corpus_stats(corpus_stats, path)
        loaded = load_corpus_stats(path)
        assert loaded.to_json() == corpus_stats.to_json()

    def test_vocabulary_requires_min_count(self, corpus):
        strict = compute_corpus_stats(corpus, vocab_min_count=50)
        loose = compute_corpus_stats(corpus, vocab_min_count=3)
        assert strict.mechanic_vocabulary < loose.mechanic_vocabulary

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValueError):
            compute_corpus_stats([])


class TestTokenize:
    def test_diacritics_folded(self):
        assert tokenize("Pokémon") == ["pokemon"]

    def test_trigram_overlap_identical_texts(self):
        text = "Flip a coin. If heads, this attack does 20 more damage."
        assert trigram_overlap(text, text) == 1.0

    def test_trigram_overlap_disjoint(self):
        assert trigram_overlap("alpha beta gamma delta",
                               "one two three four") == 0.0


class TestRules:
    def test_zeraora_passes_against_fixture_stats(self, zeraora, corpus_stats):
        report = lint_card(zeraora, corpus_stats)
        assert report.passed
        assert report.findings == []

    def test_duplicate_attack_names_is_repetition_error(self, corpus_stats):
        record = simple_record(attacks=[
            Attack(name="Spark", cost=["Lightning"], damage="20"),
            Attack(name="Spark", cost=["Lightning", "Colorless"], damage="50"),
        ])
        report = lint_card(record, corpus_stats)
        findings = [f for f in report.findings if f.rule == RULE_REPETITION]
        assert findings and findings[0].severity == "error"
        assert not report.passed

    def test_near_identical_effect_texts_flagged(self, corpus_stats):
        text = "Flip a coin. If heads, this attack does 20 more damage."
        near = "Flip a coin. If heads, this attack does 20 more damage too."
        record = simple_record(attacks=[
            Attack(name="First", cost=["Lightning"], damage="20", text=text),
            Attack(name="Second", cost=["Lightning"], damage="30", text=near),
        ])
        report = lint_card(record, corpus_stats)
        assert any(f.rule == RULE_REPETITION and f.locus == "attacks[1].text"
                   for f in report.findings)

    def test_one_cost_300_damage_is_strong_error(self, corpus_stats):
        record = simple_record(attacks=[
            Attack(name="Overload", cost=["Lightning"], damage="300")])
        report = lint_card(record, corpus_stats)
        finding = next(f for f in report.findings if f.rule == RULE_IMBALANCED_STRONG)
        assert finding.severity == "error"
        assert finding.score > 3
        assert finding.locus == "attacks[0].damage"

    def test_weak_side_selects_weak_rule(self, corpus_stats):
        # hp far below the Lightning mean
        record = simple_record(hp=10)
        report = lint_card(record, corpus_stats)
        assert any(f.rule == RULE_IMBALANCED_WEAK and f.locus == "hp"
                   for f in report.findings)

    def test_moderate_deviation_is_warning(self, corpus_stats):
        entry = corpus_stats.damage_per_cost[1]
        value = round((entry.mean + 2.5 * entry.stddev) / 5) * 5
        record = simple_record(attacks=[
            Attack(name="Strongish", cost=["Lightning"], damage=str(int(value)))])
        report = lint_card(record, corpus_stats)
        findings = [f for f in report.findings if "IMBALANCED" in f.rule]
        assert findings and findings[0].severity == "warning"
        assert report.passed  # warnings do not fail a card

    def test_quantifier_without_number_is_underspecified(self, corpus_stats):
        record = simple_record(attacks=[
            Attack(name="Vague", cost=["Lightning"], damage="20",
                   text="This attack does some more damage when it matters.")])
        report = lint_card(record, corpus_stats)
        assert any(f.rule == RULE_UNDERSPECIFIED for f in report.findings)

    def test_quantifier_with_number_is_fine(self, corpus_stats):
        record = simple_record(attacks=[
            Attack(name="Precise", cost=["Lightning"], damage="20",
                   text="Flip a coin. If heads, this attack does 20 more damage.")])
        report = lint_card(record, corpus_stats)
        assert not any(f.rule == RULE_UNDERSPECIFIED for f in report.findings)

    def test_gibberish_text_is_unknown_mechanic_warning(self, corpus_stats):
        record = simple_record(attacks=[
            Attack(name="Weird", cost=["Lightning"], damage="",
                   text="Invert the gravity lattice beneath the opposing bench.")])
        report = lint_card(record, corpus_stats)
        finding = next(f for f in report.findings
                       if f.rule == RULE_UNKNOWN_MECHANIC)
        assert finding.severity == "warning"
        assert report.passed

    def test_passed_iff_no_errors(self, corpus_stats):
        record = simple_record(attacks=[
            Attack(name="Overload", cost=["Lightning"], damage="300")])
        report = lint_card(record, corpus_stats)
        assert not report.passed
        assert any(f.severity == "error" for f in report.findings)


class TestFlawedFixturePairs:
    CASES = [
        ("repetition.json", "repetition_ok.json", RULE_REPETITION),
        ("underspecified.json", "underspecified_ok.json", RULE_UNDERSPECIFIED),
        ("imbalanced_strong.json", "imbalanced_ok.json", RULE_IMBALANCED_STRONG),
        ("unknown_mechanic.json", "unknown_mechanic_ok.json", RULE_UNKNOWN_MECHANIC),
        ("schema.json", "schema_ok.json", RULE_SCHEMA),
    ]

    @pytest.mark.parametrize("positive,negative,rule", CASES)
    def test_rule_fires_on_positive_not_on_twin(self, positive, negative, rule,
                                                corpus_stats):
        pos_report = lint_card_dict(load_flawed(positive), corpus_stats)
        neg_report = lint_card_dict(load_flawed(negative), corpus_stats)
        assert any(f.rule == rule for f in pos_report.findings), positive
        assert not any(f.rule == rule for f in neg_report.findings), negative


class TestZScore:
    def test_zero_stddev(self):
        entry = NumericStats(mean=50, stddev=0)
        assert z_score(50, entry) == 0.0
        assert z_score(60, entry) == math.inf
        assert z_score(40, entry) == -math.inf

    @given(st.integers(min_value=0, max_value=80),
           st.integers(min_value=0, max_value=80))
    def test_monotone_in_damage(self, a, b):
        entry = NumericStats(mean=50, stddev=12)
        lo, hi = sorted((a * 5, b * 5))
        assert z_score(lo, entry) <= z_score(hi, entry)


class TestCalibration:
    def test_at_most_two_percent_error_cards(self, corpus, corpus_stats):
        failing = [r.id for r in corpus
                   if not lint_card(r, corpus_stats).passed]
        assert len(failing) <= 0.02 * len(corpus), failing[:10]


def test_report_serialization(self=None, tmp_path=None):
    from cardforge.lint import LintReport, LintFinding, write_reports_jsonl
    import tempfile

    report = LintReport(card_id="x", findings=[
        LintFinding(rule=RULE_REPETITION, severity="error", locus="attacks[1]",
                    detail="dup")])
    assert report.to_dict()["passed"] is False
    with tempfile.TemporaryDirectory() as td:
        path = Path(td) / "reports.jsonl"
        write_reports_jsonl([report], path)
        lines = path.read_text().splitlines()
        assert json.loads(lines[0])["card_id"] == "x"
