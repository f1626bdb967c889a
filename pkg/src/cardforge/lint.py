"""Flaw linting: deterministic rules scored against corpus-derived statistics.

The corpus defines "normal". Numeric fields are z-scored against it
(hp within the card's primary type, attack damage within its total energy
cost), effect texts are checked against the corpus mechanic vocabulary, and
structural tics (duplicate attacks, near-identical effect texts, unresolved
quantifiers) are flagged directly. Lint is advisory: errors mark a card as
not passing, but nothing in the generation path blocks on them.
"""
from __future__ import annotations

import json
import logging
import math
import re
import statistics
import unicodedata
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

from .model import CardRecord, damage_numeric, record_from_dict, validate_record

logger = logging.getLogger(__name__)

RULE_UNDERSPECIFIED = "UNDERSPECIFIED"
RULE_IMBALANCED_WEAK = "IMBALANCED_WEAK"
RULE_IMBALANCED_STRONG = "IMBALANCED_STRONG"
RULE_REPETITION = "REPETITION"
RULE_UNKNOWN_MECHANIC = "UNKNOWN_MECHANIC"
RULE_SCHEMA = "SCHEMA"

_TOKEN_RE = re.compile(r"[a-z0-9]+")
_QUANTIFIER_RES = (
    re.compile(r"\bsome\b", re.IGNORECASE),
    re.compile(r"\ba few\b", re.IGNORECASE),
    re.compile(r"\bX damage\b"),
)


@dataclass
class LintConfig:
    z_error: float = 3.0
    z_warning: float = 2.0
    repetition_overlap: float = 0.6
    vocab_coverage_min: float = 0.4
    vocab_min_count: int = 3


@dataclass
class NumericStats:
    mean: float
    stddev: float
    min: float = 0.0
    max: float = 0.0


@dataclass
class CorpusStats:
    hp_by_type: dict[str, NumericStats]
    damage_per_cost: dict[int, NumericStats]
    retreat_distribution: dict[int, int]
    mechanic_vocabulary: set[str]
    card_count: int = 0

    def to_json(self) -> str:
        payload = {
            "card_count": self.card_count,
            "hp_by_type": {k: asdict(v) for k, v in sorted(self.hp_by_type.items())},
            "damage_per_cost": {str(k): asdict(v)
                                for k, v in sorted(self.damage_per_cost.items())},
            "retreat_distribution": {str(k): v for k, v
                                     in sorted(self.retreat_distribution.items())},
            "mechanic_vocabulary": sorted(self.mechanic_vocabulary),
        }
        return json.dumps(payload, ensure_ascii=False, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "CorpusStats":
        payload = json.loads(text)
        return cls(
            hp_by_type={k: NumericStats(**v)
                        for k, v in payload["hp_by_type"].items()},
            damage_per_cost={int(k): NumericStats(**v)
                             for k, v in payload["damage_per_cost"].items()},
            retreat_distribution={int(k): int(v) for k, v
                                  in payload["retreat_distribution"].items()},
            mechanic_vocabulary=set(payload["mechanic_vocabulary"]),
            card_count=payload.get("card_count", 0),
        )


@dataclass
class LintFinding:
    rule: str
    severity: str  # "warning" | "error"
    locus: str
    detail: str
    score: float | None = None


@dataclass
class LintReport:
    card_id: str
    findings: list[LintFinding] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not any(f.severity == "error" for f in self.findings)

    def to_dict(self) -> dict[str, Any]:
        return {
            "card_id": self.card_id,
            "passed": self.passed,
            "findings": [asdict(f) for f in self.findings],
        }


def tokenize(text: str) -> list[str]:
    """Lowercased word tokens with diacritics folded (Pokémon == Pokemon)."""
    folded = unicodedata.normalize("NFKD", text)
    folded = "".join(c for c in folded if not unicodedata.combining(c))
    return _TOKEN_RE.findall(folded.lower())


def ngrams(tokens: Sequence[str], n: int) -> list[str]:
    return [" ".join(tokens[i:i + n]) for i in range(len(tokens) - n + 1)]


def effect_texts(record: CardRecord) -> list[tuple[str, str]]:
    """(locus, text) pairs for every nonempty attack/ability effect text."""
    pairs = []
    for i, ability in enumerate(record.abilities):
        if ability.text:
            pairs.append((f"abilities[{i}].text", ability.text))
    for i, attack in enumerate(record.attacks):
        if attack.text:
            pairs.append((f"attacks[{i}].text", attack.text))
    return pairs


# ---------------------------------------------------------------------------
# Corpus statistics
# ---------------------------------------------------------------------------


def _numeric_stats(values: Sequence[float]) -> NumericStats:
    return NumericStats(
        mean=statistics.mean(values),
        stddev=statistics.pstdev(values) if len(values) > 1 else 0.0,
        min=min(values),
        max=max(values),
    )


def compute_corpus_stats(corpus: Sequence[CardRecord],
                         vocab_min_count: int = 3) -> CorpusStats:
    """Deterministic summary statistics over the fixture corpus."""
    if not corpus:
        raise ValueError("corpus is empty")

    hp_values: dict[str, list[int]] = {}
    damage_values: dict[int, list[int]] = {}
    retreat_hist: Counter[int] = Counter()
    vocab_counts: Counter[str] = Counter()

    for record in corpus:
        hp_values.setdefault(record.types[0], []).append(record.hp)
        retreat_hist[record.retreatCost] += 1
        for attack in record.attacks:
            value = damage_numeric(attack.damage)
            if value is not None:
                damage_values.setdefault(attack.total_cost, []).append(value)
        for _, text in effect_texts(record):
            tokens = tokenize(text)
            for n in (1, 2, 3):
                vocab_counts.update(ngrams(tokens, n))

    return CorpusStats(
        hp_by_type={t: _numeric_stats(v) for t, v in hp_values.items()},
        damage_per_cost={c: _numeric_stats(v) for c, v in damage_values.items()},
        retreat_distribution=dict(retreat_hist),
        mechanic_vocabulary={g for g, count in vocab_counts.items()
                             if count >= vocab_min_count},
        card_count=len(corpus),
    )


def save_corpus_stats(stats: CorpusStats, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(stats.to_json() + "\n", encoding="utf-8")


def load_corpus_stats(path: Path) -> CorpusStats:
    return CorpusStats.from_json(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# Rules
# ---------------------------------------------------------------------------


def z_score(value: float, stats: NumericStats) -> float:
    if stats.stddev == 0:
        return 0.0 if value == stats.mean else math.copysign(math.inf, value - stats.mean)
    return (value - stats.mean) / stats.stddev


def _imbalance_finding(value: float, stats: NumericStats, locus: str,
                       what: str, config: LintConfig) -> LintFinding | None:
    z = z_score(value, stats)
    if abs(z) <= config.z_warning:
        return None
    rule = RULE_IMBALANCED_STRONG if z > 0 else RULE_IMBALANCED_WEAK
    severity = "error" if abs(z) > config.z_error else "warning"
    return LintFinding(
        rule=rule, severity=severity, locus=locus,
        detail=(f"{what} {value:g} is {z:+.2f} sd from the corpus mean "
                f"{stats.mean:.1f} (sd {stats.stddev:.1f})"),
        score=round(z, 4),
    )


def _check_underspecified(record: CardRecord, config: LintConfig) -> list[LintFinding]:
    findings = []
    for locus, text in effect_texts(record):
        has_number = any(ch.isdigit() for ch in text)
        for pattern in _QUANTIFIER_RES:
            if pattern.search(text) and not has_number:
                findings.append(LintFinding(
                    rule=RULE_UNDERSPECIFIED, severity="error", locus=locus,
                    detail=(f"quantifier {pattern.pattern!r} with no number "
                            f"to resolve it: {text!r}"),
                ))
                break
    for i, attack in enumerate(record.attacks):
        if not attack.damage and not attack.text:
            findings.append(LintFinding(
                rule=RULE_UNDERSPECIFIED, severity="error", locus=f"attacks[{i}]",
                detail="attack has neither damage nor effect text",
            ))
    return findings


def _check_imbalance(record: CardRecord, stats: CorpusStats,
                     config: LintConfig) -> list[LintFinding]:
    findings = []
    type_stats = stats.hp_by_type.get(record.types[0])
    if type_stats is not None:
        finding = _imbalance_finding(record.hp, type_stats, "hp",
                                     f"hp for a {record.types[0]} creature", config)
        if finding:
            findings.append(finding)
    for i, attack in enumerate(record.attacks):
        value = damage_numeric(attack.damage)
        if value is None:
            continue
        bucket = stats.damage_per_cost.get(attack.total_cost)
        if bucket is None:
            continue
        finding = _imbalance_finding(
            value, bucket, f"attacks[{i}].damage",
            f"damage at {attack.total_cost} energy", config)
        if finding:
            findings.append(finding)
    return findings


def trigram_overlap(a: str, b: str) -> float:
    """Overlap coefficient between the trigram sets of two texts."""
    ta, tb = set(ngrams(tokenize(a), 3)), set(ngrams(tokenize(b), 3))
    if not ta or not tb:
        return 0.0
    return len(ta & tb) / min(len(ta), len(tb))


def _check_repetition(record: CardRecord, config: LintConfig) -> list[LintFinding]:
    findings = []
    seen: dict[str, int] = {}
    for i, attack in enumerate(record.attacks):
        key = attack.name.lower()
        if key in seen:
            findings.append(LintFinding(
                rule=RULE_REPETITION, severity="error", locus=f"attacks[{i}].name",
                detail=f"duplicate attack name {attack.name!r} (also attacks[{seen[key]}])",
            ))
        else:
            seen[key] = i

    texts = effect_texts(record)
    for a in range(len(texts)):
        for b in range(a + 1, len(texts)):
            overlap = trigram_overlap(texts[a][1], texts[b][1])
            if overlap >= config.repetition_overlap:
                findings.append(LintFinding(
                    rule=RULE_REPETITION, severity="error", locus=texts[b][0],
                    detail=(f"effect text repeats {texts[a][0]} "
                            f"({overlap:.0%} trigram overlap)"),
                    score=round(overlap, 4),
                ))
    return findings


def _check_unknown_mechanic(record: CardRecord, stats: CorpusStats,
                            config: LintConfig) -> list[LintFinding]:
    findings = []
    for locus, text in effect_texts(record):
        grams = ngrams(tokenize(text), 3)
        if not grams:
            continue
        known = sum(1 for g in grams if g in stats.mechanic_vocabulary)
        coverage = known / len(grams)
        if coverage < config.vocab_coverage_min:
            findings.append(LintFinding(
                rule=RULE_UNKNOWN_MECHANIC, severity="warning", locus=locus,
                detail=(f"only {coverage:.0%} of effect-text trigrams appear in "
                        f"the corpus mechanic vocabulary"),
                score=round(coverage, 4),
            ))
    return findings


def lint_card(record: CardRecord, stats: CorpusStats,
              config: LintConfig | None = None) -> LintReport:
    """Apply every rule to a schema-valid record."""
    config = config or LintConfig()
    findings = (
        _check_underspecified(record, config)
        + _check_imbalance(record, stats, config)
        + _check_repetition(record, config)
        + _check_unknown_mechanic(record, stats, config)
    )
    return LintReport(card_id=record.id, findings=findings)


def lint_card_dict(data: dict[str, Any], stats: CorpusStats,
                   config: LintConfig | None = None) -> LintReport:
    """Lint a raw imported card dict; schema violations become SCHEMA findings."""
    record = record_from_dict(data)
    issues = validate_record(record)
    if issues:
        findings = [
            LintFinding(rule=RULE_SCHEMA, severity="error",
                        locus=issue.field or "(document)", detail=str(issue))
            for issue in issues
        ]
        return LintReport(card_id=record.id, findings=findings)
    return lint_card(record, stats, config)


def lint_corpus(corpus: Iterable[CardRecord], stats: CorpusStats,
                config: LintConfig | None = None) -> list[LintReport]:
    return [lint_card(record, stats, config) for record in corpus]


def write_reports_jsonl(reports: Iterable[LintReport], path: Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for report in reports:
            fh.write(json.dumps(report.to_dict(), ensure_ascii=False) + "\n")
