"""Card domain model: types, invariants, and the canonical serialization.

The canonical serialization is load-bearing: it is the exact text fed to the
embedder, the exact text pasted into prompts as reference context, and the
format completions are validated against. It is a single line of JSON with a
fixed field order and whitespace-normalized string values, so identical cards
produce identical bytes on every platform.
"""
from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field, replace
from typing import Any

from .errors import ValidationFailed, ValidationIssue

# Closed vocabulary of energy types; serialization uses these exact spellings.
ENERGY_TYPES: tuple[str, ...] = (
    "Grass", "Fire", "Water", "Lightning", "Psychic", "Fighting",
    "Darkness", "Metal", "Fairy", "Dragon", "Colorless",
)
_ENERGY_LOOKUP = {t.lower(): t for t in ENERGY_TYPES}

SUPERTYPE = "Pokémon"
BASIC_SUBTYPE = "Basic"

# Serialization order of the mechanical fields. Everything else on a record
# (id, dex, artist, imageRef) is bookkeeping and never serialized.
CANONICAL_FIELD_ORDER = (
    "name", "flavorText", "types", "supertype", "subtypes", "hp",
    "abilities", "attacks", "weaknesses", "resistances", "retreatCost",
)

HP_MIN, HP_MAX, HP_STEP = 10, 400, 10
DAMAGE_MIN, DAMAGE_MAX, DAMAGE_STEP = 0, 400, 5
MAX_ABILITY_TEXT = 400
MAX_RETREAT = 5
MAX_ATTACK_COST = 5

DAMAGE_RE = re.compile(r"^([0-9]+[+x×-]?)?$")
WEAKNESS_VALUE_RE = re.compile(r"^x[0-9]+$")
RESISTANCE_VALUE_RE = re.compile(r"^-[0-9]+$")

_WS_RE = re.compile(r"\s+")


def normalize_ws(text: str) -> str:
    """Collapse whitespace runs to single spaces and strip the ends."""
    return _WS_RE.sub(" ", text).strip()


def parse_energy_type(value: str) -> str:
    """Case-insensitive parse to the canonical capitalized type name."""
    canonical = _ENERGY_LOOKUP.get(value.strip().lower())
    if canonical is None:
        raise ValueError(f"unknown energy type: {value!r}")
    return canonical


def damage_numeric(damage: str) -> int | None:
    """Numeric part of a damage expression, or None when empty."""
    if not damage:
        return None
    m = re.match(r"^([0-9]+)", damage)
    return int(m.group(1)) if m else None


@dataclass
class Ability:
    name: str
    text: str


@dataclass
class Attack:
    name: str
    cost: list[str] = field(default_factory=list)
    damage: str = ""
    text: str = ""

    @property
    def total_cost(self) -> int:
        return len(self.cost)


@dataclass
class TypeModifier:
    type: str
    value: str


@dataclass
class CardRecord:
    """Full mechanical card structure mirroring the mined database schema.

    ``id``, ``dex``, ``artist`` and ``image_ref`` are bookkeeping: they are
    excluded from equality and from the canonical serialization.
    """

    name: str
    flavorText: str
    types: list[str]
    hp: int
    attacks: list[Attack]
    abilities: list[Ability] = field(default_factory=list)
    weaknesses: list[TypeModifier] = field(default_factory=list)
    resistances: list[TypeModifier] = field(default_factory=list)
    retreatCost: int = 0
    supertype: str = SUPERTYPE
    subtypes: list[str] = field(default_factory=lambda: [BASIC_SUBTYPE])
    id: str = field(default="", compare=False)
    dex: int | None = field(default=None, compare=False)
    artist: str = field(default="", compare=False)
    image_ref: str = field(default="", compare=False)


@dataclass
class CardSpec:
    """The user's minimal input: name, dex entry, and 1-2 types.

    Field values are whitespace-normalized on construction; invariants are
    enforced immediately so a CardSpec instance is always valid.
    """

    name: str
    flavorText: str
    types: list[str]

    def __post_init__(self) -> None:
        self.name = self.name.strip()
        self.flavorText = normalize_ws(self.flavorText)
        if not 1 <= len(self.name) <= 30:
            raise ValueError(f"name must be 1-30 characters, got {len(self.name)}")
        if any(ord(c) < 0x20 for c in self.name):
            raise ValueError("name contains control characters")
        if not 10 <= len(self.flavorText) <= 400:
            raise ValueError(
                f"flavorText must be 10-400 characters after trimming, got {len(self.flavorText)}"
            )
        if not 1 <= len(self.types) <= 2:
            raise ValueError("types must list 1-2 energy types")
        self.types = [parse_energy_type(t) for t in self.types]


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def _issue(kind: str, fld: str, reason: str = "") -> ValidationIssue:
    return ValidationIssue(kind=kind, field=fld, reason=reason)


def validate_damage(damage: str) -> str | None:
    """Return a reason string when the damage expression is invalid."""
    if not DAMAGE_RE.match(damage):
        return f"{damage!r} does not match the damage grammar"
    value = damage_numeric(damage)
    if value is not None:
        if not DAMAGE_MIN <= value <= DAMAGE_MAX:
            return f"numeric part {value} outside [{DAMAGE_MIN}, {DAMAGE_MAX}]"
        if value % DAMAGE_STEP != 0:
            return f"numeric part {value} is not a multiple of {DAMAGE_STEP}"
    return None


def validate_record(record: CardRecord) -> list[ValidationIssue]:
    """Check every CardRecord invariant. Empty list means the record is valid."""
    issues: list[ValidationIssue] = []

    if not record.name:
        issues.append(_issue("invalid_value", "name", "must be nonempty"))
    if not record.flavorText.strip():
        issues.append(_issue("invalid_value", "flavorText", "must be nonempty"))

    if not 1 <= len(record.types) <= 2:
        issues.append(_issue("invalid_value", "types", "must list 1-2 energy types"))
    for t in record.types:
        if t not in ENERGY_TYPES:
            issues.append(_issue("invalid_value", "types", f"unknown energy type {t!r}"))

    if record.supertype != SUPERTYPE:
        issues.append(_issue("invalid_value", "supertype", f"must be {SUPERTYPE!r}"))
    if BASIC_SUBTYPE not in record.subtypes:
        issues.append(_issue("invalid_value", "subtypes", f"must contain {BASIC_SUBTYPE!r}"))

    if not isinstance(record.hp, int):
        issues.append(_issue("invalid_value", "hp", "must be an integer"))
    elif not HP_MIN <= record.hp <= HP_MAX:
        issues.append(_issue("invalid_value", "hp", f"{record.hp} outside [{HP_MIN}, {HP_MAX}]"))
    elif record.hp % HP_STEP != 0:
        issues.append(_issue("invalid_value", "hp", f"{record.hp} is not a multiple of {HP_STEP}"))

    if len(record.abilities) > 2:
        issues.append(_issue("invalid_value", "abilities", "at most 2 abilities"))
    for i, ability in enumerate(record.abilities):
        if not ability.name:
            issues.append(_issue("invalid_value", f"abilities[{i}].name", "must be nonempty"))
        if not ability.text:
            issues.append(_issue("invalid_value", f"abilities[{i}].text", "must be nonempty"))
        elif len(ability.text) > MAX_ABILITY_TEXT:
            issues.append(_issue(
                "invalid_value", f"abilities[{i}].text",
                f"{len(ability.text)} characters exceeds {MAX_ABILITY_TEXT}",
            ))

    if not 1 <= len(record.attacks) <= 4:
        issues.append(_issue("invalid_value", "attacks", "must list 1-4 attacks"))
    for i, attack in enumerate(record.attacks):
        prefix = f"attacks[{i}]"
        if not attack.name:
            issues.append(_issue("invalid_value", f"{prefix}.name", "must be nonempty"))
        if len(attack.cost) > MAX_ATTACK_COST:
            issues.append(_issue("invalid_value", f"{prefix}.cost", f"at most {MAX_ATTACK_COST} energies"))
        for t in attack.cost:
            if t not in ENERGY_TYPES:
                issues.append(_issue("invalid_value", f"{prefix}.cost", f"unknown energy type {t!r}"))
        reason = validate_damage(attack.damage)
        if reason:
            issues.append(_issue("invalid_value", f"{prefix}.damage", reason))
        if not attack.damage and not attack.text:
            issues.append(_issue(
                "invalid_value", f"{prefix}", "damage and text cannot both be empty",
            ))

    for fld, mods, pattern, expected in (
        ("weaknesses", record.weaknesses, WEAKNESS_VALUE_RE, "x<digits>"),
        ("resistances", record.resistances, RESISTANCE_VALUE_RE, "-<digits>"),
    ):
        if len(mods) > 2:
            issues.append(_issue("invalid_value", fld, "at most 2 entries"))
        for i, mod in enumerate(mods):
            if mod.type not in ENERGY_TYPES:
                issues.append(_issue("invalid_value", f"{fld}[{i}].type", f"unknown energy type {mod.type!r}"))
            if not pattern.match(mod.value):
                issues.append(_issue("invalid_value", f"{fld}[{i}].value", f"must match {expected}"))

    if not isinstance(record.retreatCost, int) or not 0 <= record.retreatCost <= MAX_RETREAT:
        issues.append(_issue("invalid_value", "retreatCost", f"must be an integer in [0, {MAX_RETREAT}]"))

    return issues


def check_record(record: CardRecord) -> CardRecord:
    """Raise ValidationFailed unless the record passes every invariant."""
    issues = validate_record(record)
    if issues:
        raise ValidationFailed(issues)
    return record


# ---------------------------------------------------------------------------
# Canonical serialization
# ---------------------------------------------------------------------------


def _attack_dict(attack: Attack) -> dict[str, Any]:
    d: dict[str, Any] = {
        "name": normalize_ws(attack.name),
        "cost": list(attack.cost),
        "damage": attack.damage.strip(),
    }
    if attack.text:
        d["text"] = normalize_ws(attack.text)
    return d


def canonical_dict(record: CardRecord) -> dict[str, Any]:
    """Mechanical fields only, in canonical order, whitespace-normalized."""
    return {
        "name": normalize_ws(record.name),
        "flavorText": normalize_ws(record.flavorText),
        "types": list(record.types),
        "supertype": record.supertype,
        "subtypes": list(record.subtypes),
        "hp": record.hp,
        "abilities": [
            {"name": normalize_ws(a.name), "text": normalize_ws(a.text)}
            for a in record.abilities
        ],
        "attacks": [_attack_dict(a) for a in record.attacks],
        "weaknesses": [{"type": m.type, "value": m.value} for m in record.weaknesses],
        "resistances": [{"type": m.type, "value": m.value} for m in record.resistances],
        "retreatCost": record.retreatCost,
    }


def canonical_text(record: CardRecord) -> str:
    """One line of JSON in canonical field order; byte-identical across runs."""
    return json.dumps(canonical_dict(record), ensure_ascii=False, separators=(", ", ": "))


def content_id(record: CardRecord) -> str:
    """Stable id derived from the canonical bytes."""
    digest = hashlib.sha256(canonical_text(record).encode("utf-8")).hexdigest()
    return f"gen-{digest[:12]}"


def record_from_dict(data: dict[str, Any], *, id: str = "",
                     dex: int | None = None) -> CardRecord:
    """Build a CardRecord from a canonical-format dict (no validation)."""
    record = CardRecord(
        name=str(data.get("name", "")),
        flavorText=str(data.get("flavorText", "")),
        types=[str(t) for t in data.get("types", [])],
        hp=data.get("hp", 0),
        abilities=[
            Ability(name=str(a.get("name", "")), text=str(a.get("text", "")))
            for a in data.get("abilities", [])
        ],
        attacks=[
            Attack(
                name=str(a.get("name", "")),
                cost=[str(c) for c in a.get("cost", [])],
                damage=str(a.get("damage", "")),
                text=str(a.get("text", "")),
            )
            for a in data.get("attacks", [])
        ],
        weaknesses=[
            TypeModifier(type=str(m.get("type", "")), value=str(m.get("value", "")))
            for m in data.get("weaknesses", [])
        ],
        resistances=[
            TypeModifier(type=str(m.get("type", "")), value=str(m.get("value", "")))
            for m in data.get("resistances", [])
        ],
        retreatCost=data.get("retreatCost", 0),
        supertype=str(data.get("supertype", SUPERTYPE)),
        subtypes=[str(s) for s in data.get("subtypes", [BASIC_SUBTYPE])],
        dex=dex,
    )
    record.id = id or content_id(record)
    return record


def parse_canonical(text: str, *, id: str = "") -> CardRecord:
    """Inverse of canonical_text for the mechanical fields."""
    return record_from_dict(json.loads(text), id=id)


def spec_partial_dict(spec: CardSpec) -> dict[str, Any]:
    """The user-supplied fields plus the fixed supertype/subtypes."""
    return {
        "name": spec.name,
        "flavorText": spec.flavorText,
        "types": list(spec.types),
        "supertype": SUPERTYPE,
        "subtypes": [BASIC_SUBTYPE],
    }


def spec_query_text(spec: CardSpec) -> str:
    """Canonical one-line serialization of the three prompt fields.

    Uses the same serializer settings as canonical_text so query embeddings
    live in the same space as corpus embeddings.
    """
    payload = {"name": spec.name, "flavorText": spec.flavorText, "types": list(spec.types)}
    return json.dumps(payload, ensure_ascii=False, separators=(", ", ": "))


def apply_spec(record: CardRecord, spec: CardSpec) -> CardRecord:
    """Overwrite the prompt fields with the spec's values, byte-for-byte."""
    return replace(
        record,
        name=spec.name,
        flavorText=spec.flavorText,
        types=list(spec.types),
        supertype=SUPERTYPE,
        subtypes=[BASIC_SUBTYPE],
    )
