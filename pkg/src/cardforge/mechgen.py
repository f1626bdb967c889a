"""Mechanics generation: prompt assembly, chat-backend completion, and
validation/merge of the model output into a full CardRecord.

The prompt reproduces a four-block structure: a fixed generator instruction,
a reference block with the retrieved cards' canonical texts, the user's
partial card JSON, and the same partial JSON repeated and left open after
``"hp":`` so the model continues the object instead of starting over.
"""
from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from typing import Any, Protocol, Sequence

import requests

from .corpus import apply_aliases
from .errors import (
    AttemptLog,
    ConfigurationError,
    GenerationFailed,
    RetriableError,
    ValidationFailed,
    ValidationIssue,
)
from .model import (
    CardRecord,
    CardSpec,
    apply_spec,
    canonical_text,
    content_id,
    record_from_dict,
    spec_partial_dict,
    validate_record,
    _ENERGY_LOOKUP,
)

logger = logging.getLogger(__name__)

GENERATOR_INSTRUCTION = (
    'You are a Pokémon Card Generator. Complete the JSON that I started with '
    'the fields "hp", "abilities", "attacks", "resistances", "weaknesses", '
    'and "retreatCost".\n'
    'The field "ability" must have a field "text".\n'
    'Strictly follow the specified JSON format. Respond only with valid JSON. '
    'Do not write an introduction or summary. Field values cannot be empty or "".'
)

REFERENCE_PREFIX = (
    "Take these similar Pokémon cards as reference. "
    "Make the response similar but unique and novel:"
)

REPAIR_PREFIX = (
    "The previous response violated the card schema. "
    "Fix these problems and respond again with the complete JSON:"
)

_THINK_RE = re.compile(r"<think>.*?</think>", re.DOTALL)


@dataclass
class GenParams:
    temperature: float = 0.7
    seed: int = 0
    model_id: str = "Qwen3-14B"
    max_repair_attempts: int = 3
    retrieval_k: int = 5

    def __post_init__(self) -> None:
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must be in [0, 2]")
        if self.max_repair_attempts < 0:
            raise ValueError("max_repair_attempts must be >= 0")


@dataclass
class Message:
    role: str  # "system" | "user" | "assistant-prefix"
    content: str


@dataclass
class PromptBundle:
    messages: list[Message]
    retrieved_ids: list[str]
    params: GenParams

    def to_text(self) -> str:
        """Stable plain-text form, used for golden files and logs."""
        blocks = [f"<<{m.role}>>\n{m.content}" for m in self.messages]
        return "\n\n".join(blocks) + "\n"

    def wire_messages(self) -> list[dict[str, str]]:
        """OpenAI-style messages; the open-ended block rides as assistant."""
        wire = []
        for m in self.messages:
            role = "assistant" if m.role == "assistant-prefix" else m.role
            wire.append({"role": role, "content": m.content})
        return wire


@dataclass
class MechResult:
    record: CardRecord
    raw_completion: str
    repair_count: int
    prompt: PromptBundle


def partial_json_text(spec: CardSpec) -> str:
    """The user's fields as pretty JSON with inline arrays."""
    partial = spec_partial_dict(spec)
    lines = [
        f'  {json.dumps(key, ensure_ascii=False)}: '
        f'{json.dumps(value, ensure_ascii=False)},'
        for key, value in partial.items()
    ]
    lines[-1] = lines[-1].rstrip(",")
    return "{\n" + "\n".join(lines) + "\n}"


def open_ended_json_text(spec: CardSpec) -> str:
    """The partial JSON left open after ``"hp":`` to trigger completion."""
    closed = partial_json_text(spec)
    return closed[: -len("\n}")] + ',\n  "hp":'


def assemble_messages(spec: CardSpec, context: Sequence[CardRecord],
                      params: GenParams | None = None) -> PromptBundle:
    """Build the four-block prompt for a spec and its retrieved context."""
    if not context:
        raise ValueError("context must contain at least one reference card")
    params = params or GenParams()
    reference_block = REFERENCE_PREFIX + "\n" + "\n".join(
        canonical_text(card) for card in context
    )
    messages = [
        Message("system", GENERATOR_INSTRUCTION),
        Message("system", reference_block),
        Message("user", partial_json_text(spec)),
        Message("assistant-prefix", open_ended_json_text(spec)),
    ]
    return PromptBundle(
        messages=messages,
        retrieved_ids=[card.id for card in context],
        params=params,
    )


def card_completion_schema() -> dict[str, Any]:
    """JSON schema for structured-output backends."""
    energy = {"type": "string", "enum": list(_ENERGY_LOOKUP.values())}
    modifier = {
        "type": "object",
        "properties": {"type": energy, "value": {"type": "string"}},
        "required": ["type", "value"],
    }
    return {
        "type": "object",
        "properties": {
            "hp": {"type": "integer", "minimum": 10, "maximum": 400},
            "abilities": {
                "type": "array", "maxItems": 2,
                "items": {
                    "type": "object",
                    "properties": {"name": {"type": "string"},
                                   "text": {"type": "string"}},
                    "required": ["name", "text"],
                },
            },
            "attacks": {
                "type": "array", "minItems": 1, "maxItems": 4,
                "items": {
                    "type": "object",
                    "properties": {
                        "name": {"type": "string"},
                        "cost": {"type": "array", "items": energy, "maxItems": 5},
                        "damage": {"type": "string"},
                        "text": {"type": "string"},
                    },
                    "required": ["name", "cost", "damage"],
                },
            },
            "weaknesses": {"type": "array", "items": modifier, "maxItems": 2},
            "resistances": {"type": "array", "items": modifier, "maxItems": 2},
            "retreatCost": {"type": "integer", "minimum": 0, "maximum": 5},
        },
        "required": ["hp", "attacks", "weaknesses", "resistances", "retreatCost"],
    }


# ---------------------------------------------------------------------------
# Chat backends
# ---------------------------------------------------------------------------


class ChatBackend(Protocol):
    def complete(self, bundle: PromptBundle) -> str: ...


class HttpChatBackend:
    """Client for an OpenAI-compatible POST /v1/chat/completions endpoint.

    Requests schema-constrained output when building the request; if the
    server rejects the response_format field, the request is retried once
    unconstrained and the downgrade is logged. Transient failures are
    retried up to ``max_retries`` times; the count of the last call is kept
    on ``last_retries``.
    """

    def __init__(self, base_url: str, model_id: str = "Qwen3-14B",
                 timeout_s: float = 120.0, max_retries: int = 3,
                 api_key: str = "", use_schema: bool = True):
        self.base_url = base_url.rstrip("/")
        self.model_id = model_id
        self.timeout_s = timeout_s
        self.max_retries = max_retries
        self.api_key = api_key
        self.use_schema = use_schema
        self.last_retries = 0

    def _body(self, bundle: PromptBundle, constrained: bool) -> dict[str, Any]:
        body: dict[str, Any] = {
            "model": bundle.params.model_id or self.model_id,
            "messages": bundle.wire_messages(),
            "temperature": bundle.params.temperature,
            "seed": bundle.params.seed,
        }
        if constrained:
            body["response_format"] = {
                "type": "json_schema",
                "json_schema": {
                    "name": "card_completion",
                    "schema": card_completion_schema(),
                    "strict": True,
                },
            }
        return body

    def complete(self, bundle: PromptBundle) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        url = f"{self.base_url}/v1/chat/completions"

        constrained = self.use_schema
        retries = 0
        while True:
            try:
                resp = requests.post(url, json=self._body(bundle, constrained),
                                     headers=headers, timeout=self.timeout_s)
            except requests.RequestException as exc:
                if retries < self.max_retries:
                    retries += 1
                    logger.warning("chat backend error (%s), retry %d/%d",
                                   exc, retries, self.max_retries)
                    continue
                self.last_retries = retries
                raise RetriableError(f"chat backend unreachable: {exc}") from exc

            if resp.status_code == 400 and constrained:
                logger.warning(
                    "chat backend rejected the schema constraint (HTTP 400); "
                    "falling back to unconstrained output"
                )
                constrained = False
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                if retries < self.max_retries:
                    retries += 1
                    logger.warning("chat backend HTTP %d, retry %d/%d",
                                   resp.status_code, retries, self.max_retries)
                    continue
                self.last_retries = retries
                raise RetriableError(f"chat backend returned HTTP {resp.status_code}")
            if resp.status_code >= 400:
                raise ConfigurationError(
                    f"chat backend rejected request (HTTP {resp.status_code}): "
                    f"{resp.text[:200]}"
                )

            self.last_retries = retries
            payload = resp.json()
            try:
                return payload["choices"][0]["message"]["content"] or ""
            except (KeyError, IndexError, TypeError) as exc:
                raise ConfigurationError(
                    f"chat backend response missing message content: {payload}"
                ) from exc


def complete_card(bundle: PromptBundle, backend: ChatBackend) -> str:
    """Obtain the raw model text for a prompt bundle."""
    return backend.complete(bundle)


# ---------------------------------------------------------------------------
# Validation + merge
# ---------------------------------------------------------------------------


def _balanced_spans(text: str) -> list[tuple[int, int]]:
    """Byte spans of balanced top-level {...} objects, string-aware."""
    spans = []
    depth = 0
    start = -1
    in_string = False
    escape = False
    for i, ch in enumerate(text):
        if in_string:
            if escape:
                escape = False
            elif ch == "\\":
                escape = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch == "{":
            if depth == 0:
                start = i
            depth += 1
        elif ch == "}":
            if depth > 0:
                depth -= 1
                if depth == 0:
                    spans.append((start, i + 1))
    return spans


def strip_chatter(raw: str) -> str:
    """Drop reasoning blocks and anything outside the outermost JSON object."""
    cleaned = _THINK_RE.sub("", raw)
    spans = _balanced_spans(cleaned)
    if not spans:
        return cleaned.strip()
    start, end = max(spans, key=lambda s: s[1] - s[0])
    return cleaned[start:end]


def _parse_candidates(raw: str, prefix_text: str | None) -> list[dict[str, Any]]:
    cleaned = _THINK_RE.sub("", raw).strip()
    candidates: list[dict[str, Any]] = []
    texts = []
    spans = _balanced_spans(cleaned)
    if spans:
        start, end = max(spans, key=lambda s: s[1] - s[0])
        texts.append(cleaned[start:end])
    if prefix_text:
        texts.append(prefix_text + " " + cleaned)
    for text in texts:
        for s, e in _balanced_spans(text) or [(0, len(text))]:
            try:
                obj = json.loads(text[s:e])
            except json.JSONDecodeError:
                continue
            if isinstance(obj, dict):
                candidates.append(obj)
            break
    return candidates


def _canonicalize_energy(value: Any) -> Any:
    if isinstance(value, str):
        return _ENERGY_LOOKUP.get(value.strip().lower(), value)
    return value


def _coerce_completion(data: dict[str, Any]) -> tuple[dict[str, Any], list[ValidationIssue]]:
    """Numeric-string coercion and light shape repair. Unknown energy names
    and out-of-range values are left for the validator to report."""
    issues: list[ValidationIssue] = []
    out = dict(data)

    if "hp" in out and isinstance(out["hp"], str):
        try:
            out["hp"] = int(out["hp"].strip())
        except ValueError:
            issues.append(ValidationIssue(
                "invalid_value", "hp", f"unparseable integer {out['hp']!r}"))
            out.pop("hp")
    if isinstance(out.get("hp"), float) and float(out["hp"]).is_integer():
        out["hp"] = int(out["hp"])

    retreat = out.get("retreatCost")
    if isinstance(retreat, list):
        out["retreatCost"] = len(retreat)
    elif isinstance(retreat, str):
        try:
            out["retreatCost"] = int(retreat.strip())
        except ValueError:
            issues.append(ValidationIssue(
                "invalid_value", "retreatCost", f"unparseable integer {retreat!r}"))
            out.pop("retreatCost")

    abilities = out.get("abilities")
    if isinstance(abilities, dict):
        out["abilities"] = [abilities]

    attacks = out.get("attacks")
    if isinstance(attacks, list):
        fixed_attacks = []
        for attack in attacks:
            if not isinstance(attack, dict):
                issues.append(ValidationIssue(
                    "invalid_value", "attacks", f"attack entry is not an object: {attack!r}"))
                continue
            attack = dict(attack)
            damage = attack.get("damage", "")
            if isinstance(damage, (int, float)):
                damage = str(int(damage))
            attack["damage"] = str(damage or "").strip()
            cost = attack.get("cost") or []
            if isinstance(cost, list):
                attack["cost"] = [_canonicalize_energy(c) for c in cost]
            fixed_attacks.append(attack)
        out["attacks"] = fixed_attacks

    for key in ("weaknesses", "resistances"):
        mods = out.get(key)
        if isinstance(mods, dict):
            mods = [mods]
        if isinstance(mods, list):
            out[key] = [
                {**m, "type": _canonicalize_energy(m.get("type"))}
                if isinstance(m, dict) else m
                for m in mods
            ]

    return out, issues


def validate_and_merge(spec: CardSpec, raw: str,
                       prefix_text: str | None = None) -> CardRecord:
    """Parse a raw completion, merge it with the spec, validate everything.

    The spec's name/flavorText/types always overwrite whatever the model
    emitted. Raises ValidationFailed carrying one typed issue per violation;
    unparseable input yields a single syntax issue with the byte offset.
    """
    if not raw:
        raise ValueError("raw completion is empty")

    candidates = _parse_candidates(raw, prefix_text)
    data = next((c for c in candidates if "hp" in c or "attacks" in c),
                candidates[0] if candidates else None)
    if data is None:
        try:
            json.loads(_THINK_RE.sub("", raw).strip() or raw)
        except json.JSONDecodeError as exc:
            raise ValidationFailed([ValidationIssue(
                "syntax", "", reason=exc.msg, offset=exc.pos)]) from exc
        raise ValidationFailed([ValidationIssue(
            "syntax", "", reason="no JSON object found", offset=0)])

    data = apply_aliases(data)
    data, issues = _coerce_completion(data)

    missing = [name for name in ("hp", "attacks")
               if name not in data or data[name] in (None, [], "")]
    for name in missing:
        issues.append(ValidationIssue("missing_field", name))

    record = record_from_dict({**data, "hp": data.get("hp", 0) or 0})
    record = apply_spec(record, spec)
    record.id = content_id(record)

    seen = {(i.kind, i.field) for i in issues}
    for issue in validate_record(record):
        # Skip duplicate reports for fields already flagged missing.
        if ("missing_field", issue.field.split("[")[0].split(".")[0]) in seen:
            continue
        issues.append(issue)

    if issues:
        raise ValidationFailed(issues)
    return record


# ---------------------------------------------------------------------------
# Generation loop
# ---------------------------------------------------------------------------


def _repair_message(issues: list[ValidationIssue]) -> Message:
    lines = [REPAIR_PREFIX] + [f"- {issue}" for issue in issues]
    return Message("system", "\n".join(lines))


def generate_mechanics(spec: CardSpec, index, corpus: Sequence[CardRecord],
                       chat_backend: ChatBackend, embed_backend,
                       params: GenParams) -> MechResult:
    """retrieve -> assemble -> complete -> validate, with a bounded repair
    loop that feeds the violation list back as a corrective system message.
    """
    from .retrieval import retrieve_top_k

    by_id = {record.id: record for record in corpus}
    results = retrieve_top_k(spec, index, params.retrieval_k, embed_backend)
    context = [by_id[r.card_id] for r in results]

    bundle = assemble_messages(spec, context, params)
    prefix = open_ended_json_text(spec)
    attempts: list[AttemptLog] = []

    current = bundle
    for attempt in range(params.max_repair_attempts + 1):
        raw = complete_card(current, chat_backend)
        try:
            record = validate_and_merge(spec, raw, prefix_text=prefix)
        except ValidationFailed as exc:
            attempts.append(AttemptLog(raw_completion=raw, issues=exc.issues))
            logger.info("attempt %d rejected: %s", attempt + 1, exc)
            repair = _repair_message(exc.issues)
            current = PromptBundle(
                messages=current.messages[:-1] + [repair, current.messages[-1]],
                retrieved_ids=current.retrieved_ids,
                params=current.params,
            )
            continue
        return MechResult(record=record, raw_completion=raw,
                          repair_count=attempt, prompt=current)

    raise GenerationFailed(attempts)
