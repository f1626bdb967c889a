from __future__ import annotations

import json
from pathlib import Path

import pytest

from cardforge.errors import (
    ConfigurationError,
    GenerationFailed,
    RetriableError,
    ValidationFailed,
)
from cardforge.mechgen import (
    GENERATOR_INSTRUCTION,
    REFERENCE_PREFIX,
    GenParams,
    HttpChatBackend,
    MechResult,
    PromptBundle,
    assemble_messages,
    complete_card,
    generate_mechanics,
    open_ended_json_text,
    partial_json_text,
    strip_chatter,
    validate_and_merge,
)
from cardforge.model import CardSpec, canonical_text
from cardforge.retrieval import build_index

from .backends import DROP

ZERAORA_SPEC = CardSpec(
    name="Zeraora",
    flavorText=("It electrifies its claws and tears its opponents apart with "
                "them. Even if they dodge its attack, they'll be electrocuted "
                "by the flying sparks."),
    types=["Lightning"],
)

VALID_COMPLETION = json.dumps({
    "hp": 70,
    "abilities": [],
    "attacks": [{"name": "Spark", "cost": ["Lightning"], "damage": "20"}],
    "weaknesses": [{"type": "Fighting", "value": "x2"}],
    "resistances": [],
    "retreatCost": 1,
})


class ScriptedChat:
    """In-process chat backend driven by a list of completions."""

    def __init__(self, responses):
        self.responses = list(responses)
        self.bundles: list[PromptBundle] = []

    def complete(self, bundle: PromptBundle) -> str:
        self.bundles.append(bundle)
        return self.responses.pop(0)


@pytest.fixture()
def context(corpus):
    return corpus[:5]


class TestGenParams:
    def test_defaults(self):
        params = GenParams()
        assert params.temperature == 0.7
        assert params.model_id == "Qwen3-14B"
        assert params.max_repair_attempts == 3

    def test_bounds(self):
        with pytest.raises(ValueError):
            GenParams(temperature=2.5)
        with pytest.raises(ValueError):
            GenParams(max_repair_attempts=-1)


class TestAssembleMessages:
    def test_four_block_structure(self, context):
        bundle = assemble_messages(ZERAORA_SPEC, context)
        roles = [m.role for m in bundle.messages]
        assert roles == ["system", "system", "user", "assistant-prefix"]

    def test_instruction_block_sentences(self, context):
        bundle = assemble_messages(ZERAORA_SPEC, context)
        block1 = bundle.messages[0].content
        assert "You are a Pokémon Card Generator" in block1
        assert "Respond only with valid JSON." in block1
        for field in ("hp", "abilities", "attacks", "resistances",
                      "weaknesses", "retreatCost"):
            assert f'"{field}"' in block1

    def test_reference_block_contains_all_context_texts_in_order(self, context):
        bundle = assemble_messages(ZERAORA_SPEC, context)
        block2 = bundle.messages[1].content
        assert block2.startswith(REFERENCE_PREFIX)
        positions = [block2.index(canonical_text(c)) for c in context]
        assert positions == sorted(positions)
        assert len(positions) == 5

    def test_user_block_is_partial_json(self, context):
        bundle = assemble_messages(ZERAORA_SPEC, context)
        data = json.loads(bundle.messages[2].content)
        assert data == {
            "name": ZERAORA_SPEC.name,
            "flavorText": ZERAORA_SPEC.flavorText,
            "types": ["Lightning"],
            "supertype": "Pokémon",
            "subtypes": ["Basic"],
        }

    def test_final_block_ends_open_after_hp(self, context):
        bundle = assemble_messages(ZERAORA_SPEC, context)
        assert bundle.messages[-1].content.rstrip().endswith('"hp":')

    def test_byte_deterministic(self, context):
        a = assemble_messages(ZERAORA_SPEC, context).to_text()
        b = assemble_messages(ZERAORA_SPEC, context).to_text()
        assert a == b

    def test_golden_file(self, corpus, corpus_by_id, corpus_index, stub_backend,
                         repo_root):
        from cardforge.retrieval import retrieve_top_k

        results = retrieve_top_k(ZERAORA_SPEC, corpus_index, 5, stub_backend)
        bundle = assemble_messages(
            ZERAORA_SPEC, [corpus_by_id[r.card_id] for r in results],
            GenParams(seed=42))
        golden = (repo_root / "fixtures" / "prompts" / "zeraora_5card.txt")
        assert bundle.to_text().encode("utf-8") == golden.read_bytes()

    def test_empty_context_rejected(self):
        with pytest.raises(ValueError):
            assemble_messages(ZERAORA_SPEC, [])

    def test_wire_messages_map_assistant_prefix(self, context):
        bundle = assemble_messages(ZERAORA_SPEC, context)
        wire = bundle.wire_messages()
        assert wire[-1]["role"] == "assistant"


class TestValidateAndMerge:
    PREFIX = open_ended_json_text(ZERAORA_SPEC)

    def test_zeraora_completion_reproduces_fixture(self, zeraora):
        completion = (' "120",\n  "abilities": [],\n'
                      '  "attacks": [{"name": "Slash", "cost": ["Colorless"], "damage": "20"},'
                      ' {"name": "Wild Charge", "cost": ["Lightning", "Lightning", "Colorless"],'
                      ' "damage": "120", "text": "This Pokemon does 20 damage to itself."}],\n'
                      '  "weaknesses": [{"type": "Fighting", "value": "x2"}],\n'
                      '  "resistances": [{"type": "Metal", "value": "-20"}],\n'
                      '  "convertedRetreatCost": 1\n}')
        record = validate_and_merge(ZERAORA_SPEC, completion, prefix_text=self.PREFIX)
        assert record == zeraora

    def test_empty_object_reports_missing_fields(self):
        with pytest.raises(ValidationFailed) as excinfo:
            validate_and_merge(ZERAORA_SPEC, "{}")
        missing = {i.field for i in excinfo.value.issues if i.kind == "missing_field"}
        assert missing == {"hp", "attacks"}

    def test_damage_modifier_ok_hp_out_of_range_rejected(self):
        raw = json.dumps({"hp": "1205",
                          "attacks": [{"name": "Zap", "cost": ["Lightning"],
                                       "damage": "20x"}]})
        with pytest.raises(ValidationFailed) as excinfo:
            validate_and_merge(ZERAORA_SPEC, raw)
        issues = excinfo.value.issues
        assert any(i.field == "hp" and "outside" in i.reason for i in issues)
        assert not any("damage" in i.field for i in issues)

    def test_spec_fields_overwrite_model_output(self):
        raw = json.dumps({
            "name": "Impostor", "flavorText": "wrong", "types": ["Fire"],
            "hp": 70,
            "attacks": [{"name": "Spark", "cost": ["Lightning"], "damage": "20"}],
        })
        record = validate_and_merge(ZERAORA_SPEC, raw)
        assert record.name == ZERAORA_SPEC.name
        assert record.flavorText == ZERAORA_SPEC.flavorText
        assert record.types == ["Lightning"]

    def test_chatter_and_think_blocks_stripped(self):
        raw = ("<think>reasoning about stats...</think>\n"
               "Here is your card!\n" + VALID_COMPLETION + "\nEnjoy!")
        record = validate_and_merge(ZERAORA_SPEC, raw)
        assert record.hp == 70

    def test_unparseable_input_reports_byte_offset(self):
        with pytest.raises(ValidationFailed) as excinfo:
            validate_and_merge(ZERAORA_SPEC, "utterly not json")
        issue = excinfo.value.issues[0]
        assert issue.kind == "syntax"
        assert issue.offset is not None

    def test_numeric_coercions(self):
        raw = json.dumps({
            "hp": "120",
            "attacks": [{"name": "Spark", "cost": ["lightning"], "damage": 20}],
            "retreatCost": ["Colorless", "Colorless"],
        })
        record = validate_and_merge(ZERAORA_SPEC, raw)
        assert record.hp == 120
        assert record.attacks[0].damage == "20"
        assert record.attacks[0].cost == ["Lightning"]
        assert record.retreatCost == 2

    def test_single_ability_object_wrapped(self):
        raw = json.dumps({
            "hp": 70,
            "ability": {"name": "Static Veil", "text": "Prevent effects."},
            "attacks": [{"name": "Spark", "cost": ["Lightning"], "damage": "20"}],
        })
        record = validate_and_merge(ZERAORA_SPEC, raw)
        assert len(record.abilities) == 1

    def test_unknown_energy_reported(self):
        raw = json.dumps({
            "hp": 70,
            "attacks": [{"name": "Zap", "cost": ["Electric"], "damage": "20"}],
        })
        with pytest.raises(ValidationFailed) as excinfo:
            validate_and_merge(ZERAORA_SPEC, raw)
        assert any("cost" in i.field for i in excinfo.value.issues)

    def test_empty_raw_rejected(self):
        with pytest.raises(ValueError):
            validate_and_merge(ZERAORA_SPEC, "")


def test_strip_chatter_takes_longest_balanced_object():
    text = 'noise {"a": 1} more {"b": {"c": [1, 2, {"d": "}"}]}} tail'
    assert json.loads(strip_chatter(text)) == {"b": {"c": [1, 2, {"d": "}"}]}}


class TestHttpChatBackend:
    def _bundle(self, context):
        return assemble_messages(ZERAORA_SPEC, context, GenParams(seed=99, temperature=0.3))

    def test_passthrough(self, mock_backend, context):
        mock_backend.chat_script = ["a fixed completion"]
        backend = HttpChatBackend(base_url=mock_backend.base_url)
        assert complete_card(self._bundle(context), backend) == "a fixed completion"

    def test_seed_and_temperature_passed_through(self, mock_backend, context):
        mock_backend.chat_script = ["ok"]
        backend = HttpChatBackend(base_url=mock_backend.base_url)
        complete_card(self._bundle(context), backend)
        request = mock_backend.chat_requests[0]
        assert request["seed"] == 99
        assert request["temperature"] == 0.3
        assert request["messages"][-1]["role"] == "assistant"
        assert request["response_format"]["type"] == "json_schema"

    def test_two_failures_then_success_records_retries(self, mock_backend, context):
        mock_backend.chat_script = [DROP, DROP, "recovered"]
        backend = HttpChatBackend(base_url=mock_backend.base_url, max_retries=3)
        assert complete_card(self._bundle(context), backend) == "recovered"
        assert backend.last_retries == 2

    def test_retries_exhausted_raises_retriable(self, mock_backend, context):
        mock_backend.chat_script = [DROP, DROP, DROP]
        backend = HttpChatBackend(base_url=mock_backend.base_url, max_retries=2)
        with pytest.raises(RetriableError):
            complete_card(self._bundle(context), backend)

    def test_schema_rejection_downgrades_to_unconstrained(self, mock_backend,
                                                          context, caplog):
        mock_backend.chat_script = [400, "after downgrade"]
        backend = HttpChatBackend(base_url=mock_backend.base_url)
        with caplog.at_level("WARNING"):
            assert complete_card(self._bundle(context), backend) == "after downgrade"
        assert any("falling back to unconstrained" in m for m in caplog.messages)
        assert "response_format" in mock_backend.chat_requests[0]
        assert "response_format" not in mock_backend.chat_requests[1]

    def test_hard_rejection_is_configuration_error(self, mock_backend, context):
        mock_backend.chat_script = [400]
        backend = HttpChatBackend(base_url=mock_backend.base_url, use_schema=False)
        with pytest.raises(ConfigurationError):
            complete_card(self._bundle(context), backend)

    def test_deterministic_mock_same_seed_same_output(self, mock_backend, context):
        mock_backend.chat_script = [VALID_COMPLETION, VALID_COMPLETION]
        backend = HttpChatBackend(base_url=mock_backend.base_url)
        first = complete_card(self._bundle(context), backend)
        second = complete_card(self._bundle(context), backend)
        assert first == second


class TestGenerateMechanics:
    def _run(self, chat, corpus, corpus_index, stub_backend, attempts=3):
        params = GenParams(seed=1, max_repair_attempts=attempts)
        return generate_mechanics(ZERAORA_SPEC, corpus_index, corpus, chat,
                                  stub_backend, params)

    def test_valid_on_first_try(self, corpus, corpus_index, stub_backend):
        chat = ScriptedChat([VALID_COMPLETION])
        result = self._run(chat, corpus, corpus_index, stub_backend)
        assert isinstance(result, MechResult)
        assert result.repair_count == 0
        assert result.record.name == "Zeraora"
        assert len(result.prompt.retrieved_ids) == 5

    def test_two_invalid_then_valid(self, corpus, corpus_index, stub_backend):
        chat = ScriptedChat(["not json", "{}", VALID_COMPLETION])
        result = self._run(chat, corpus, corpus_index, stub_backend)
        assert result.repair_count == 2
        # repair prompts carry the error list as a corrective system message
        second_bundle = chat.bundles[1]
        roles = [m.role for m in second_bundle.messages]
        assert roles[-2:] == ["system", "assistant-prefix"]
        assert "violated the card schema" in second_bundle.messages[-2].content

    def test_always_invalid_fails_with_all_attempt_logs(self, corpus, corpus_index,
                                                        stub_backend):
        chat = ScriptedChat(["{}", "{}", "{}", "{}"])
        with pytest.raises(GenerationFailed) as excinfo:
            self._run(chat, corpus, corpus_index, stub_backend, attempts=3)
        assert len(excinfo.value.attempts) == 4
        assert all(log.issues for log in excinfo.value.attempts)

    def test_spec_preserved_byte_for_byte(self, corpus, corpus_index, stub_backend):
        mutated = json.dumps({
            "name": "Hijack", "flavorText": "nope", "types": ["Grass"],
            "hp": 70,
            "attacks": [{"name": "Spark", "cost": ["Lightning"], "damage": "20"}],
            "weaknesses": [{"type": "Fighting", "value": "x2"}],
            "retreatCost": 1,
        })
        chat = ScriptedChat([mutated])
        result = self._run(chat, corpus, corpus_index, stub_backend)
        assert result.record.name == ZERAORA_SPEC.name
        assert result.record.flavorText == ZERAORA_SPEC.flavorText
        assert result.record.types == ZERAORA_SPEC.types


def test_partial_json_roundtrip():
    text = partial_json_text(ZERAORA_SPEC)
    assert json.loads(text)["name"] == "Zeraora"
    open_text = open_ended_json_text(ZERAORA_SPEC)
    assert open_text.endswith('"hp":')
    assert open_text.startswith(text[: -len("\n}")])
