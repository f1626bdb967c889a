from __future__ import annotations

import json
import re
from pathlib import Path

import pytest

from cardforge.artgen import (
    ComfyUIClient,
    ImagePromptConfig,
    LoraSpec,
    build_graph,
    compose_image_prompt,
    generate_artwork,
    instantiate_workflow,
    load_template,
)
from cardforge.errors import BackendDataError, ConfigurationError, TemplateError
from cardforge.model import CardSpec

REPO = Path(__file__).resolve().parent.parent
TEMPLATE_PATH = REPO / "config" / "workflow.template.json"

ZERAORA_SPEC = CardSpec(
    name="Zeraora",
    flavorText=("It electrifies its claws and tears its opponents apart with "
                "them. Even if they dodge its attack, they'll be electrocuted "
                "by the flying sparks."),
    types=["Lightning"],
)


class TestComposeImagePrompt:
    def test_zeraora_with_default_tokens(self):
        positive, negative = compose_image_prompt(ZERAORA_SPEC, ImagePromptConfig())
        assert positive.startswith("Zeraora, Lightning, It electrifies its claws")
        assert "pokemon" in positive
        assert negative == "text, watermark, frame, border, human"

    def test_empty_token_lists(self):
        cfg = ImagePromptConfig(positive_tokens=[], negative_tokens=[])
        positive, negative = compose_image_prompt(ZERAORA_SPEC, cfg)
        assert positive == f"Zeraora, Lightning, {ZERAORA_SPEC.flavorText}"
        assert negative == ""

    def test_deterministic(self):
        cfg = ImagePromptConfig()
        assert compose_image_prompt(ZERAORA_SPEC, cfg) == \
            compose_image_prompt(ZERAORA_SPEC, cfg)

    def test_never_drops_spec_fields(self):
        spec = CardSpec(name="Tidecall", flavorText="A small tide spirit that "
                        "sings to the moon.", types=["Water", "Fairy"])
        positive, _ = compose_image_prompt(spec, ImagePromptConfig())
        assert spec.name in positive
        assert spec.flavorText in positive
        for type_name in spec.types:
            assert type_name in positive


class TestImagePromptConfig:
    def test_defaults(self):
        cfg = ImagePromptConfig()
        assert cfg.cfg == 3.5
        assert cfg.steps == 28
        assert (cfg.width, cfg.height) == (1024, 768)

    def test_megapixel_cap(self):
        with pytest.raises(ValueError, match="pixels"):
            ImagePromptConfig(width=2500, height=2000)

    def test_lora_cap(self):
        loras = [LoraSpec(name=f"l{i}.safetensors") for i in range(5)]
        with pytest.raises(ValueError, match="LoRA"):
            ImagePromptConfig(lora_specs=loras)

    def test_lora_strength_bounds(self):
        with pytest.raises(ValueError):
            LoraSpec(name="x.safetensors", strength=2.5)

    def test_cfg_and_steps_bounds(self):
        with pytest.raises(ValueError):
            ImagePromptConfig(cfg=0.5)
        with pytest.raises(ValueError):
            ImagePromptConfig(steps=0)


class TestInstantiateWorkflow:
    def test_no_placeholders_remain(self):
        graph = build_graph(ZERAORA_SPEC, ImagePromptConfig(seed=42),
                            load_template(TEMPLATE_PATH))
        assert not re.search(r"\{\{[A-Z_]+\}\}", json.dumps(graph))

    def test_seed_lands_in_sampler_node(self):
        graph = build_graph(ZERAORA_SPEC, ImagePromptConfig(seed=42),
                            load_template(TEMPLATE_PATH))
        samplers = [node for node in graph.values()
                    if node.get("class_type") == "KSampler"]
        assert samplers and samplers[0]["inputs"]["seed"] == 42

    def test_prompt_strings_json_escaped(self):
        spec = CardSpec(name='Quo"te', flavorText='It says "hello" and waves.',
                        types=["Psychic"])
        graph = build_graph(spec, ImagePromptConfig(), load_template(TEMPLATE_PATH))
        encoders = [node["inputs"]["text"] for node in graph.values()
                    if node.get("class_type") == "CLIPTextEncode"]
        assert any('"hello"' in text for text in encoders)

    def test_loras_substituted_as_array(self):
        cfg = ImagePromptConfig(lora_specs=[LoraSpec(name="style.safetensors",
                                                     strength=0.7)])
        graph = build_graph(ZERAORA_SPEC, cfg, load_template(TEMPLATE_PATH))
        stacks = [node for node in graph.values()
                  if node.get("class_type") == "LoraStackLoader"]
        assert stacks[0]["inputs"]["loras"] == [
            {"name": "style.safetensors", "strength": 0.7}]

    def test_unfilled_placeholder_rejected(self):
        with pytest.raises(TemplateError, match="unfilled"):
            instantiate_workflow('{"x": "{{NOT_PROVIDED}}"}', {})

    def test_missing_template_file(self, tmp_path):
        with pytest.raises(TemplateError, match="not found"):
            load_template(tmp_path / "nope.json")

    def test_same_seed_identical_graph(self):
        template = load_template(TEMPLATE_PATH)
        cfg = ImagePromptConfig(seed=1234)
        a = json.dumps(build_graph(ZERAORA_SPEC, cfg, template), sort_keys=True)
        b = json.dumps(build_graph(ZERAORA_SPEC, cfg, template), sort_keys=True)
        assert a == b


class TestGenerateArtwork:
    def _client(self, mock_backend) -> ComfyUIClient:
        return ComfyUIClient(base_url=mock_backend.base_url,
                             poll_interval_s=0.01, timeout_s=5.0)

    def test_full_flow_returns_artwork(self, mock_backend):
        cfg = ImagePromptConfig(seed=7)
        result = generate_artwork(ZERAORA_SPEC, cfg, self._client(mock_backend),
                                  TEMPLATE_PATH)
        assert result.backend_job_id == "job-1"
        assert result.prompt_used[0].startswith("Zeraora")
        assert result.image_bytes[:8] == b"\x89PNG\r\n\x1a\n"

    def test_submitted_graph_carries_seed(self, mock_backend):
        generate_artwork(ZERAORA_SPEC, ImagePromptConfig(seed=42),
                         self._client(mock_backend), TEMPLATE_PATH)
        graph = mock_backend.submitted_graphs[0]
        samplers = [n for n in graph.values() if n.get("class_type") == "KSampler"]
        assert samplers[0]["inputs"]["seed"] == 42

    def test_polls_until_done(self, mock_backend):
        mock_backend.history_pending_polls = 3
        result = generate_artwork(ZERAORA_SPEC, ImagePromptConfig(),
                                  self._client(mock_backend), TEMPLATE_PATH)
        assert result.image_bytes

    def test_wrong_dimensions_rejected(self, mock_backend):
        mock_backend.art_size = (512, 512)
        with pytest.raises(BackendDataError, match="512x512"):
            generate_artwork(ZERAORA_SPEC, ImagePromptConfig(),
                             self._client(mock_backend), TEMPLATE_PATH)

    def test_same_seed_same_submitted_payload(self, mock_backend):
        cfg = ImagePromptConfig(seed=99)
        client = self._client(mock_backend)
        generate_artwork(ZERAORA_SPEC, cfg, client, TEMPLATE_PATH)
        generate_artwork(ZERAORA_SPEC, cfg, client, TEMPLATE_PATH)
        a, b = mock_backend.submitted_graphs
        assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)

    def test_unreachable_backend_is_retriable(self):
        from cardforge.errors import RetriableError

        client = ComfyUIClient(base_url="http://127.0.0.1:9", timeout_s=1.0,
                               poll_interval_s=0.01, request_timeout_s=0.3)
        with pytest.raises(RetriableError):
            generate_artwork(ZERAORA_SPEC, ImagePromptConfig(), client, TEMPLATE_PATH)
