"""Artwork generation: compose diffusion prompts from the card spec, fill a
workflow template, submit it to a graph-based diffusion server (ComfyUI-style
HTTP API), and retrieve the finished image.

The workflow lives in an external JSON template with ``{{NAME}}``
placeholders so the diffusion model, sampler, and graph wiring can be swapped
without touching code.
"""
from __future__ import annotations

import io
import json
import logging
import re
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import requests
from PIL import Image

from .errors import BackendDataError, ConfigurationError, RetriableError, TemplateError
from .model import CardSpec

logger = logging.getLogger(__name__)

DEFAULT_POSITIVE_TOKENS = [
    "pokemon", "creature", "official art style", "clean lineart",
    "vibrant colors", "simple background",
]
DEFAULT_NEGATIVE_TOKENS = ["text", "watermark", "frame", "border", "human"]

_PLACEHOLDER_RE = re.compile(r"\{\{[A-Z_]+\}\}")
MAX_PIXELS = 4_000_000
MAX_LORAS = 4


@dataclass
class LoraSpec:
    name: str
    strength: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.strength <= 2.0:
            raise ValueError("lora strength must be in [0, 2]")


@dataclass
class ImagePromptConfig:
    positive_tokens: list[str] = field(default_factory=lambda: list(DEFAULT_POSITIVE_TOKENS))
    negative_tokens: list[str] = field(default_factory=lambda: list(DEFAULT_NEGATIVE_TOKENS))
    lora_specs: list[LoraSpec] = field(default_factory=list)
    cfg: float = 3.5
    steps: int = 28
    width: int = 1024
    height: int = 768
    seed: int = 0

    def __post_init__(self) -> None:
        if not 1.0 <= self.cfg <= 20.0:
            raise ValueError("cfg must be in [1, 20]")
        if not 1 <= self.steps <= 100:
            raise ValueError("steps must be in [1, 100]")
        if self.width * self.height > MAX_PIXELS:
            raise ValueError(f"{self.width}x{self.height} exceeds {MAX_PIXELS} pixels")
        if len(self.lora_specs) > MAX_LORAS:
            raise ValueError(f"at most {MAX_LORAS} LoRAs")


@dataclass
class ArtworkResult:
    image_bytes: bytes
    prompt_used: tuple[str, str]
    config: ImagePromptConfig
    backend_job_id: str


def compose_image_prompt(spec: CardSpec, cfg: ImagePromptConfig) -> tuple[str, str]:
    """Positive prompt = name, type names, flavor text, then style tokens."""
    positive = ", ".join([spec.name, *spec.types, spec.flavorText, *cfg.positive_tokens])
    negative = ", ".join(cfg.negative_tokens)
    return positive, negative


def instantiate_workflow(template_text: str, values: dict[str, Any]) -> dict[str, Any]:
    """Fill every ``"{{KEY}}"`` placeholder with the JSON encoding of its value.

    Placeholders are quoted in the template so the file itself stays valid
    JSON; substitution replaces the quoted token wholesale, which lets one
    mechanism carry strings, numbers, and arrays alike.
    """
    text = template_text
    for key, value in values.items():
        text = text.replace(f'"{{{{{key}}}}}"', json.dumps(value, ensure_ascii=False))
    leftover = _PLACEHOLDER_RE.findall(text)
    if leftover:
        raise TemplateError(f"unfilled workflow placeholders: {sorted(set(leftover))}")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise TemplateError(f"workflow template is not valid JSON after substitution: {exc}") from exc


def build_graph(spec: CardSpec, cfg: ImagePromptConfig, template_text: str) -> dict[str, Any]:
    positive, negative = compose_image_prompt(spec, cfg)
    return instantiate_workflow(template_text, {
        "POSITIVE_PROMPT": positive,
        "NEGATIVE_PROMPT": negative,
        "SEED": cfg.seed,
        "CFG": cfg.cfg,
        "STEPS": cfg.steps,
        "WIDTH": cfg.width,
        "HEIGHT": cfg.height,
        "LORAS": [{"name": l.name, "strength": l.strength} for l in cfg.lora_specs],
    })


class ComfyUIClient:
    """Minimal client for the ComfyUI HTTP API: POST /prompt to queue a
    graph, GET /history/{id} until outputs appear, GET /view for the bytes."""

    def __init__(self, base_url: str, poll_interval_s: float = 1.0,
                 timeout_s: float = 180.0, request_timeout_s: float = 30.0):
        self.base_url = base_url.rstrip("/")
        self.poll_interval_s = poll_interval_s
        self.timeout_s = timeout_s
        self.request_timeout_s = request_timeout_s
        self.client_id = str(uuid.uuid4())

    def submit_graph(self, graph: dict[str, Any]) -> str:
        try:
            resp = requests.post(
                f"{self.base_url}/prompt",
                json={"prompt": graph, "client_id": self.client_id},
                timeout=self.request_timeout_s,
            )
        except requests.RequestException as exc:
            raise RetriableError(f"diffusion backend unreachable: {exc}") from exc
        if resp.status_code >= 400:
            raise ConfigurationError(
                f"diffusion backend rejected the workflow (HTTP {resp.status_code}): "
                f"{resp.text[:300]}"
            )
        job_id = resp.json().get("prompt_id")
        if not job_id:
            raise BackendDataError("diffusion backend response missing prompt_id")
        return str(job_id)

    def wait_for_outputs(self, job_id: str) -> dict[str, Any]:
        deadline = time.monotonic() + self.timeout_s
        while True:
            try:
                resp = requests.get(f"{self.base_url}/history/{job_id}",
                                    timeout=self.request_timeout_s)
            except requests.RequestException as exc:
                raise RetriableError(f"diffusion backend unreachable: {exc}") from exc
            if resp.status_code < 400:
                entry = resp.json().get(job_id) or {}
                outputs = entry.get("outputs")
                if outputs:
                    return outputs
                status = (entry.get("status") or {}).get("status_str", "")
                if status == "error":
                    raise BackendDataError(f"diffusion job {job_id} failed on the backend")
            if time.monotonic() >= deadline:
                raise RetriableError(
                    f"diffusion job {job_id} did not finish within {self.timeout_s}s"
                )
            time.sleep(self.poll_interval_s)

    def fetch_image(self, image_ref: dict[str, Any]) -> bytes:
        params = {
            "filename": image_ref.get("filename", ""),
            "subfolder": image_ref.get("subfolder", ""),
            "type": image_ref.get("type", "output"),
        }
        try:
            resp = requests.get(f"{self.base_url}/view", params=params,
                                timeout=self.request_timeout_s)
        except requests.RequestException as exc:
            raise RetriableError(f"diffusion backend unreachable: {exc}") from exc
        if resp.status_code >= 400:
            raise BackendDataError(
                f"could not download image {params['filename']!r} "
                f"(HTTP {resp.status_code})"
            )
        return resp.content

    def run(self, graph: dict[str, Any]) -> tuple[str, bytes]:
        job_id = self.submit_graph(graph)
        outputs = self.wait_for_outputs(job_id)
        for node_output in outputs.values():
            images = node_output.get("images") or []
            if images:
                return job_id, self.fetch_image(images[0])
        raise BackendDataError(f"diffusion job {job_id} produced no image outputs")


def load_template(path: Path) -> str:
    path = Path(path)
    if not path.exists():
        raise TemplateError(f"workflow template not found: {path}")
    return path.read_text(encoding="utf-8")


def generate_artwork(spec: CardSpec, cfg: ImagePromptConfig,
                     backend: ComfyUIClient, template_path: Path) -> ArtworkResult:
    """Instantiate the workflow, run it, and verify the returned image."""
    template_text = load_template(template_path)
    graph = build_graph(spec, cfg, template_text)
    job_id, image_bytes = backend.run(graph)

    try:
        with Image.open(io.BytesIO(image_bytes)) as img:
            img_format = img.format
            size = img.size
    except Exception as exc:
        raise BackendDataError(f"returned image does not decode: {exc}") from exc
    if img_format != "PNG":
        raise BackendDataError(f"expected a PNG payload, got {img_format}")
    if size != (cfg.width, cfg.height):
        raise BackendDataError(
            f"backend returned {size[0]}x{size[1]}, requested {cfg.width}x{cfg.height}"
        )

    return ArtworkResult(
        image_bytes=image_bytes,
        prompt_used=compose_image_prompt(spec, cfg),
        config=cfg,
        backend_job_id=job_id,
    )
