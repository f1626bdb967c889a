"""The shared generation engine behind both the CLI and the HTTP service.

One attempt = retrieval -> (mechanics || artwork, concurrently) -> render ->
lint. Stage wall times and backend wall times are recorded separately so the
pipeline's own overhead is visible per attempt.
"""
from __future__ import annotations

import base64
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from .artgen import (
    ArtworkResult,
    ComfyUIClient,
    ImagePromptConfig,
    LoraSpec,
    generate_artwork,
)
from .config import AppConfig
from .corpus import corpus_content_hash, load_fixture_corpus
from .errors import ConfigurationError
from .lint import (
    CorpusStats,
    LintConfig,
    LintReport,
    compute_corpus_stats,
    lint_card,
    load_corpus_stats,
    save_corpus_stats,
)
from .mechgen import GenParams, HttpChatBackend, MechResult, generate_mechanics
from .model import CardRecord, CardSpec, canonical_dict
from .retrieval import (
    EmbeddingIndex,
    HttpEmbedder,
    StubEmbedder,
    build_index,
    load_index,
    save_index,
)
from .synth import RenderedCard, RenderTemplate, render_card

logger = logging.getLogger(__name__)

ADAPTATION_INITIAL = "initial"
ADAPTATION_PROMPT = "prompt_adjustment"
ADAPTATION_REGEN = "regeneration"
ADAPTATION_PARAMS = "parameter_tuning"
ADAPTATION_IDEA = "idea_change"
ADAPTATION_TOUCHUP = "manual_touchup"
DECLARED_ADAPTATIONS = (ADAPTATION_IDEA, ADAPTATION_TOUCHUP)


# ---------------------------------------------------------------------------
# Backend wall-time accounting
# ---------------------------------------------------------------------------


class BackendClock:
    """Thread-safe accumulator for time spent inside backend calls."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self.total_s = 0.0

    def add(self, seconds: float) -> None:
        with self._lock:
            self.total_s += seconds

    def timed(self, fn: Callable) -> Callable:
        def wrapper(*args, **kwargs):
            start = time.perf_counter()
            try:
                return fn(*args, **kwargs)
            finally:
                self.add(time.perf_counter() - start)
        return wrapper


class _TimedProxy:
    """Wraps a backend object, charging the named methods to a clock."""

    def __init__(self, inner: Any, clock: BackendClock, methods: tuple[str, ...]):
        self._inner = inner
        self._clock = clock
        self._methods = methods

    def __getattr__(self, name: str) -> Any:
        attr = getattr(self._inner, name)
        if name in self._methods and callable(attr):
            return self._clock.timed(attr)
        return attr


# ---------------------------------------------------------------------------
# Library: corpus + index + stats
# ---------------------------------------------------------------------------


@dataclass
class Library:
    records: list[CardRecord]
    by_id: dict[str, CardRecord]
    index: EmbeddingIndex
    stats: CorpusStats
    corpus_hash: str

    @classmethod
    def load(cls, config: AppConfig, embed_backend: Any,
             rebuild: bool = False) -> "Library":
        """Load the fixture corpus and bring index + stats up to date.

        The persisted index is reused only when its corpus hash and model id
        still match; anything stale is rebuilt and re-persisted.
        """
        fixture = config.path("fixture_path")
        if not fixture.exists():
            raise ConfigurationError(f"corpus fixture not found: {fixture}")
        records = load_fixture_corpus(fixture)
        digest = corpus_content_hash(records)

        index_path = config.path("index_path")
        index = None
        if not rebuild and index_path.exists():
            try:
                candidate = load_index(index_path)
            except (ValueError, OSError, KeyError) as exc:
                logger.warning("could not load index %s (%s); rebuilding", index_path, exc)
                candidate = None
            if (candidate is not None
                    and candidate.corpus_hash == digest
                    and candidate.model_id == embed_backend.model_id):
                index = candidate
        if index is None:
            logger.info("building embedding index for %d cards", len(records))
            index = build_index(records, embed_backend, corpus_hash=digest)
            save_index(index, index_path)

        stats_path = config.path("stats_path")
        stats = None
        if not rebuild and stats_path.exists():
            try:
                stats = load_corpus_stats(stats_path)
            except (ValueError, KeyError) as exc:
                logger.warning("could not load stats %s (%s); recomputing", stats_path, exc)
        if stats is None or stats.card_count != len(records):
            lint_cfg = config.section("lint")
            stats = compute_corpus_stats(
                records, vocab_min_count=int(lint_cfg.get("vocab_min_count", 3)))
            save_corpus_stats(stats, stats_path)

        return cls(
            records=records,
            by_id={r.id: r for r in records},
            index=index,
            stats=stats,
            corpus_hash=digest,
        )


# ---------------------------------------------------------------------------
# Config -> objects
# ---------------------------------------------------------------------------


def make_embed_backend(config: AppConfig):
    section = config.section("embedding")
    mode = section.get("mode", "stub")
    if mode == "stub":
        return StubEmbedder(dim=int(section.get("dim", 64)))
    if mode == "http":
        return HttpEmbedder(
            base_url=section["base_url"],
            model_id=section.get("model_id", "nomic-embed-text-v1.5"),
            timeout_s=float(section.get("timeout_s", 60.0)),
        )
    raise ConfigurationError(f"unknown embedding mode {mode!r}")


def make_chat_backend(config: AppConfig) -> HttpChatBackend:
    section = config.section("chat")
    return HttpChatBackend(
        base_url=section["base_url"],
        model_id=section.get("model_id", "Qwen3-14B"),
        timeout_s=float(section.get("timeout_s", 120.0)),
        max_retries=int(section.get("max_retries", 3)),
        use_schema=bool(section.get("use_schema", True)),
    )


def make_diffusion_backend(config: AppConfig) -> ComfyUIClient:
    section = config.section("diffusion")
    return ComfyUIClient(
        base_url=section["base_url"],
        poll_interval_s=float(section.get("poll_interval_s", 1.0)),
        timeout_s=float(section.get("timeout_s", 180.0)),
    )


def make_lint_config(config: AppConfig) -> LintConfig:
    section = config.section("lint")
    return LintConfig(
        z_error=float(section.get("z_error", 3.0)),
        z_warning=float(section.get("z_warning", 2.0)),
        repetition_overlap=float(section.get("repetition_overlap", 0.6)),
        vocab_coverage_min=float(section.get("vocab_coverage_min", 0.4)),
        vocab_min_count=int(section.get("vocab_min_count", 3)),
    )


def spec_from_dict(data: dict[str, Any]) -> CardSpec:
    return CardSpec(
        name=str(data.get("name", "")),
        flavorText=str(data.get("flavorText", "")),
        types=[str(t) for t in data.get("types", [])],
    )


def params_from_dict(data: dict[str, Any], config: AppConfig) -> GenParams:
    gen = config.section("generation")
    chat = config.section("chat")
    return GenParams(
        temperature=float(data.get("temperature", gen.get("temperature", 0.7))),
        seed=int(data.get("seed", 0)),
        model_id=str(data.get("model_id", chat.get("model_id", "Qwen3-14B"))),
        max_repair_attempts=int(data.get("max_repair_attempts",
                                         gen.get("max_repair_attempts", 3))),
        retrieval_k=int(data.get("retrieval_k", config.get("retrieval_k", 5))),
    )


def image_cfg_from_dict(data: dict[str, Any], config: AppConfig) -> ImagePromptConfig:
    image = config.section("image")
    loras = data.get("loras", image.get("loras", []))
    return ImagePromptConfig(
        positive_tokens=list(data.get("positive_tokens", image.get("positive_tokens", []))),
        negative_tokens=list(data.get("negative_tokens", image.get("negative_tokens", []))),
        lora_specs=[LoraSpec(name=l["name"], strength=float(l.get("strength", 1.0)))
                    for l in loras],
        cfg=float(data.get("cfg", image.get("cfg", 3.5))),
        steps=int(data.get("steps", image.get("steps", 28))),
        width=int(data.get("width", image.get("width", 1024))),
        height=int(data.get("height", image.get("height", 768))),
        seed=int(data.get("seed", 0)),
    )


def spec_to_dict(spec: CardSpec) -> dict[str, Any]:
    return {"name": spec.name, "flavorText": spec.flavorText, "types": list(spec.types)}


def params_to_dict(params: GenParams) -> dict[str, Any]:
    return {
        "temperature": params.temperature,
        "seed": params.seed,
        "model_id": params.model_id,
        "max_repair_attempts": params.max_repair_attempts,
        "retrieval_k": params.retrieval_k,
    }


def image_cfg_to_dict(cfg: ImagePromptConfig) -> dict[str, Any]:
    return {
        "positive_tokens": list(cfg.positive_tokens),
        "negative_tokens": list(cfg.negative_tokens),
        "loras": [{"name": l.name, "strength": l.strength} for l in cfg.lora_specs],
        "cfg": cfg.cfg,
        "steps": cfg.steps,
        "width": cfg.width,
        "height": cfg.height,
        "seed": cfg.seed,
    }


# ---------------------------------------------------------------------------
# Adaptation classification
# ---------------------------------------------------------------------------


def _without_seed(data: dict[str, Any]) -> dict[str, Any]:
    return {k: v for k, v in data.items() if k != "seed"}


def classify_adaptation(previous: dict[str, Any] | None,
                        spec: dict[str, Any], params: dict[str, Any],
                        image_cfg: dict[str, Any]) -> str:
    """Pure classification of consecutive attempt inputs.

    spec changed -> prompt_adjustment; non-seed parameters changed ->
    parameter_tuning; otherwise (seeds only, or an exact retry) ->
    regeneration. The first attempt of a session is `initial`.
    """
    if previous is None:
        return ADAPTATION_INITIAL
    if previous["spec"] != spec:
        return ADAPTATION_PROMPT
    if (_without_seed(previous["params"]) != _without_seed(params)
            or _without_seed(previous["image_cfg"]) != _without_seed(image_cfg)):
        return ADAPTATION_PARAMS
    return ADAPTATION_REGEN


# ---------------------------------------------------------------------------
# Attempt execution
# ---------------------------------------------------------------------------


@dataclass
class StageTimings:
    stages_ms: dict[str, float] = field(default_factory=dict)
    backend_ms: float = 0.0

    @property
    def total_ms(self) -> float:
        return sum(self.stages_ms.values())

    @property
    def overhead_ms(self) -> float:
        return self.total_ms - self.backend_ms

    def to_dict(self) -> dict[str, Any]:
        return {
            "stages_ms": {k: round(v, 3) for k, v in self.stages_ms.items()},
            "backend_ms": round(self.backend_ms, 3),
            "total_ms": round(self.total_ms, 3),
            "overhead_ms": round(self.overhead_ms, 3),
        }


@dataclass
class AttemptArtifacts:
    mech: MechResult
    art: ArtworkResult
    render: RenderedCard
    lint: LintReport
    timings: StageTimings


def run_attempt(spec: CardSpec, params: GenParams, image_cfg: ImagePromptConfig,
                library: Library, chat_backend: Any, embed_backend: Any,
                diffusion_backend: Any, workflow_template: Path,
                render_template: RenderTemplate, lint_config: LintConfig,
                artwork_override: bytes | None = None) -> AttemptArtifacts:
    """Run one full attempt. Mechanics and artwork run concurrently; both
    branches must succeed before synthesis. Failures propagate as-is so the
    caller can persist whichever branch did finish (see service.handle_generate).
    """
    clock = BackendClock()
    chat = _TimedProxy(chat_backend, clock, ("complete",))
    embed = _TimedProxy(embed_backend, clock, ("embed_batch",)) \
        if not isinstance(embed_backend, StubEmbedder) else embed_backend
    diffusion = _TimedProxy(diffusion_backend, clock, ("run",))

    timings = StageTimings()

    def mech_branch() -> MechResult:
        start = time.perf_counter()
        try:
            return generate_mechanics(spec, library.index, library.records,
                                      chat, embed, params)
        finally:
            timings.stages_ms["mechanics"] = (time.perf_counter() - start) * 1000

    def art_branch() -> ArtworkResult:
        start = time.perf_counter()
        try:
            if artwork_override is not None:
                return ArtworkResult(
                    image_bytes=artwork_override,
                    prompt_used=("(manual upload)", ""),
                    config=image_cfg,
                    backend_job_id="manual",
                )
            return generate_artwork(spec, image_cfg, diffusion, workflow_template)
        finally:
            timings.stages_ms["artwork"] = (time.perf_counter() - start) * 1000

    with ThreadPoolExecutor(max_workers=2, thread_name_prefix="attempt") as pool:
        mech_future = pool.submit(mech_branch)
        art_future = pool.submit(art_branch)
        mech_exc = mech_future.exception()
        art_exc = art_future.exception()
        if mech_exc is not None:
            if art_exc is None:
                mech_exc.partial_artwork = art_future.result()  # type: ignore[attr-defined]
            raise mech_exc
        mech = mech_future.result()
        if art_exc is not None:
            art_exc.partial_mech = mech  # type: ignore[attr-defined]
            raise art_exc
        art = art_future.result()

    start = time.perf_counter()
    rendered = render_card(mech.record, art, render_template)
    timings.stages_ms["render"] = (time.perf_counter() - start) * 1000

    start = time.perf_counter()
    report = lint_card(mech.record, library.stats, lint_config)
    timings.stages_ms["lint"] = (time.perf_counter() - start) * 1000

    timings.backend_ms = clock.total_s * 1000
    return AttemptArtifacts(mech=mech, art=art, render=rendered,
                            lint=report, timings=timings)


def attempt_to_dict(artifacts: AttemptArtifacts, *, attempt_id: str,
                    session_id: str, adaptation: str, spec: CardSpec,
                    params: GenParams, image_cfg: ImagePromptConfig,
                    art_digest: str, card_digest: str,
                    created_at: str) -> dict[str, Any]:
    record = artifacts.mech.record
    card = dict(canonical_dict(record))
    card["id"] = record.id
    return {
        "attempt_id": attempt_id,
        "session_id": session_id,
        "created_at": created_at,
        "status": "ok",
        "adaptation": adaptation,
        "spec": spec_to_dict(spec),
        "params": params_to_dict(params),
        "image_cfg": image_cfg_to_dict(image_cfg),
        "card": card,
        "raw_completion": artifacts.mech.raw_completion,
        "repair_count": artifacts.mech.repair_count,
        "retrieved_ids": list(artifacts.mech.prompt.retrieved_ids),
        "artwork_image": art_digest,
        "card_image": card_digest,
        "artwork_job_id": artifacts.art.backend_job_id,
        "render_warnings": [
            {"box": w.box, "message": w.message, "original_text": w.original_text}
            for w in artifacts.render.warnings
        ],
        "lint": artifacts.lint.to_dict(),
        "timings": artifacts.timings.to_dict(),
        "rating": None,
        "rating_audit": [],
    }


def decode_artwork_override(data: dict[str, Any]) -> bytes | None:
    encoded = data.get("artwork_override_b64")
    if not encoded:
        return None
    return base64.b64decode(encoded)
