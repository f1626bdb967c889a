"""Configuration: one JSON file, pointed at by the CARDFORGE_CONFIG
environment variable (or passed explicitly). Relative paths inside the file
resolve against the file's own directory, so a checkout works from any CWD.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import ConfigurationError

CONFIG_ENV = "CARDFORGE_CONFIG"

_DEFAULTS: dict[str, Any] = {
    "store_dir": "store",
    "fixture_path": "fixtures/corpus_snapshot.ndjson",
    "cache_path": "cache/raw_cards.ndjson",
    "index_path": "index/corpus.idx",
    "stats_path": "index/corpus_stats.json",
    "assets_dir": "assets",
    "workflow_template": "config/workflow.template.json",
    "cardmaker_map": "config/cardmaker_map.json",
    "ui_dir": "frontend/dist",
    "card_api": {
        "endpoint": "https://api.pokemontcg.io/v2/cards",
        "page_size": 250,
    },
    "embedding": {
        "mode": "stub",  # "stub" | "http"
        "dim": 64,
        "base_url": "http://localhost:11434",
        "model_id": "nomic-embed-text-v1.5",
        "timeout_s": 60.0,
    },
    "chat": {
        "base_url": "http://localhost:11434",
        "model_id": "Qwen3-14B",
        "timeout_s": 120.0,
        "max_retries": 3,
        "use_schema": True,
    },
    "diffusion": {
        "base_url": "http://localhost:8188",
        "poll_interval_s": 1.0,
        "timeout_s": 180.0,
    },
    "retrieval_k": 5,
    "generation": {
        "temperature": 0.7,
        "max_repair_attempts": 3,
    },
    "image": {
        "positive_tokens": ["pokemon", "creature", "official art style",
                            "clean lineart", "vibrant colors", "simple background"],
        "negative_tokens": ["text", "watermark", "frame", "border", "human"],
        # LoRA slots ship empty; the weights are third-party assets. Example:
        # "loras": [{"name": "niji-style.safetensors", "strength": 0.7},
        #           {"name": "ken-sugimori-style.safetensors", "strength": 0.8}]
        "loras": [],
        "cfg": 3.5,
        "steps": 28,
        "width": 1024,
        "height": 768,
    },
    "lint": {
        "z_error": 3.0,
        "z_warning": 2.0,
        "repetition_overlap": 0.6,
        "vocab_coverage_min": 0.4,
        "vocab_min_count": 3,
    },
    "field_aliases": {
        "convertedRetreatCost": "retreatCost",
        "ability": "abilities",
    },
}

_PATH_KEYS = ("store_dir", "fixture_path", "cache_path", "index_path",
              "stats_path", "assets_dir", "workflow_template", "cardmaker_map",
              "ui_dir")


@dataclass
class AppConfig:
    raw: dict[str, Any]
    base_dir: Path

    def __getitem__(self, key: str) -> Any:
        return self.raw[key]

    def get(self, key: str, default: Any = None) -> Any:
        return self.raw.get(key, default)

    def path(self, key: str) -> Path:
        value = Path(str(self.raw[key]))
        return value if value.is_absolute() else (self.base_dir / value).resolve()

    def section(self, key: str) -> dict[str, Any]:
        return dict(self.raw.get(key, {}))


def _merge(defaults: dict[str, Any], overrides: dict[str, Any]) -> dict[str, Any]:
    merged = dict(defaults)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_config(path: str | Path | None = None) -> AppConfig:
    """Load config from `path`, else $CARDFORGE_CONFIG, else built-in defaults
    rooted at the current working directory."""
    if path is None:
        path = os.environ.get(CONFIG_ENV)
    if path is None:
        return AppConfig(raw=json.loads(json.dumps(_DEFAULTS)), base_dir=Path.cwd())

    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        overrides = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(overrides, dict):
        raise ConfigurationError(f"config file {path} must hold a JSON object")
    return AppConfig(raw=_merge(_DEFAULTS, overrides), base_dir=path.parent.resolve())


def default_config_dict() -> dict[str, Any]:
    return json.loads(json.dumps(_DEFAULTS))
