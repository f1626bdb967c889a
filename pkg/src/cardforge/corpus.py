"""Corpus ETL: fetch the public card database, reduce it to unique basic
creatures, and normalize records into the canonical format.

The raw API shape survives only inside this module; everything downstream
works with CardRecord and its canonical serialization.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable

import requests

from .errors import ConfigurationError, NormalizationError, RetriableError
from .model import (
    BASIC_SUBTYPE,
    SUPERTYPE,
    Ability,
    Attack,
    CardRecord,
    TypeModifier,
    canonical_dict,
    canonical_text,
    content_id,
    normalize_ws,
    parse_energy_type,
    validate_record,
)

logger = logging.getLogger(__name__)

DEFAULT_ENDPOINT = "https://api.pokemontcg.io/v2/cards"
API_KEY_ENV = "CARD_API_KEY"

# National dex cutoff for the 9th generation.
MAX_DEX = 1025

# Raw fields that matter mechanically; everything else (set info, pricing,
# legality, rarity, numbering) is pruned during normalization.
_ALIAS_TABLE = {
    "convertedRetreatCost": "retreatCost",
    "ability": "abilities",
}


@dataclass
class FetchConfig:
    endpoint: str = DEFAULT_ENDPOINT
    api_key: str = ""
    page_size: int = 250
    cache_path: Path | None = None
    offline: bool = False
    timeout_s: float = 30.0

    def resolved_api_key(self) -> str:
        return self.api_key or os.environ.get(API_KEY_ENV, "")


@dataclass
class RawCardDump:
    cards: list[dict[str, Any]]
    fetched_at: str
    source_url: str
    page_count: int = 1

    def __post_init__(self) -> None:
        if self.page_count < 1:
            raise ValueError("page_count must be >= 1")


# ---------------------------------------------------------------------------
# Fetch + cache
# ---------------------------------------------------------------------------


def write_cache(dump: RawCardDump, path: Path) -> None:
    """Newline-delimited JSON, one raw card per line, plus a meta sidecar."""
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with tmp.open("w", encoding="utf-8") as fh:
        for card in dump.cards:
            fh.write(json.dumps(card, ensure_ascii=False) + "\n")
    tmp.replace(path)
    meta = {
        "fetched_at": dump.fetched_at,
        "source_url": dump.source_url,
        "page_count": dump.page_count,
        "card_count": len(dump.cards),
    }
    meta_path = Path(str(path) + ".meta.json")
    meta_path.write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")


def load_cached_dump(path: Path) -> RawCardDump:
    cards = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                cards.append(json.loads(line))
    meta_path = Path(str(path) + ".meta.json")
    if meta_path.exists():
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    else:
        meta = {}
    return RawCardDump(
        cards=cards,
        fetched_at=meta.get("fetched_at", ""),
        source_url=meta.get("source_url", str(path)),
        page_count=meta.get("page_count", 1),
    )


def fetch_raw(config: FetchConfig) -> RawCardDump:
    """Fetch all pages from the card API, writing a replayable cache file.

    Falls back to the cache when offline or when the endpoint is unreachable
    before the first page. Mid-pagination failures raise RetriableError
    carrying the last successful page and the partial card list.
    """
    cache = Path(config.cache_path) if config.cache_path else None

    if config.offline:
        if cache and cache.exists():
            logger.info("offline mode: replaying cache %s", cache)
            return load_cached_dump(cache)
        raise ConfigurationError("offline mode requested but no cache file exists")

    headers = {}
    key = config.resolved_api_key()
    if key:
        headers["X-Api-Key"] = key

    cards: list[dict[str, Any]] = []
    page = 1
    session = requests.Session()
    while True:
        params = {"page": page, "pageSize": config.page_size}
        try:
            resp = session.get(config.endpoint, params=params, headers=headers,
                               timeout=config.timeout_s)
        except requests.RequestException as exc:
            if page == 1 and cache and cache.exists():
                logger.warning("endpoint unreachable (%s); replaying cache %s", exc, cache)
                return load_cached_dump(cache)
            raise RetriableError(
                f"network failure fetching page {page}: {exc}",
                last_page=page - 1, partial=cards,
            ) from exc

        if resp.status_code in (401, 403):
            raise ConfigurationError(
                f"card API rejected credentials (HTTP {resp.status_code}); "
                f"set the {API_KEY_ENV} environment variable"
            )
        if resp.status_code == 429 or 500 <= resp.status_code < 600:
            raise RetriableError(
                f"card API returned HTTP {resp.status_code} on page {page}",
                last_page=page - 1, partial=cards,
            )
        resp.raise_for_status()

        data = resp.json().get("data", [])
        cards.extend(data)
        logger.info("fetched page %d (%d cards, %d total)", page, len(data), len(cards))
        if len(data) < config.page_size:
            break
        page += 1

    dump = RawCardDump(
        cards=cards,
        fetched_at=datetime.now(timezone.utc).isoformat(),
        source_url=config.endpoint,
        page_count=page,
    )
    if cache:
        write_cache(dump, cache)
    return dump


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------


def _coerce_int(value: Any, field_name: str) -> int:
    if isinstance(value, bool):
        raise NormalizationError(field_name, f"expected an integer, got {value!r}")
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    if isinstance(value, str):
        try:
            return int(value.strip())
        except ValueError:
            raise NormalizationError(field_name, f"unparseable integer {value!r}") from None
    raise NormalizationError(field_name, f"expected an integer, got {type(value).__name__}")


def _parse_types(values: Any, field_name: str) -> list[str]:
    if not isinstance(values, list):
        values = [values]
    out = []
    for v in values:
        try:
            out.append(parse_energy_type(str(v)))
        except ValueError as exc:
            raise NormalizationError(field_name, str(exc)) from None
    return out


def apply_aliases(raw: dict[str, Any], aliases: dict[str, str] | None = None) -> dict[str, Any]:
    """Map alias field names onto the canonical ones (without clobbering)."""
    table = aliases or _ALIAS_TABLE
    out = dict(raw)
    for alias, target in table.items():
        if alias in out and target not in out:
            value = out.pop(alias)
            if target == "abilities" and isinstance(value, dict):
                value = [value]
            out[target] = value
        elif alias in out:
            out.pop(alias)
    return out


def extract_dex(raw: dict[str, Any]) -> int | None:
    numbers = raw.get("nationalPokedexNumbers")
    if isinstance(numbers, list) and numbers:
        try:
            return int(numbers[0])
        except (TypeError, ValueError):
            return None
    return None


def normalize_record(raw: dict[str, Any]) -> CardRecord:
    """Raw API object -> validated CardRecord in canonical field order.

    Drops fields outside the schema, maps convertedRetreatCost onto
    retreatCost, coerces numeric strings, and normalizes whitespace.
    Raises NormalizationError naming the first offending field.
    """
    for required in ("name", "types", "hp"):
        if required not in raw or raw[required] in (None, "", []):
            raise NormalizationError(required, "required field absent")

    raw = apply_aliases(raw)

    abilities = []
    for i, entry in enumerate(raw.get("abilities") or []):
        abilities.append(Ability(
            name=normalize_ws(str(entry.get("name", ""))),
            text=normalize_ws(str(entry.get("text", ""))),
        ))

    attacks = []
    for i, entry in enumerate(raw.get("attacks") or []):
        attacks.append(Attack(
            name=normalize_ws(str(entry.get("name", ""))),
            cost=_parse_types(entry.get("cost") or [], f"attacks[{i}].cost"),
            damage=str(entry.get("damage", "") or "").strip(),
            text=normalize_ws(str(entry.get("text", "") or "")),
        ))

    def modifiers(key: str) -> list[TypeModifier]:
        out = []
        for i, entry in enumerate(raw.get(key) or []):
            out.append(TypeModifier(
                type=_parse_types(entry.get("type", ""), f"{key}[{i}].type")[0],
                value=str(entry.get("value", "")).strip(),
            ))
        return out

    retreat = raw.get("retreatCost", 0)
    if isinstance(retreat, list):
        # Raw API serializes retreatCost as a list of energy names.
        retreat = len(retreat)

    image_ref = ""
    images = raw.get("images")
    if isinstance(images, dict):
        image_ref = images.get("large") or images.get("small") or ""

    record = CardRecord(
        name=normalize_ws(str(raw["name"])),
        flavorText=normalize_ws(str(raw.get("flavorText", ""))),
        types=_parse_types(raw["types"], "types"),
        hp=_coerce_int(raw["hp"], "hp"),
        abilities=abilities,
        attacks=attacks,
        weaknesses=modifiers("weaknesses"),
        resistances=modifiers("resistances"),
        retreatCost=_coerce_int(retreat, "retreatCost"),
        supertype=str(raw.get("supertype", SUPERTYPE)),
        subtypes=[str(s) for s in raw.get("subtypes", [])],
        dex=extract_dex(raw),
        artist=str(raw.get("artist", "") or ""),
        image_ref=str(image_ref),
    )
    record.id = str(raw.get("id") or content_id(record))

    issues = validate_record(record)
    if issues:
        first = issues[0]
        raise NormalizationError(first.field, first.reason or first.kind)
    return record


def record_to_raw(record: CardRecord) -> dict[str, Any]:
    """Inverse-ish of normalize_record, for re-feeding records as a dump."""
    raw = dict(canonical_dict(record))
    raw["id"] = record.id
    if record.dex is not None:
        raw["nationalPokedexNumbers"] = [record.dex]
    if record.artist:
        raw["artist"] = record.artist
    if record.image_ref:
        raw["images"] = {"large": record.image_ref}
    return raw


# ---------------------------------------------------------------------------
# Dedup + filter
# ---------------------------------------------------------------------------


def _is_basic_creature(raw: dict[str, Any]) -> bool:
    return (
        raw.get("supertype") == SUPERTYPE
        and BASIC_SUBTYPE in (raw.get("subtypes") or [])
    )


def _printing_recency(raw: dict[str, Any]) -> tuple[str, str]:
    release = ""
    set_info = raw.get("set")
    if isinstance(set_info, dict):
        release = str(set_info.get("releaseDate", "") or "")
    return (release, str(raw.get("id", "")))


def dedupe_and_filter(dump: RawCardDump) -> list[CardRecord]:
    """Reduce the dump to one basic creature card per national dex number.

    Keeps species up to the generation-9 cutoff (dex <= 1025). When a species
    has multiple printings, the most recently released one wins (release date,
    then card id, for a deterministic pick). Output is sorted by dex number.
    """
    if not dump.cards:
        raise ValueError("dump is empty")

    best: dict[int, dict[str, Any]] = {}
    for raw in dump.cards:
        if not _is_basic_creature(raw):
            continue
        dex = extract_dex(raw)
        if dex is None:
            logger.warning("skipping card %r: no national dex number", raw.get("id", "?"))
            continue
        if dex > MAX_DEX:
            continue
        current = best.get(dex)
        if current is None or _printing_recency(raw) > _printing_recency(current):
            best[dex] = raw

    records: list[CardRecord] = []
    for dex in sorted(best):
        try:
            records.append(normalize_record(best[dex]))
        except NormalizationError as exc:
            logger.warning("skipping card %r (dex %d): %s", best[dex].get("id", "?"), dex, exc)
    return records


def load_fixture_corpus(path: Path) -> list[CardRecord]:
    """Dedupe + normalize the committed snapshot in one step."""
    return dedupe_and_filter(load_cached_dump(Path(path)))


def corpus_content_hash(records: Iterable[CardRecord]) -> str:
    """Stable digest of the whole corpus, used for index staleness checks."""
    digest = hashlib.sha256()
    for record in records:
        digest.update(canonical_text(record).encode("utf-8"))
        digest.update(b"\n")
    return digest.hexdigest()
