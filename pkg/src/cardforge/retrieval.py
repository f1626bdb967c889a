"""Embedding, similarity index, and top-k retrieval over canonical card text.

The index is an exhaustive linear scan: the corpus is three orders of
magnitude below the size where approximate search would pay for its
nondeterminism. Backends are pluggable; a deterministic stub embedder ships
so the whole suite runs without any model server.
"""
from __future__ import annotations

import hashlib
import json
import logging
import re
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np
import requests

from .errors import ConfigurationError, RetriableError
from .model import CardRecord, CardSpec, canonical_text, spec_query_text

logger = logging.getLogger(__name__)

_TOKEN_RE = re.compile(r"[a-z0-9]+")


@dataclass
class EmbeddingVector:
    dim: int
    values: np.ndarray
    model_id: str

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EmbeddingVector):
            return NotImplemented
        return (self.dim == other.dim and self.model_id == other.model_id
                and np.array_equal(self.values, other.values))


@dataclass
class EmbeddingIndex:
    card_ids: list[str]
    matrix: np.ndarray  # float32, shape (count, dim)
    model_id: str
    built_at: str = ""
    corpus_hash: str = ""

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])

    def __len__(self) -> int:
        return len(self.card_ids)


@dataclass(frozen=True)
class RetrievalResult:
    card_id: str
    score: float


class EmbeddingBackend(Protocol):
    model_id: str

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray: ...


def _normalize_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix.astype(np.float64), axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("backend produced a zero embedding vector")
    return (matrix / norms).astype(np.float32)


class StubEmbedder:
    """Deterministic test embedder: seeded token hashes summed into a unit
    vector, plus a small whole-text hash term so that any byte change
    (even trailing whitespace) produces a different vector.

    Card JSON gets field-aware weights: tokens from the prompt fields
    (name, flavorText, types) carry full weight, tokens from the completion
    fields a reduced one. At dim 64 the flat bag-of-words is too noisy to
    separate a three-field query from 993 full records that share most of
    their template structure; the weighting restores the margin. Non-JSON
    text falls back to the flat bag.
    """

    PROMPT_FIELDS = ("name", "flavorText", "types")

    def __init__(self, dim: int = 64, model_id: str = "stub-hash-64",
                 byte_weight: float = 0.05, completion_weight: float = 0.2):
        self.dim = dim
        self.model_id = model_id
        self.byte_weight = byte_weight
        self.completion_weight = completion_weight
        self._token_cache: dict[str, np.ndarray] = {}

    def _hash_vector(self, key: bytes) -> np.ndarray:
        seed = int.from_bytes(hashlib.sha256(key).digest()[:8], "little")
        rng = np.random.default_rng(seed)
        return rng.standard_normal(self.dim)

    def _token_vector(self, token: str) -> np.ndarray:
        vec = self._token_cache.get(token)
        if vec is None:
            vec = self._hash_vector(b"tok:" + token.encode("utf-8"))
            self._token_cache[token] = vec
        return vec

    def _features(self, text: str) -> dict[str, float]:
        try:
            obj = json.loads(text)
        except (json.JSONDecodeError, UnicodeDecodeError):
            obj = None
        if not isinstance(obj, dict):
            return {t: 1.0 for t in _TOKEN_RE.findall(text.lower())}
        features: dict[str, float] = {}
        for key, value in obj.items():
            weight = 1.0 if key in self.PROMPT_FIELDS else self.completion_weight
            blob = json.dumps(value, ensure_ascii=False).lower()
            for token in _TOKEN_RE.findall(blob):
                features[token] = max(features.get(token, 0.0), weight)
        return features

    def embed_one(self, text: str) -> np.ndarray:
        features = self._features(text)
        if features:
            bow = np.sum([w * self._token_vector(t) for t, w in features.items()],
                         axis=0)
            bow /= np.linalg.norm(bow)
        else:
            bow = np.zeros(self.dim)
        raw = self._hash_vector(b"txt:" + text.encode("utf-8"))
        raw /= np.linalg.norm(raw)
        vec = bow + self.byte_weight * raw
        return vec / np.linalg.norm(vec)

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        return np.asarray([self.embed_one(t) for t in texts], dtype=np.float32)


class HttpEmbedder:
    """Client for an OpenAI-compatible POST /v1/embeddings endpoint."""

    def __init__(self, base_url: str, model_id: str = "nomic-embed-text-v1.5",
                 timeout_s: float = 60.0, api_key: str = ""):
        self.base_url = base_url.rstrip("/")
        self.model_id = model_id
        self.timeout_s = timeout_s
        self.api_key = api_key

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            resp = requests.post(
                f"{self.base_url}/v1/embeddings",
                json={"model": self.model_id, "input": list(texts)},
                headers=headers, timeout=self.timeout_s,
            )
        except requests.RequestException as exc:
            raise RetriableError(f"embedding backend unreachable: {exc}") from exc
        if resp.status_code >= 500 or resp.status_code == 429:
            raise RetriableError(f"embedding backend returned HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise ConfigurationError(
                f"embedding backend rejected request (HTTP {resp.status_code}): {resp.text[:200]}"
            )
        payload = resp.json()
        rows = [entry["embedding"] for entry in payload["data"]]
        return np.asarray(rows, dtype=np.float32)


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def embed_text(text: str, backend: EmbeddingBackend) -> EmbeddingVector:
    """Embed one text, L2-normalized and tagged with the backend's model id."""
    if not text:
        raise ValueError("cannot embed empty text")
    matrix = _normalize_rows(np.atleast_2d(backend.embed_batch([text])))
    return EmbeddingVector(dim=matrix.shape[1], values=matrix[0],
                           model_id=backend.model_id)


def cosine_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    av = np.asarray(a.values, dtype=np.float64)
    bv = np.asarray(b.values, dtype=np.float64)
    na, nb = np.linalg.norm(av), np.linalg.norm(bv)
    if na == 0 or nb == 0:
        raise ValueError("cosine similarity is undefined for zero vectors")
    return float(np.clip(np.dot(av, bv) / (na * nb), -1.0, 1.0))


def build_index(corpus: Sequence[CardRecord], backend: EmbeddingBackend,
                corpus_hash: str = "", batch_size: int = 64) -> EmbeddingIndex:
    """One entry per card: the embedding of its canonical text."""
    if not corpus:
        raise ValueError("corpus is empty")
    card_ids = [record.id for record in corpus]
    if len(set(card_ids)) != len(card_ids):
        raise ValueError("corpus contains duplicate card ids")

    rows = []
    for start in range(0, len(corpus), batch_size):
        chunk = corpus[start:start + batch_size]
        texts = [canonical_text(r) for r in chunk]
        try:
            rows.append(backend.embed_batch(texts))
        except Exception as exc:
            raise RetriableError(
                f"embedding failed at card {chunk[0].id}: {exc}"
            ) from exc
    matrix = _normalize_rows(np.vstack(rows))
    return EmbeddingIndex(
        card_ids=card_ids,
        matrix=matrix,
        model_id=backend.model_id,
        built_at=time.strftime("%Y-%m-%dT%H:%M:%S+00:00", time.gmtime()),
        corpus_hash=corpus_hash,
    )


def save_index(index: EmbeddingIndex, path: Path) -> None:
    """Header line (dim, model_id, count, ...) then float32 LE rows;
    card ids go to a JSON sidecar next to the binary file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "dim": index.dim,
        "model_id": index.model_id,
        "count": len(index),
        "built_at": index.built_at,
        "corpus_hash": index.corpus_hash,
    }
    with path.open("wb") as fh:
        fh.write(json.dumps(header).encode("utf-8") + b"\n")
        fh.write(index.matrix.astype("<f4").tobytes(order="C"))
    sidecar = Path(str(path) + ".ids.json")
    sidecar.write_text(json.dumps(index.card_ids, indent=0) + "\n", encoding="utf-8")


def load_index(path: Path) -> EmbeddingIndex:
    path = Path(path)
    with path.open("rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        raw = fh.read()
    count, dim = header["count"], header["dim"]
    matrix = np.frombuffer(raw, dtype="<f4", count=count * dim).reshape(count, dim)
    card_ids = json.loads(Path(str(path) + ".ids.json").read_text(encoding="utf-8"))
    if len(card_ids) != count:
        raise ValueError(f"sidecar lists {len(card_ids)} ids, header says {count}")
    return EmbeddingIndex(
        card_ids=list(card_ids),
        matrix=np.array(matrix),  # own the memory; frombuffer is read-only
        model_id=header["model_id"],
        built_at=header.get("built_at", ""),
        corpus_hash=header.get("corpus_hash", ""),
    )


def score_all(query: EmbeddingVector, index: EmbeddingIndex) -> np.ndarray:
    if query.dim != index.dim:
        raise ConfigurationError(
            f"query dimension {query.dim} does not match index dimension {index.dim}"
        )
    return index.matrix.astype(np.float64) @ np.asarray(query.values, dtype=np.float64)


def top_k_from_scores(card_ids: Sequence[str], scores: np.ndarray,
                      k: int) -> list[RetrievalResult]:
    order = sorted(range(len(card_ids)), key=lambda i: (-scores[i], card_ids[i]))
    return [RetrievalResult(card_id=card_ids[i], score=float(scores[i]))
            for i in order[:k]]


def retrieve_top_k(query: CardSpec, index: EmbeddingIndex, k: int,
                   backend: EmbeddingBackend) -> list[RetrievalResult]:
    """Top-k corpus cards for the query's (name, flavorText, types) text.

    Sorted by score descending; ties broken by card_id ascending so results
    are reproducible regardless of scan order.
    """
    if not 1 <= k <= len(index):
        raise ValueError(f"k must be in [1, {len(index)}], got {k}")
    vector = embed_text(spec_query_text(query), backend)
    return top_k_from_scores(index.card_ids, score_all(vector, index), k)
