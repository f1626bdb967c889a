"""HTTP service tying the pipeline together: sessions, iterative attempts,
rating capture, aggregate statistics, and static hosting for the studio UI.

Attempts within one session are serialized (one in flight at a time);
distinct sessions run concurrently. Attempts are append-only: nothing about
an attempt is mutated after creation except its rating, which is replaced
with an audit trail of prior values.
"""
from __future__ import annotations

import json
import logging
import statistics
import threading
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .config import AppConfig, load_config
from .errors import CardforgeError, GenerationFailed, RetriableError
from .model import canonical_dict
from .pipeline import (
    ADAPTATION_INITIAL,
    DECLARED_ADAPTATIONS,
    Library,
    attempt_to_dict,
    classify_adaptation,
    decode_artwork_override,
    image_cfg_from_dict,
    image_cfg_to_dict,
    make_chat_backend,
    make_diffusion_backend,
    make_embed_backend,
    make_lint_config,
    params_from_dict,
    params_to_dict,
    run_attempt,
    spec_from_dict,
    spec_to_dict,
)
from .store import Store, new_id
from .synth import load_render_template

logger = logging.getLogger(__name__)

LIKERT_FIELDS = ("aesthetics", "representativeness_image", "representativeness_mechanics")
IDEA_ATTRIBUTIONS = ("own", "ai", "mixed")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


class RatingBody(BaseModel):
    aesthetics: int = Field(ge=1, le=5)
    representativeness_image: int = Field(ge=1, le=5)
    representativeness_mechanics: int = Field(ge=1, le=5)
    idea_attribution: str | None = None
    free_text: str | None = None
    declared_adaptation: str | None = None


class FinalizeBody(BaseModel):
    status: str


class ServiceState:
    """Everything the endpoints need, built once at startup."""

    def __init__(self, config: AppConfig):
        self.config = config
        self.embed_backend = make_embed_backend(config)
        self.chat_backend = make_chat_backend(config)
        self.diffusion_backend = make_diffusion_backend(config)
        self.library = Library.load(config, self.embed_backend)
        self.render_template = load_render_template(config.path("assets_dir"))
        self.workflow_template = config.path("workflow_template")
        self.lint_config = make_lint_config(config)
        self.store = Store(config.path("store_dir"))
        self._session_locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def session_lock(self, session_id: str) -> threading.Lock:
        with self._locks_guard:
            lock = self._session_locks.get(session_id)
            if lock is None:
                lock = threading.Lock()
                self._session_locks[session_id] = lock
            return lock


def _session_or_404(state: ServiceState, session_id: str) -> dict[str, Any]:
    session = state.store.load_session(session_id)
    if session is None:
        raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
    return session


def handle_generate(state: ServiceState, session: dict[str, Any],
                    body: dict[str, Any]) -> dict[str, Any]:
    """Run one attempt inside an existing session and persist everything."""
    spec = spec_from_dict(body.get("spec", {}))
    params = params_from_dict(body.get("params", {}), state.config)
    image_cfg = image_cfg_from_dict(body.get("image_cfg", {}), state.config)
    artwork_override = decode_artwork_override(body)

    spec_d = spec_to_dict(spec)
    params_d = params_to_dict(params)
    image_d = image_cfg_to_dict(image_cfg)

    declared = body.get("adaptation") or body.get("declared_adaptation")
    previous = None
    if session["spec_history"]:
        previous = session["spec_history"][-1]
    if declared:
        if declared not in DECLARED_ADAPTATIONS:
            raise HTTPException(
                status_code=422,
                detail=f"only {DECLARED_ADAPTATIONS} may be declared explicitly",
            )
        adaptation = declared if previous is not None else ADAPTATION_INITIAL
    else:
        adaptation = classify_adaptation(previous, spec_d, params_d, image_d)

    attempt_id = new_id("attempt")
    created_at = _now()

    try:
        artifacts = run_attempt(
            spec, params, image_cfg, state.library, state.chat_backend,
            state.embed_backend, state.diffusion_backend,
            state.workflow_template, state.render_template, state.lint_config,
            artwork_override=artwork_override,
        )
    except Exception as exc:
        failed = _failed_attempt_dict(exc, attempt_id=attempt_id,
                                      session_id=session["session_id"],
                                      adaptation=adaptation, spec=spec_d,
                                      params=params_d, image_cfg=image_d,
                                      created_at=created_at, state=state)
        state.store.save_attempt(failed)
        _append_history(state, session, spec_d, params_d, image_d,
                        attempt_id, created_at)
        raise _http_generation_error(exc, failed) from exc

    art_digest = state.store.save_image(artifacts.art.image_bytes)
    card_digest = state.store.save_image(artifacts.render.png_bytes)
    attempt = attempt_to_dict(
        artifacts, attempt_id=attempt_id, session_id=session["session_id"],
        adaptation=adaptation, spec=spec, params=params, image_cfg=image_cfg,
        art_digest=art_digest, card_digest=card_digest, created_at=created_at,
    )
    state.store.save_attempt(attempt)
    _append_history(state, session, spec_d, params_d, image_d, attempt_id, created_at)
    return attempt


def _append_history(state: ServiceState, session: dict[str, Any],
                    spec_d: dict, params_d: dict, image_d: dict,
                    attempt_id: str, created_at: str) -> None:
    session["spec_history"].append({
        "spec": spec_d, "params": params_d, "image_cfg": image_d,
        "attempt_id": attempt_id, "timestamp": created_at,
    })
    session["attempt_ids"].append(attempt_id)
    state.store.save_session(session)


def _failed_attempt_dict(exc: Exception, *, attempt_id: str, session_id: str,
                         adaptation: str, spec: dict, params: dict,
                         image_cfg: dict, created_at: str,
                         state: ServiceState) -> dict[str, Any]:
    """Persist whatever a failed attempt did produce, for debugging and for
    image-only regeneration after an artwork failure."""
    failed: dict[str, Any] = {
        "attempt_id": attempt_id,
        "session_id": session_id,
        "created_at": created_at,
        "status": "failed",
        "adaptation": adaptation,
        "spec": spec,
        "params": params,
        "image_cfg": image_cfg,
        "error": str(exc),
        "rating": None,
        "rating_audit": [],
    }
    if isinstance(exc, GenerationFailed):
        failed["status"] = "failed_mechanics"
        failed["mech_attempts"] = [
            {"raw_completion": a.raw_completion, "issues": [str(i) for i in a.issues]}
            for a in exc.attempts
        ]
        partial_art = getattr(exc, "partial_artwork", None)
        if partial_art is not None:
            failed["artwork_image"] = state.store.save_image(partial_art.image_bytes)
    else:
        partial_mech = getattr(exc, "partial_mech", None)
        if partial_mech is not None:
            failed["status"] = "failed_artwork"
            failed["card"] = {**canonical_dict(partial_mech.record),
                              "id": partial_mech.record.id}
            failed["raw_completion"] = partial_mech.raw_completion
            failed["repair_count"] = partial_mech.repair_count
    return failed


def _http_generation_error(exc: Exception, attempt: dict[str, Any]) -> HTTPException:
    status = 503 if isinstance(exc, RetriableError) else 502
    detail: dict[str, Any] = {
        "error": str(exc),
        "attempt_id": attempt["attempt_id"],
        "status": attempt["status"],
    }
    if "mech_attempts" in attempt:
        detail["mech_attempts"] = attempt["mech_attempts"]
    return HTTPException(status_code=status, detail=detail)


def _rating_means(store: Store) -> dict[str, Any]:
    values: dict[str, list[int]] = {name: [] for name in LIKERT_FIELDS}
    rated = 0
    for attempt in store.iter_all_attempts():
        rating = attempt.get("rating")
        if not rating:
            continue
        rated += 1
        for name in LIKERT_FIELDS:
            values[name].append(int(rating[name]))
    out: dict[str, Any] = {"rated_attempts": rated}
    for name in LIKERT_FIELDS:
        if values[name]:
            out[name] = {
                "mean": round(statistics.mean(values[name]), 4),
                "stddev": round(statistics.pstdev(values[name]), 4),
                "count": len(values[name]),
            }
        else:
            out[name] = {"mean": None, "stddev": None, "count": 0}
    return out


def create_app(config: AppConfig | None = None) -> FastAPI:
    config = config or load_config()
    state = ServiceState(config)
    app = FastAPI(title="cardforge", version="0.1.0")
    app.state.cardforge = state

    @app.post("/sessions")
    def create_session() -> dict[str, Any]:
        session = {
            "session_id": new_id("session"),
            "created_at": _now(),
            "status": "active",
            "spec_history": [],
            "attempt_ids": [],
        }
        state.store.save_session(session)
        return session

    @app.get("/sessions")
    def list_sessions() -> list[dict[str, Any]]:
        return [
            {k: s.get(k) for k in ("session_id", "created_at", "status", "attempt_ids")}
            for s in state.store.list_sessions()
        ]

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str) -> dict[str, Any]:
        session = _session_or_404(state, session_id)
        session["attempts"] = list(state.store.iter_attempts(session_id))
        return session

    @app.post("/sessions/{session_id}/attempts")
    async def create_attempt(session_id: str, request: Request) -> dict[str, Any]:
        session = _session_or_404(state, session_id)
        if session["status"] != "active":
            raise HTTPException(status_code=409,
                                detail=f"session is {session['status']}")
        body = await request.json()
        lock = state.session_lock(session_id)
        if not lock.acquire(blocking=False):
            raise HTTPException(status_code=409,
                                detail="an attempt is already in flight for this session")
        try:
            return handle_generate(state, session, body)
        except CardforgeError as exc:
            # anything not already mapped by handle_generate
            raise HTTPException(status_code=502, detail=str(exc)) from exc
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        finally:
            lock.release()

    @app.get("/attempts/{attempt_id}")
    def get_attempt(attempt_id: str) -> dict[str, Any]:
        attempt = state.store.load_attempt(attempt_id)
        if attempt is None:
            raise HTTPException(status_code=404, detail=f"unknown attempt {attempt_id}")
        return attempt

    def _attempt_image(attempt_id: str, key: str) -> Response:
        attempt = state.store.load_attempt(attempt_id)
        if attempt is None:
            raise HTTPException(status_code=404, detail=f"unknown attempt {attempt_id}")
        digest = attempt.get(key)
        data = state.store.load_image(digest) if digest else None
        if data is None:
            raise HTTPException(status_code=404, detail=f"attempt has no {key}")
        return Response(content=data, media_type="image/png")

    @app.get("/attempts/{attempt_id}/card.png")
    def get_card_png(attempt_id: str) -> Response:
        return _attempt_image(attempt_id, "card_image")

    @app.get("/attempts/{attempt_id}/art.png")
    def get_art_png(attempt_id: str) -> Response:
        return _attempt_image(attempt_id, "artwork_image")

    @app.post("/attempts/{attempt_id}/rating")
    def post_rating(attempt_id: str, body: RatingBody) -> dict[str, Any]:
        attempt = state.store.load_attempt(attempt_id)
        if attempt is None:
            raise HTTPException(status_code=404, detail=f"unknown attempt {attempt_id}")
        session = _session_or_404(state, attempt["session_id"])
        if session["status"] == "abandoned":
            raise HTTPException(status_code=409, detail="session was abandoned")
        if body.idea_attribution is not None and body.idea_attribution not in IDEA_ATTRIBUTIONS:
            raise HTTPException(status_code=422,
                                detail=f"idea_attribution must be one of {IDEA_ATTRIBUTIONS}")
        if (body.declared_adaptation is not None
                and body.declared_adaptation not in DECLARED_ADAPTATIONS):
            raise HTTPException(status_code=422,
                                detail=f"declared_adaptation must be one of {DECLARED_ADAPTATIONS}")
        rating = {
            "aesthetics": body.aesthetics,
            "representativeness_image": body.representativeness_image,
            "representativeness_mechanics": body.representativeness_mechanics,
            "idea_attribution": body.idea_attribution,
            "free_text": body.free_text,
            "declared_adaptation": body.declared_adaptation,
            "rated_at": _now(),
        }
        if attempt.get("rating"):
            attempt["rating_audit"].append(attempt["rating"])
        attempt["rating"] = rating
        state.store.save_attempt(attempt)
        return rating

    @app.post("/sessions/{session_id}/finalize")
    def finalize(session_id: str, body: FinalizeBody) -> dict[str, Any]:
        session = _session_or_404(state, session_id)
        if body.status not in ("finalized", "abandoned"):
            raise HTTPException(status_code=422,
                                detail="status must be 'finalized' or 'abandoned'")
        if session["status"] != "active":
            raise HTTPException(status_code=409,
                                detail=f"session is already {session['status']}")
        session["status"] = body.status
        session["finalized_at"] = _now()
        state.store.save_session(session)
        return session

    @app.get("/stats/ratings")
    def ratings_stats() -> dict[str, Any]:
        return _rating_means(state.store)

    @app.get("/corpus/stats")
    def corpus_stats() -> JSONResponse:
        return JSONResponse(content=json.loads(state.library.stats.to_json()))

    @app.get("/healthz")
    def healthz() -> dict[str, Any]:
        return {
            "status": "ok",
            "corpus_cards": len(state.library.records),
            "index_model": state.library.index.model_id,
        }

    ui_dir = config.path("ui_dir")
    if ui_dir.is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
