"""Durable session/attempt storage: a directory tree of JSON documents plus
content-addressed PNGs. No database server; everything is inspectable with
an editor and survives restarts.

Layout:
    <root>/sessions/<session_id>/session.json
    <root>/sessions/<session_id>/attempts/<attempt_id>.json
    <root>/images/<sha256>.png
    <root>/quarantine/...        # corrupt files moved aside, never deleted

All writes are atomic (write to a temp file in the same directory, then
rename), so a crash can truncate nothing but the temp file.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from pathlib import Path
from typing import Any, Iterator

logger = logging.getLogger(__name__)

_COUNTER_LOCK = threading.Lock()
_COUNTER = 0


def new_id(prefix: str) -> str:
    """Unique, time-sortable identifier."""
    global _COUNTER
    with _COUNTER_LOCK:
        _COUNTER += 1
        serial = _COUNTER
    return f"{prefix}-{time.time_ns():016x}-{serial:04d}-{os.urandom(2).hex()}"


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + f".tmp{os.getpid()}")
    tmp.write_bytes(data)
    tmp.replace(path)


class Store:
    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / "sessions").mkdir(exist_ok=True)
        (self.root / "images").mkdir(exist_ok=True)
        self._attempt_index: dict[str, str] = {}  # attempt_id -> session_id
        self._scan()

    # -- scanning / quarantine -------------------------------------------

    def _quarantine(self, path: Path, reason: str) -> None:
        target = self.root / "quarantine" / path.relative_to(self.root)
        target.parent.mkdir(parents=True, exist_ok=True)
        logger.warning("quarantining %s: %s", path, reason)
        path.replace(target)

    def _scan(self) -> None:
        for session_dir in sorted((self.root / "sessions").iterdir()):
            if not session_dir.is_dir():
                continue
            session_file = session_dir / "session.json"
            if session_file.exists():
                try:
                    json.loads(session_file.read_text(encoding="utf-8"))
                except (json.JSONDecodeError, UnicodeDecodeError) as exc:
                    self._quarantine(session_file, f"corrupt session file: {exc}")
                    continue
            attempts_dir = session_dir / "attempts"
            if attempts_dir.is_dir():
                for attempt_file in attempts_dir.glob("*.json"):
                    try:
                        json.loads(attempt_file.read_text(encoding="utf-8"))
                    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
                        self._quarantine(attempt_file, f"corrupt attempt file: {exc}")
                        continue
                    self._attempt_index[attempt_file.stem] = session_dir.name

    # -- sessions ----------------------------------------------------------

    def _session_path(self, session_id: str) -> Path:
        return self.root / "sessions" / session_id / "session.json"

    def save_session(self, session: dict[str, Any]) -> None:
        path = self._session_path(session["session_id"])
        _atomic_write(path, json.dumps(session, ensure_ascii=False, indent=2).encode("utf-8"))

    def load_session(self, session_id: str) -> dict[str, Any] | None:
        path = self._session_path(session_id)
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))

    def list_sessions(self) -> list[dict[str, Any]]:
        sessions = []
        for session_dir in sorted((self.root / "sessions").iterdir()):
            session = self.load_session(session_dir.name) if session_dir.is_dir() else None
            if session is not None:
                sessions.append(session)
        return sessions

    # -- attempts ----------------------------------------------------------

    def _attempt_path(self, session_id: str, attempt_id: str) -> Path:
        return self.root / "sessions" / session_id / "attempts" / f"{attempt_id}.json"

    def save_attempt(self, attempt: dict[str, Any]) -> None:
        session_id = attempt["session_id"]
        attempt_id = attempt["attempt_id"]
        path = self._attempt_path(session_id, attempt_id)
        _atomic_write(path, json.dumps(attempt, ensure_ascii=False, indent=2).encode("utf-8"))
        self._attempt_index[attempt_id] = session_id

    def load_attempt(self, attempt_id: str) -> dict[str, Any] | None:
        session_id = self._attempt_index.get(attempt_id)
        if session_id is None:
            return None
        path = self._attempt_path(session_id, attempt_id)
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))

    def iter_attempts(self, session_id: str) -> Iterator[dict[str, Any]]:
        attempts_dir = self.root / "sessions" / session_id / "attempts"
        if not attempts_dir.is_dir():
            return
        for path in sorted(attempts_dir.glob("*.json")):
            yield json.loads(path.read_text(encoding="utf-8"))

    def iter_all_attempts(self) -> Iterator[dict[str, Any]]:
        for attempt_id in sorted(self._attempt_index):
            attempt = self.load_attempt(attempt_id)
            if attempt is not None:
                yield attempt

    # -- content-addressed images ------------------------------------------

    def save_image(self, png_bytes: bytes) -> str:
        """Store a PNG under its content hash; identical bytes share a file."""
        digest = hashlib.sha256(png_bytes).hexdigest()
        path = self.root / "images" / f"{digest}.png"
        if not path.exists():
            _atomic_write(path, png_bytes)
        return digest

    def image_path(self, digest: str) -> Path:
        return self.root / "images" / f"{digest}.png"

    def load_image(self, digest: str) -> bytes | None:
        path = self.image_path(digest)
        return path.read_bytes() if path.exists() else None
