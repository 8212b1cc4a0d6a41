"""HTTP service for blinded review sessions.

JSON endpoints consumed by the browser UI:

    POST /sessions                  {rater_id, seed, include?} -> session info
    GET  /sessions/{id}/next        next unscored item, 204 when done
    POST /sessions/{id}/scores      {item_token, redundancy, accuracy, completeness}
    GET  /export.csv                all recorded scores
    GET  /                          static UI bundle (placeholder if not built)

Session creation is idempotent: the same (rater, seed, include) maps to the
same session id, so a rater who reloads resumes where the store says they
left off.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .errors import RagmatError, ScoreOutOfRange, UnknownConfigLabel, UnknownItemToken
from .pipeline import RunArtifacts
from .ratings import (
    ReviewSession,
    ScoreStore,
    build_review_session,
    export_scores_text,
    next_unscored,
    record_score,
    session_progress,
)

_PLACEHOLDER_PAGE = """<!doctype html>
<html><head><meta charset="utf-8"><title>Review</title></head>
<body><p>The review UI bundle is not installed. Build the frontend and pass
its dist directory via --ui-dir, or drive the JSON API directly.</p></body></html>
"""

_STATIC_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".map": "application/json",
}


class ReviewService:
    """Session registry plus score store behind the HTTP handler."""

    def __init__(
        self,
        run: RunArtifacts,
        store: ScoreStore,
        include: list[str],
        ui_dir: str | Path | None = None,
    ):
        if not include:
            raise ValueError("include must be non-empty")
        self.run = run
        self.store = store
        self.include = list(include)
        self.ui_dir = Path(ui_dir) if ui_dir else None
        self.sessions: dict[str, ReviewSession] = {}
        self.lock = threading.Lock()

    def create_session(self, rater_id: str, seed: int, include: list[str] | None = None) -> dict:
        session = build_review_session(self.run, include or self.include, rater_id, seed)
        with self.lock:
            existing = self.sessions.get(session.session_id)
            if existing is not None:
                session = existing
            else:
                self.sessions[session.session_id] = session
        return {
            "session_id": session.session_id,
            "total": len(session.items),
            "scored": session_progress(session, self.store),
        }

    def session(self, session_id: str) -> ReviewSession | None:
        with self.lock:
            return self.sessions.get(session_id)

    def submit(self, session: ReviewSession, payload: dict) -> dict:
        token = payload.get("item_token", "")
        with self.lock:
            return record_score(self.store, session, token, payload)


class _Handler(BaseHTTPRequestHandler):
    service: ReviewService  # set by make_server

    # Silence per-request stderr logging.
    def log_message(self, fmt, *args):
        pass

    def _json(self, status: int, obj: dict) -> None:
        body = json.dumps(obj, ensure_ascii=False).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _read_json(self) -> dict | None:
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        try:
            parsed = json.loads(raw or b"{}")
        except json.JSONDecodeError:
            return None
        return parsed if isinstance(parsed, dict) else None

    def do_POST(self):
        service = self.service
        body = self._read_json()
        if body is None:
            self._json(400, {"error": "BadRequest", "detail": "body must be a JSON object"})
            return
        if self.path == "/sessions":
            rater_id = body.get("rater_id")
            if not rater_id or not isinstance(rater_id, str):
                self._json(400, {"error": "BadRequest", "detail": "rater_id is required"})
                return
            seed = body.get("seed", 0)
            if not isinstance(seed, int):
                self._json(400, {"error": "BadRequest", "detail": "seed must be an integer"})
                return
            include = body.get("include")
            try:
                self._json(200, service.create_session(rater_id, seed, include))
            except UnknownConfigLabel as exc:
                self._json(400, {"error": "UnknownConfigLabel", "detail": str(exc)})
            return
        if self.path.startswith("/sessions/") and self.path.endswith("/scores"):
            session_id = self.path[len("/sessions/"):-len("/scores")]
            session = service.session(session_id)
            if session is None:
                self._json(404, {"error": "UnknownSession", "detail": session_id})
                return
            try:
                self._json(200, service.submit(session, body))
            except UnknownItemToken as exc:
                self._json(404, {"error": "UnknownItemToken", "detail": str(exc)})
            except (ScoreOutOfRange, TypeError) as exc:
                self._json(400, {"error": "ScoreOutOfRange", "detail": str(exc)})
            return
        self._json(404, {"error": "NotFound", "detail": self.path})

    def do_GET(self):
        service = self.service
        if self.path == "/health":
            self._json(200, {"ok": True})
            return
        if self.path.startswith("/sessions/") and self.path.endswith("/next"):
            session_id = self.path[len("/sessions/"):-len("/next")]
            session = service.session(session_id)
            if session is None:
                self._json(404, {"error": "UnknownSession", "detail": session_id})
                return
            with service.lock:
                item = next_unscored(session, service.store)
            if item is None:
                self.send_response(204)
                self.end_headers()
                return
            self._json(200, item)
            return
        if self.path == "/export.csv":
            with service.lock:
                text = export_scores_text(service.store.records())
            body = text.encode("utf-8")
            self.send_response(200)
            self.send_header("Content-Type", "text/csv; charset=utf-8")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)
            return
        self._static(self.path)

    def _static(self, path: str) -> None:
        name = "index.html" if path in ("/", "/index.html") else path.lstrip("/")
        ui_dir = self.service.ui_dir
        if ui_dir is not None:
            target = (ui_dir / name).resolve()
            if target.is_file() and target.is_relative_to(ui_dir.resolve()):
                body = target.read_bytes()
                self.send_response(200)
                ctype = _STATIC_TYPES.get(target.suffix, "application/octet-stream")
                self.send_header("Content-Type", ctype)
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)
                return
        if path in ("/", "/index.html"):
            body = _PLACEHOLDER_PAGE.encode("utf-8")
            self.send_response(200)
            self.send_header("Content-Type", "text/html; charset=utf-8")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)
            return
        self._json(404, {"error": "NotFound", "detail": path})


def make_server(host: str, port: int, service: ReviewService) -> ThreadingHTTPServer:
    handler = type("BoundHandler", (_Handler,), {"service": service})
    return ThreadingHTTPServer((host, port), handler)


def serve_review(
    bind_address: str,
    run: RunArtifacts,
    store: ScoreStore,
    include: list[str],
    ui_dir: str | Path | None = None,
) -> ThreadingHTTPServer:
    """Build the service and return a ready server (caller runs serve_forever)."""
    host, _, port = bind_address.partition(":")
    service = ReviewService(run, store, include, ui_dir)
    return make_server(host or "127.0.0.1", int(port or 0), service)
