"""Shared fixtures: mock OpenAI-compatible endpoints and corpus builders."""

from __future__ import annotations

import hashlib
import json
import math
import threading
import time
import xml.etree.ElementTree as ET
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"


class MockOpenAIServer:
    """Embeddings + chat completions on one local HTTP server.

    The chat route echoes the last user message; the embeddings route
    returns hash-derived vectors computed with md5 (a scheme independent of
    the package's sha256 mock). Knobs:

      fail_statuses   list of HTTP statuses served (and popped) before success
      sleep_s         per-request delay, for timeout tests
      embed_dim       embedding width
      inconsistent_dims  second vector of a batch gets dim-1 values
      shuffle_response   embeddings returned in reversed index order
      empty_completion   chat returns "" content
    """

    def __init__(self):
        self.chat_calls = 0
        self.embed_calls = 0
        self.chat_bodies: list[dict] = []
        self.embed_bodies: list[dict] = []
        self.fail_statuses: list[int] = []
        self.sleep_s = 0.0
        self.embed_dim = 8
        self.inconsistent_dims = False
        self.shuffle_response = False
        self.empty_completion = False
        self.concurrent = 0
        self.max_concurrent = 0
        self._gauge_lock = threading.Lock()

        outer = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, fmt, *args):
                pass

            def _reply(self, status: int, obj: dict) -> None:
                body = json.dumps(obj).encode()
                try:
                    self.send_response(status)
                    self.send_header("Content-Type", "application/json")
                    self.send_header("Content-Length", str(len(body)))
                    self.end_headers()
                    self.wfile.write(body)
                except (BrokenPipeError, ConnectionResetError):
                    pass

            def do_POST(self):
                length = int(self.headers.get("Content-Length") or 0)
                payload = json.loads(self.rfile.read(length) or b"{}")
                if self.path == "/v1/chat/completions":
                    outer.chat_calls += 1
                    outer.chat_bodies.append(payload)
                    if outer.sleep_s:
                        time.sleep(outer.sleep_s)
                    if outer.fail_statuses:
                        self._reply(outer.fail_statuses.pop(0), {"error": "injected"})
                        return
                    user_turns = [m for m in payload.get("messages", [])
                                  if m.get("role") == "user"]
                    content = "" if outer.empty_completion else (
                        user_turns[-1]["content"] if user_turns else "")
                    self._reply(200, {
                        "choices": [{"message": {"role": "assistant", "content": content}}],
                        "usage": {"prompt_tokens": 1, "completion_tokens": 1},
                    })
                    return
                if self.path == "/v1/embeddings":
                    with outer._gauge_lock:
                        outer.embed_calls += 1
                        outer.embed_bodies.append(payload)
                        outer.concurrent += 1
                        outer.max_concurrent = max(outer.max_concurrent, outer.concurrent)
                    try:
                        if outer.sleep_s:
                            time.sleep(outer.sleep_s)
                        if outer.fail_statuses:
                            self._reply(outer.fail_statuses.pop(0), {"error": "injected"})
                            return
                        texts = payload.get("input", [])
                        data = []
                        for i, text in enumerate(texts):
                            dim = outer.embed_dim
                            if outer.inconsistent_dims and i == 1:
                                dim -= 1
                            data.append({"index": i, "embedding": server_embed(text, dim)})
                        if outer.shuffle_response:
                            data = list(reversed(data))
                        self._reply(200, {"data": data})
                    finally:
                        with outer._gauge_lock:
                            outer.concurrent -= 1
                    return
                self._reply(404, {"error": "unknown path"})

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        self.url = f"http://127.0.0.1:{self._server.server_address[1]}"

    def close(self):
        self._server.shutdown()
        self._server.server_close()


def server_embed(text: str, dim: int) -> list[float]:
    """md5-derived unit vector; intentionally unrelated to ragmat's mock."""
    values = []
    counter = 0
    while len(values) < dim:
        digest = hashlib.md5(f"{text}|{counter}".encode()).digest()
        for off in range(0, 16, 4):
            if len(values) >= dim:
                break
            word = int.from_bytes(digest[off:off + 4], "big")
            values.append(word / 2.0 ** 31 - 1.0)
        counter += 1
    norm = math.sqrt(sum(v * v for v in values))
    return [v / norm for v in values]


@pytest.fixture
def mock_server():
    server = MockOpenAIServer()
    yield server
    server.close()


def write_corpus_file(path: Path, doc_id: str, source_kind: str, title: str,
                      sections: list[tuple[str, str, str]], url: str | None = None) -> None:
    root = ET.Element("document", {"doc_id": doc_id, "source_kind": source_kind,
                                   "title": title})
    if url:
        root.set("url", url)
    for section_id, heading, body in sections:
        elem = ET.SubElement(root, "section", {"section_id": section_id, "heading": heading})
        elem.text = body
    ET.ElementTree(root).write(path, encoding="utf-8", xml_declaration=True)


def make_profile_dict(profile_id: str, flavor: str = "desk work") -> dict:
    return {
        "profile_id": profile_id,
        "work_status": f"Full-time {flavor}",
        "daily_activity_level": "Mostly sedentary with short walks",
        "exercise_routine": "Occasional stretching, no regular program",
        "beliefs": {
            "exercise": "Worries exercise might worsen the pain",
            "desk_posture": "Thinks posture matters but slouches by afternoon",
            "lifting_technique": "Unsure how to lift boxes safely",
            "physical_therapists": "Open to seeing a physical therapist",
            "injections": "Prefers to avoid injections",
            "imaging": "Believes an MRI is needed to find the cause",
            "bed_rest": "Tends to rest in bed on bad days",
        },
    }


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion at the end of the run."""
    lines = []
    for status in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(status, []):
            if "test_acceptance" in getattr(report, "nodeid", ""):
                name = report.nodeid.split("::")[-1]
                lines.append((name, "PASS" if status == "passed" else "FAIL"))
    if lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for name, verdict in sorted(lines):
            terminalreporter.write_line(f"{verdict}  {name}")
