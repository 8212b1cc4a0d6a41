"""OpenAI-compatible HTTP plumbing shared by the embedding and chat clients.

A `mock://...` base URL short-circuits network access entirely; the embedder
and pipeline interpret the mock form themselves. Remote calls retry with
exponential backoff and share a per-endpoint in-flight semaphore so
concurrent callers stay within budget.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass

import requests

from .errors import EndpointError

RETRYABLE_STATUS = {429, 500, 502, 503, 504}


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    api_key: str | None = None
    timeout_s: float = 30.0
    retries: int = 3          # total attempts
    backoff_s: float = 0.5    # first sleep; doubles per retry
    max_inflight: int = 4

    @property
    def is_mock(self) -> bool:
        return self.base_url.startswith("mock://")

    @property
    def mock_target(self) -> str:
        return self.base_url[len("mock://"):]


class _ClientState:
    def __init__(self, config: EndpointConfig):
        self.session = requests.Session()
        self.semaphore = threading.Semaphore(max(1, config.max_inflight))


_states: dict[EndpointConfig, _ClientState] = {}
_states_lock = threading.Lock()


def _state(config: EndpointConfig) -> _ClientState:
    with _states_lock:
        state = _states.get(config)
        if state is None:
            state = _states[config] = _ClientState(config)
        return state


def post_json(endpoint: EndpointConfig, path: str, payload: dict) -> dict:
    """POST JSON to base_url+path with bounded retries.

    Retries connection errors, timeouts and retryable HTTP statuses; any
    other 4xx fails immediately. Raises EndpointError once attempts are
    exhausted.
    """
    if endpoint.is_mock:
        raise ValueError("post_json called on a mock:// endpoint")
    state = _state(endpoint)
    url = endpoint.base_url.rstrip("/") + path
    headers = {"Content-Type": "application/json"}
    if endpoint.api_key:
        headers["Authorization"] = f"Bearer {endpoint.api_key}"

    attempts = max(1, endpoint.retries)
    last: EndpointError | None = None
    for attempt in range(attempts):
        if attempt:
            time.sleep(endpoint.backoff_s * (2 ** (attempt - 1)))
        try:
            with state.semaphore:
                resp = state.session.post(url, json=payload, headers=headers,
                                          timeout=endpoint.timeout_s)
        except requests.RequestException as exc:
            last = EndpointError(None, f"{type(exc).__name__}: {exc}")
            continue
        if resp.status_code == 200:
            return resp.json()
        last = EndpointError(resp.status_code, resp.text)
        if resp.status_code not in RETRYABLE_STATUS:
            raise last
    assert last is not None
    raise last
