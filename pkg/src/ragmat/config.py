"""Flat key=value configuration, endpoint construction, and run manifests.

Out of the box, no flags needed: k=7 neighbors within cosine distance 0.40,
1000-character chunks, temperature 0. Endpoints default to the offline
mocks (mock://64 embeddings, mock://echo chat); point them at any
OpenAI-compatible base URL to use a real model, with the API key taken from
RAGMAT_API_KEY.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .endpoints import EndpointConfig
from .errors import ConfigError

API_KEY_ENV = "RAGMAT_API_KEY"


@dataclass(frozen=True)
class AppConfig:
    embed_base_url: str = "mock://64"
    embed_model: str = "mock-embedding"
    chat_base_url: str = "mock://echo"
    k: int = 7
    max_distance: float = 0.40
    chunk_size: int = 1000
    temperature: float = 0.0
    timeout_s: float = 30.0
    retries: int = 3
    backoff_s: float = 0.5
    max_inflight: int = 4
    cache_dir: str = ""
    system_prompt_path: str = ""
    corpus_dir: str = "corpus"
    index_dir: str = "index"
    run_path: str = "run.jsonl"
    scores_path: str = "scores.jsonl"


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(AppConfig)}


def _coerce(name: str, raw: str):
    kind = _FIELD_TYPES[name]
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    return raw


def validate_config(config: AppConfig) -> list[str]:
    problems = []
    if config.k < 1:
        problems.append(f"k must be >= 1 (got {config.k})")
    if not 0.0 <= config.max_distance <= 2.0:
        problems.append(f"max_distance must be in [0, 2] (got {config.max_distance})")
    if config.chunk_size < 1:
        problems.append(f"chunk_size must be >= 1 (got {config.chunk_size})")
    if config.temperature < 0:
        problems.append(f"temperature must be >= 0 (got {config.temperature})")
    if config.retries < 1:
        problems.append(f"retries must be >= 1 (got {config.retries})")
    if config.max_inflight < 1:
        problems.append(f"max_inflight must be >= 1 (got {config.max_inflight})")
    return problems


def load_config(path: str | Path | None = None) -> AppConfig:
    """Parse a flat `key = value` file; '#' and ';' start comments."""
    values: dict[str, object] = {}
    problems: list[str] = []
    if path is not None:
        text = Path(path).read_text(encoding="utf-8")
        for line_no, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].split(";", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                problems.append(f"line {line_no}: expected key = value, got {raw.strip()!r}")
                continue
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in _FIELD_TYPES:
                problems.append(f"line {line_no}: unknown key {key!r}")
                continue
            try:
                values[key] = _coerce(key, value)
            except ValueError:
                problems.append(f"line {line_no}: bad value for {key}: {value!r}")
    config = AppConfig(**values)
    problems.extend(validate_config(config))
    if problems:
        raise ConfigError("invalid config: " + "; ".join(problems))
    return config


def apply_overrides(config: AppConfig, **overrides) -> AppConfig:
    updates = {k: v for k, v in overrides.items() if v is not None}
    out = dataclasses.replace(config, **updates)
    problems = validate_config(out)
    if problems:
        raise ConfigError("invalid config: " + "; ".join(problems))
    return out


def _endpoint(config: AppConfig, base_url: str) -> EndpointConfig:
    api_key = None
    if not base_url.startswith("mock://"):
        api_key = os.environ.get(API_KEY_ENV)
        if not api_key:
            raise ConfigError(
                f"{API_KEY_ENV} is not set (required for remote endpoint {base_url})")
    return EndpointConfig(
        base_url=base_url,
        api_key=api_key,
        timeout_s=config.timeout_s,
        retries=config.retries,
        backoff_s=config.backoff_s,
        max_inflight=config.max_inflight,
    )


def embedding_endpoint(config: AppConfig) -> EndpointConfig:
    return _endpoint(config, config.embed_base_url)


def chat_endpoint(config: AppConfig) -> EndpointConfig:
    return _endpoint(config, config.chat_base_url)


def config_hash(config: AppConfig) -> str:
    snapshot = json.dumps(dataclasses.asdict(config), sort_keys=True)
    return hashlib.sha256(snapshot.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class RunManifest:
    run_id: str
    config_hash: str
    input_hash: str
    created_at: str
    version: str

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def make_manifest(run_id: str, config: AppConfig, input_hash: str) -> RunManifest:
    return RunManifest(
        run_id=run_id,
        config_hash=config_hash(config),
        input_hash=input_hash,
        created_at=datetime.now(timezone.utc).isoformat(),
        version=__version__,
    )


def manifest_path_for(target: str | Path) -> Path:
    target = Path(target)
    if target.is_dir():
        return target / "manifest.json"
    return target.with_name(target.name + ".manifest.json")


def write_manifest(target: str | Path, manifest: RunManifest) -> Path:
    path = manifest_path_for(target)
    path.write_text(json.dumps(manifest.to_dict(), indent=2), encoding="utf-8")
    return path


def hash_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def hash_dir(path: str | Path) -> str:
    """Content hash over a directory's files, stable under listing order."""
    digest = hashlib.sha256()
    for child in sorted(Path(path).rglob("*"), key=str):
        if child.is_file():
            digest.update(str(child.relative_to(path)).encode("utf-8"))
            digest.update(child.read_bytes())
    return digest.hexdigest()
