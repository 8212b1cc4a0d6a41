"""Prompt assembly and experiment orchestration.

Three generation modes share one request shape: RAGFS adds two worked
examples (safe lifting, desk ergonomics) as prior chat turns plus retrieved
sections in a CONTEXT block; RAGNFS keeps only the CONTEXT block; NRAG sends
the bare persona and query. The final user message always carries the
6th-grade-level instruction verbatim, and the retrieval query for a patient
is the same rendered profile text the model sees.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

from .embedder import EmbeddingCache, embed_texts
from .endpoints import EndpointConfig, post_json
from .errors import EmptyCompletion, ModeContextMismatch, RunFailed
from .vectorstore import Index, SectionHit, search

MODES = ("RAGFS", "RAGNFS", "NRAG")

BELIEF_KEYS = (
    "exercise",
    "desk_posture",
    "lifting_technique",
    "physical_therapists",
    "injections",
    "imaging",
    "bed_rest",
)

_BELIEF_DISPLAY = {
    "exercise": "Exercise",
    "desk_posture": "Desk posture",
    "lifting_technique": "Lifting technique",
    "physical_therapists": "Physical therapists",
    "injections": "Injections",
    "imaging": "Imaging",
    "bed_rest": "Bed rest",
}

INSTRUCTION = ("please create patient education materials written at a "
               "6th-grade level Flesch-Kincaid Grade Level")

FEW_SHOT_EXAMPLES: tuple[tuple[str, str], ...] = (
    (
        "Can you explain how to lift properly to avoid excessive strain on the back?",
        "**Safe Lifting Tips:** \n"
        "1. **Get Close:** Keep the item close to your body.\n"
        "2. **Bend at the Knees:** Bend your hips and knees, not your back.\n"
        "3. **Breathe:** Don't hold your breath.\n"
        "4. **Lift with Your Legs:** Use your leg muscles.\n"
        "5. **Pivot:** Move your feet, avoid twisting your back.",
    ),
    (
        "How can a patient set up their desk ergonomically?",
        "**Ergonomic Desk Setup Tips:** \n"
        "1. **Chair:** Support your back, knees level with hips, feet flat.\n"
        "2. **Desk:** Adequate space for legs and feet.\n"
        "3. **Monitor:** Arm's length away, eye level.\n"
        "4. **Keyboard and Mouse:** Wrists straight, hands below elbow level.\n"
        "5. **Movement:** Move around at least once per hour.",
    ),
)

# Deliberately free of the word CONTEXT: requests without retrieved material
# must not mention the block at all.
DEFAULT_SYSTEM_PROMPT = (
    "You are a physical therapy patient educator. You write clear, safe, "
    "personalized education materials for patients with low back pain."
)

_CONTEXT_INSTRUCTION = "Base your answer ONLY on the material inside the CONTEXT block below."


@dataclass(frozen=True)
class PatientProfile:
    profile_id: str
    work_status: str
    daily_activity_level: str
    exercise_routine: str
    beliefs: dict[str, str]

    def __post_init__(self):
        missing = [k for k in BELIEF_KEYS if k not in self.beliefs]
        if missing:
            raise ValueError(f"profile {self.profile_id!r} missing beliefs: {missing}")


@dataclass(frozen=True)
class GenerationConfig:
    model_id: str
    mode: str
    temperature: float = 0.0
    k: int = 7
    max_distance: float = 0.40
    label: str = ""

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not self.label:
            object.__setattr__(self, "label", f"{self.model_id.upper()}_{self.mode}")


@dataclass(frozen=True)
class PromptBundle:
    system_prompt: str
    few_shot_examples: tuple[tuple[str, str], ...]
    retrieved_context: tuple[str, ...]
    user_query: str
    mode: str


@dataclass(frozen=True)
class GeneratedMaterial:
    run_id: str
    profile_id: str
    config_label: str
    bundle_hash: str
    text: str
    created_at: str
    endpoint_metadata: dict = field(default_factory=dict)
    profile_summary: str = ""

    def to_record(self) -> dict:
        return {
            "run_id": self.run_id,
            "profile_id": self.profile_id,
            "config_label": self.config_label,
            "bundle_hash": self.bundle_hash,
            "text": self.text,
            "created_at": self.created_at,
            "endpoint_metadata": self.endpoint_metadata,
            "profile_summary": self.profile_summary,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "GeneratedMaterial":
        return cls(
            run_id=rec["run_id"], profile_id=rec["profile_id"],
            config_label=rec["config_label"], bundle_hash=rec.get("bundle_hash", ""),
            text=rec["text"], created_at=rec.get("created_at", ""),
            endpoint_metadata=rec.get("endpoint_metadata", {}),
            profile_summary=rec.get("profile_summary", ""),
        )


@dataclass
class RunArtifacts:
    path: Path
    records: list[GeneratedMaterial]
    content_hash: str
    run_id: str = ""
    completed: int = 0
    skipped: int = 0
    failures: list[tuple[str, str, str]] = field(default_factory=list)

    @property
    def labels(self) -> set[str]:
        return {r.config_label for r in self.records}


def load_profiles(path: str | Path) -> list[PatientProfile]:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, list):
        raise ValueError("profiles file must hold a JSON array")
    profiles = []
    seen = set()
    for entry in raw:
        profile = PatientProfile(
            profile_id=entry["profile_id"],
            work_status=entry["work_status"],
            daily_activity_level=entry["daily_activity_level"],
            exercise_routine=entry["exercise_routine"],
            beliefs=dict(entry["beliefs"]),
        )
        if profile.profile_id in seen:
            raise ValueError(f"duplicate profile_id {profile.profile_id!r}")
        seen.add(profile.profile_id)
        profiles.append(profile)
    return profiles


def load_generation_configs(
    path: str | Path,
    default_temperature: float = 0.0,
    default_k: int = 7,
    default_max_distance: float = 0.40,
) -> list[GenerationConfig]:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    configs = []
    for entry in raw:
        configs.append(GenerationConfig(
            model_id=entry["model_id"],
            mode=entry["mode"],
            temperature=entry.get("temperature", default_temperature),
            k=entry.get("k", default_k),
            max_distance=entry.get("max_distance", default_max_distance),
            label=entry.get("label", ""),
        ))
    labels = [c.label for c in configs]
    if len(labels) != len(set(labels)):
        raise ValueError("config labels must be unique")
    return configs


def render_profile_summary(profile: PatientProfile) -> str:
    lines = [
        f"Work status: {profile.work_status}",
        f"Daily activity level: {profile.daily_activity_level}",
        f"Exercise routine: {profile.exercise_routine}",
        "Beliefs and attitudes:",
    ]
    for key in BELIEF_KEYS:
        lines.append(f"- {_BELIEF_DISPLAY[key]}: {profile.beliefs[key]}")
    return "\n".join(lines)


def build_user_query(profile: PatientProfile) -> str:
    return (f"Patient profile:\n{render_profile_summary(profile)}\n\n"
            f"Based on this profile, {INSTRUCTION}.")


def assemble_prompt(
    profile: PatientProfile,
    hits: list[SectionHit],
    mode: str,
    system_prompt: str | None = None,
) -> PromptBundle:
    """Build the prompt bundle for one (profile, mode) pair.

    Raises ModeContextMismatch when retrieved hits contradict the mode:
    RAG modes require context, NRAG forbids it.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if mode == "NRAG" and hits:
        raise ModeContextMismatch(f"NRAG takes no retrieved context, got {len(hits)} hits")
    if mode != "NRAG" and not hits:
        raise ModeContextMismatch(f"{mode} requires retrieved context, got none")
    return PromptBundle(
        system_prompt=system_prompt if system_prompt is not None else DEFAULT_SYSTEM_PROMPT,
        few_shot_examples=FEW_SHOT_EXAMPLES if mode == "RAGFS" else (),
        retrieved_context=tuple(h.section.body for h in hits),
        user_query=build_user_query(profile),
        mode=mode,
    )


def bundle_hash(bundle: PromptBundle) -> str:
    canonical = json.dumps({
        "system_prompt": bundle.system_prompt,
        "few_shot_examples": list(bundle.few_shot_examples),
        "retrieved_context": list(bundle.retrieved_context),
        "user_query": bundle.user_query,
        "mode": bundle.mode,
    }, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def messages_for(bundle: PromptBundle) -> list[dict]:
    """Chat-endpoint message list: system (with CONTEXT block when retrieval
    ran), few-shot pairs as alternating user/assistant turns, query last."""
    system = bundle.system_prompt
    if bundle.retrieved_context:
        block = "\n---\n".join(bundle.retrieved_context)
        system = (f"{system}\n\n{_CONTEXT_INSTRUCTION}\n\n"
                  f"CONTEXT:\n---\n{block}\n---")
    messages = [{"role": "system", "content": system}]
    for prompt, output in bundle.few_shot_examples:
        messages.append({"role": "user", "content": prompt})
        messages.append({"role": "assistant", "content": output})
    messages.append({"role": "user", "content": bundle.user_query})
    return messages


def _utcnow() -> str:
    return datetime.now(timezone.utc).isoformat()


def generate(
    bundle: PromptBundle,
    config: GenerationConfig,
    endpoint: EndpointConfig,
    profile_id: str = "",
    run_id: str = "",
) -> GeneratedMaterial:
    messages = messages_for(bundle)
    started = time.monotonic()
    if endpoint.is_mock:
        if endpoint.mock_target != "echo":
            raise ValueError(f"unknown mock chat endpoint {endpoint.base_url!r}")
        text = bundle.user_query
        metadata: dict = {"mock": "echo"}
    else:
        body = post_json(endpoint, "/v1/chat/completions", {
            "model": config.model_id,
            "messages": messages,
            "temperature": config.temperature,
        })
        try:
            text = body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            text = None
        if not text or not text.strip():
            raise EmptyCompletion(f"no content from model {config.model_id!r}")
        metadata = {"usage": body.get("usage", {})}
    metadata["latency_s"] = round(time.monotonic() - started, 6)
    return GeneratedMaterial(
        run_id=run_id,
        profile_id=profile_id,
        config_label=config.label,
        bundle_hash=bundle_hash(bundle),
        text=text,
        created_at=_utcnow(),
        endpoint_metadata=metadata,
    )


def _existing_keys(path: Path) -> set[tuple[str, str]]:
    keys = set()
    if path.exists():
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    rec = json.loads(line)
                    keys.add((rec["profile_id"], rec["config_label"]))
    return keys


def run_experiment(
    profiles: list[PatientProfile],
    configs: list[GenerationConfig],
    index: Index | None,
    out_path: str | Path,
    *,
    chat_endpoint: EndpointConfig,
    embed_endpoint: EndpointConfig | None = None,
    embed_model: str = "",
    cache: EmbeddingCache | None = None,
    system_prompt: str | None = None,
    run_id: str | None = None,
    max_workers: int | None = None,
) -> RunArtifacts:
    """Generate one material per (profile, config) pair into a JSONL file.

    Resumable: pairs already present in out_path are skipped, so a rerun
    only hits the endpoint for missing records. Individual failures are
    reported; the run as a whole fails only when every pair fails.
    """
    if not profiles or not configs:
        raise ValueError("profiles and configs must be non-empty")
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    done = _existing_keys(out)
    pairs = [(p, c) for p in profiles for c in configs if (p.profile_id, c.label) not in done]
    skipped = len(profiles) * len(configs) - len(pairs)

    needs_retrieval = any(c.mode != "NRAG" for _, c in pairs)
    if needs_retrieval:
        if index is None or embed_endpoint is None:
            raise ValueError("RAG modes need an index and an embedding endpoint")
        query_model = embed_model or index.model_id

    rid = run_id or uuid.uuid4().hex[:12]
    write_lock = threading.Lock()
    embed_lock = threading.Lock()
    query_vectors: dict[str, object] = {}
    failures: list[tuple[str, str, str]] = []

    def query_vector(profile: PatientProfile):
        with embed_lock:
            if profile.profile_id not in query_vectors:
                query = build_user_query(profile)
                query_vectors[profile.profile_id] = embed_texts(
                    [query], query_model, embed_endpoint, cache)[0]
            return query_vectors[profile.profile_id]

    def one_pair(profile: PatientProfile, config: GenerationConfig) -> None:
        hits: list[SectionHit] = []
        if config.mode != "NRAG":
            hits = search(index, query_vector(profile),
                          k=config.k, max_distance=config.max_distance)
        bundle = assemble_prompt(profile, hits, config.mode, system_prompt)
        material = generate(bundle, config, chat_endpoint,
                            profile_id=profile.profile_id, run_id=rid)
        material = replace(material, profile_summary=render_profile_summary(profile))
        line = json.dumps(material.to_record(), ensure_ascii=False) + "\n"
        with write_lock:
            with open(out, "a", encoding="utf-8") as fh:
                fh.write(line)

    workers = max(1, max_workers if max_workers is not None else chat_endpoint.max_inflight)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {pool.submit(one_pair, p, c): (p, c) for p, c in pairs}
        for future, (p, c) in futures.items():
            try:
                future.result()
            except Exception as exc:
                failures.append((p.profile_id, c.label, f"{type(exc).__name__}: {exc}"))

    if pairs and len(failures) == len(pairs):
        raise RunFailed(
            f"all {len(pairs)} pairs failed; first failure: {failures[0][2]}")

    artifacts = load_run(out)
    artifacts.run_id = rid
    artifacts.completed = len(pairs) - len(failures)
    artifacts.skipped = skipped
    artifacts.failures = failures
    return artifacts


def load_run(path: str | Path) -> RunArtifacts:
    """Read a run.jsonl; duplicate (profile, config) keys keep the last record."""
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"run file not found: {p}")
    by_key: dict[tuple[str, str], GeneratedMaterial] = {}
    data = p.read_bytes()
    if data:
        for line in data.decode("utf-8").splitlines():
            if line.strip():
                material = GeneratedMaterial.from_record(json.loads(line))
                by_key[(material.profile_id, material.config_label)] = material
    return RunArtifacts(
        path=p,
        records=list(by_key.values()),
        content_hash=hashlib.sha256(data).hexdigest(),
    )
