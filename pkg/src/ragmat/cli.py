"""Command-line entry point tying the pipeline together.

Exit codes: 0 ok, 2 usage, 3 configuration, 4 runtime. Errors go to stderr
as one JSON object so callers can parse failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import uuid
from pathlib import Path

from . import config as cfgmod
from . import corpus as corpusmod
from . import ratings as ratingsmod
from . import stats as statsmod
from . import textmetrics
from .embedder import EmbeddingCache, embed_texts
from .errors import ConfigError, RagmatError, UsageError
from .pipeline import (
    load_generation_configs,
    load_profiles,
    load_run,
    run_experiment,
)
from .review_service import ReviewService, make_server
from .vectorstore import EmbeddedChunk, build_index, load_index, search


def _print_json(obj) -> None:
    print(json.dumps(obj, ensure_ascii=False))


def _load_config(args) -> cfgmod.AppConfig:
    return cfgmod.load_config(getattr(args, "config", None))


def _cache(config: cfgmod.AppConfig) -> EmbeddingCache | None:
    return EmbeddingCache(config.cache_dir) if config.cache_dir else None


def cmd_ingest(args) -> int:
    config = cfgmod.apply_overrides(_load_config(args), chunk_size=args.chunk_size)
    sections = corpusmod.parse_corpus(args.corpus)
    chunks = corpusmod.chunk_corpus(sections, config.chunk_size)
    corpusmod.write_chunks_jsonl(args.out, sections, chunks)
    stats = corpusmod.corpus_stats(sections, chunks)
    manifest = cfgmod.make_manifest(uuid.uuid4().hex[:12], config,
                                    cfgmod.hash_dir(args.corpus))
    cfgmod.write_manifest(args.out, manifest)
    _print_json({"files": stats.file_count, "sections": stats.section_count,
                 "chunks": stats.chunk_count, "out": str(args.out)})
    return 0


def cmd_index(args) -> int:
    config = _load_config(args)
    chunks, sections = corpusmod.read_chunks_jsonl(args.chunks)
    if chunks:
        endpoint = cfgmod.embedding_endpoint(config)
        vectors = embed_texts([c.text for c in chunks], config.embed_model,
                              endpoint, _cache(config))
        items = [EmbeddedChunk(chunk=c, vector=v) for c, v in zip(chunks, vectors)]
    else:
        items = []
    index = build_index(items, sections, store_path=args.out)
    manifest = cfgmod.make_manifest(uuid.uuid4().hex[:12], config,
                                    cfgmod.hash_file(args.chunks))
    cfgmod.write_manifest(Path(args.out), manifest)
    _print_json({"chunks": len(index), "dim": index.dim, "out": str(args.out)})
    return 0


def cmd_query(args) -> int:
    config = cfgmod.apply_overrides(_load_config(args), k=args.k,
                                    max_distance=args.max_distance)
    index = load_index(args.index)
    endpoint = cfgmod.embedding_endpoint(config)
    model = index.model_id or config.embed_model
    query_vec = embed_texts([args.text], model, endpoint, _cache(config))[0]
    hits = search(index, query_vec, k=config.k, max_distance=config.max_distance)
    for hit in hits:
        _print_json({
            "doc_id": hit.section.doc_id,
            "section_id": hit.section.section_id,
            "distance": hit.distance,
            "best_chunk_id": hit.best_chunk_id,
            "title": hit.section.title,
            "heading": hit.section.heading,
            "source_kind": hit.section.source_kind,
            "url": hit.section.url,
            "body": hit.section.body,
        })
    return 0


def cmd_run(args) -> int:
    config = _load_config(args)
    profiles = load_profiles(args.profiles)
    configs = load_generation_configs(
        args.configs,
        default_temperature=config.temperature,
        default_k=config.k,
        default_max_distance=config.max_distance,
    )
    index = load_index(args.index) if args.index else None
    embed_endpoint = None
    if any(c.mode != "NRAG" for c in configs):
        if index is None:
            raise UsageError("--index is required when any config uses retrieval")
        embed_endpoint = cfgmod.embedding_endpoint(config)
    system_prompt = None
    if config.system_prompt_path:
        system_prompt = Path(config.system_prompt_path).read_text(encoding="utf-8").strip()
    artifacts = run_experiment(
        profiles, configs, index, args.out,
        chat_endpoint=cfgmod.chat_endpoint(config),
        embed_endpoint=embed_endpoint,
        embed_model=config.embed_model,
        cache=_cache(config),
        system_prompt=system_prompt,
    )
    manifest = cfgmod.make_manifest(artifacts.run_id, config, artifacts.content_hash)
    cfgmod.write_manifest(args.out, manifest)
    _print_json({
        "run_id": artifacts.run_id,
        "records": len(artifacts.records),
        "completed": artifacts.completed,
        "skipped": artifacts.skipped,
        "failed": [{"profile_id": p, "config_label": c, "error": e}
                   for p, c, e in artifacts.failures],
        "out": str(args.out),
    })
    return 0


def cmd_readability(args) -> int:
    run = load_run(args.infile)
    rows = []
    for material in sorted(run.records, key=lambda r: (r.config_label, r.profile_id)):
        report = textmetrics.analyze(material.text)
        rows.append({
            "config_label": material.config_label,
            "profile_id": material.profile_id,
            "fres": report.fres,
            "grade_label": report.grade_label,
            "num_words": report.counts.num_words,
            "num_syllables": report.counts.num_syllables,
            "num_sentences": report.counts.num_sentences,
        })
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=[
            "config_label", "profile_id", "fres", "grade_label",
            "num_words", "num_syllables", "num_sentences"])
        writer.writeheader()
        writer.writerows(rows)
    config = _load_config(args)
    cfgmod.write_manifest(args.out, cfgmod.make_manifest(
        uuid.uuid4().hex[:12], config, run.content_hash))
    _print_json({"rows": len(rows), "out": str(args.out)})
    return 0


def cmd_serve_review(args) -> int:
    config = _load_config(args)
    run = load_run(args.run)
    include = [label.strip() for label in args.include.split(",") if label.strip()]
    if not include:
        raise UsageError("--include must name at least one config label")
    store = ratingsmod.ScoreStore(args.store or config.scores_path)
    service = ReviewService(run, store, include, ui_dir=args.ui_dir)
    host, _, port = args.bind.partition(":")
    server = make_server(host or "127.0.0.1", int(port or 0), service)
    actual_host, actual_port = server.server_address[:2]
    print(f"listening on http://{actual_host}:{actual_port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def cmd_scores_export(args) -> int:
    store_path = args.store or _load_config(args).scores_path
    store = ratingsmod.ScoreStore(store_path)
    count = ratingsmod.export_scores(store.records(), args.out)
    _print_json({"records": count, "out": str(args.out)})
    return 0


def cmd_scores_import(args) -> int:
    store_path = args.store or _load_config(args).scores_path
    records = ratingsmod.import_scores(args.infile)
    store = ratingsmod.ScoreStore(store_path)
    for r in records:
        store.record(r.rater_id, r.profile_id, r.config_label,
                     r.redundancy, r.accuracy, r.completeness)
    _print_json({"records": len(records), "store": str(store_path)})
    return 0


def _read_readability_csv(path: str) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def cmd_stats(args) -> int:
    records = ratingsmod.import_scores(args.scores)
    include = None
    if args.include:
        include = {label.strip() for label in args.include.split(",") if label.strip()}
        records = [r for r in records if r.config_label in include]
        if not records:
            raise UsageError(f"no score rows left after --include {sorted(include)}")
    readability_rows = _read_readability_csv(args.readability) if args.readability else []
    if include is not None:
        readability_rows = [r for r in readability_rows if r["config_label"] in include]

    summaries = statsmod.summarize(records)
    anovas = {}
    iccs = {}
    notes = []
    for category in statsmod.CATEGORIES:
        groups = statsmod.category_groups(records, category)
        try:
            anovas[category] = statsmod.one_way_anova(groups)
        except RagmatError as exc:
            notes.append(f"anova[{category}]: {exc}")
        try:
            iccs[category] = statsmod.icc_two_way(statsmod.icc_matrix(records, category))
        except RagmatError as exc:
            notes.append(f"icc[{category}]: {exc}")

    out_dir = Path(args.out)
    written = statsmod.render_reports(summaries, readability_rows, anovas, iccs, out_dir)

    ttests = statsmod.ragfs_vs_nrag_ttests(readability_rows)
    ttest_path = out_dir / "ttests.json"
    ttest_path.write_text(json.dumps({
        model: {"t": res.t, "df": res.df, "p": res.p}
        for model, res in ttests.items()
    }, indent=2), encoding="utf-8")
    written.append(ttest_path)

    config = _load_config(args)
    cfgmod.write_manifest(out_dir, cfgmod.make_manifest(
        uuid.uuid4().hex[:12], config, cfgmod.hash_file(args.scores)))

    _print_json({"out": str(out_dir), "files": [p.name for p in written],
                 "notes": notes})
    return 0


def cmd_report(args) -> int:
    stats_dir = Path(args.stats_dir)
    lines = ["# Evaluation report", ""]
    for name, title in [("table2.csv", "Likert scores by configuration"),
                        ("table3.csv", "Readability by configuration")]:
        path = stats_dir / name
        if not path.exists():
            continue
        lines += [f"## {title}", ""]
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        if rows:
            lines.append("| " + " | ".join(rows[0]) + " |")
            lines.append("|" + "---|" * len(rows[0]))
            for row in rows[1:]:
                lines.append("| " + " | ".join(row) + " |")
            lines.append("")
    for name, title in [("anova.json", "One-way ANOVA"), ("icc.json", "Inter-rater ICC(2,1)"),
                        ("ttests.json", "RAGFS vs NRAG readability (Welch t)")]:
        path = stats_dir / name
        if not path.exists():
            continue
        data = json.loads(path.read_text(encoding="utf-8"))
        if not data:
            continue
        lines += [f"## {title}", "", "```json", json.dumps(data, indent=2), "```", ""]
    text = "\n".join(lines)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        _print_json({"out": args.out})
    else:
        print(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ragmat",
        description="RAG-generated patient education materials and their evaluation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat key=value config file")

    p = sub.add_parser("ingest", help="parse corpus XML and emit chunk JSONL")
    common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--chunk-size", type=int, dest="chunk_size")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("index", help="embed chunks and build the vector index")
    common(p)
    p.add_argument("--chunks", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("query", help="retrieve sections for a text query")
    common(p)
    p.add_argument("--index", required=True)
    p.add_argument("--text", required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--max-distance", type=float, dest="max_distance")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("run", help="generate materials for profiles x configs")
    common(p)
    p.add_argument("--profiles", required=True)
    p.add_argument("--configs", required=True)
    p.add_argument("--index")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("readability", help="score run outputs for readability")
    common(p)
    p.add_argument("--in", required=True, dest="infile")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_readability)

    p = sub.add_parser("serve-review", help="serve the blinded review API and UI")
    common(p)
    p.add_argument("--run", required=True)
    p.add_argument("--include", required=True, help="comma-separated config labels")
    p.add_argument("--bind", default="127.0.0.1:8707")
    p.add_argument("--store", help="score store JSONL path")
    p.add_argument("--ui-dir", dest="ui_dir", help="built frontend bundle directory")
    p.set_defaults(func=cmd_serve_review)

    p = sub.add_parser("scores", help="score store import/export")
    scores_sub = p.add_subparsers(dest="scores_command", required=True)
    pe = scores_sub.add_parser("export", help="export the score store to CSV")
    common(pe)
    pe.add_argument("--store", help="score store JSONL (default from config)")
    pe.add_argument("--out", required=True)
    pe.set_defaults(func=cmd_scores_export)
    pi = scores_sub.add_parser("import", help="load a scores CSV into a store")
    common(pi)
    pi.add_argument("--in", required=True, dest="infile")
    pi.add_argument("--store", help="score store JSONL (default from config)")
    pi.set_defaults(func=cmd_scores_import)

    p = sub.add_parser("stats", help="summaries, ANOVA, ICC and report files")
    common(p)
    p.add_argument("--scores", required=True)
    p.add_argument("--readability")
    p.add_argument("--include", help="comma-separated config labels to evaluate")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("report", help="render stats outputs as markdown")
    common(p)
    p.add_argument("--stats-dir", required=True, dest="stats_dir")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except ConfigError as exc:
        _error(exc)
        return 3
    except UsageError as exc:
        _error(exc)
        return 2
    except RagmatError as exc:
        _error(exc)
        return 4
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        _error(exc)
        return 4


def _error(exc: Exception) -> None:
    print(json.dumps({"error": type(exc).__name__, "detail": str(exc)}),
          file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
