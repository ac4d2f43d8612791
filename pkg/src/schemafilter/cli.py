"""Operator command line: enrich, index, train, filter, eval, bench.

Exit codes: 0 success, 1 usage error, 2 data error, 3 provider error.
All artifacts are written atomically (temp + rename); reruns are safe.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from .config import ConfigError, EngineConfig, load_config
from .container import atomic_write
from .contexts import assemble_context, render_context
from .errors import ProviderError, SchemaFilterError
from .fdgraph import (
    build_fd_graph,
    infer_keys_heuristic,
    load_graph_file,
    load_key_prediction,
    merge_keys,
    save_graph,
    save_key_prediction,
)
from .metrics import EvalExample, sweep_metrics
from .pipeline import DatabaseArtifacts, Engine, FilterRequest
from .providers import HashProvider, RemoteProvider
from .reranker import (
    TrainingConfig,
    TrainingInstance,
    load_params,
    save_params,
    serialize_params,
    train,
)
from .schema import DatabaseSchema, apply_metadata, load_schema
from .sqlrefs import build_labeled_example
from .values import build_value_index, load_index_file, load_value_dump, save_index

log = logging.getLogger("schemafilter")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_PROVIDER = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage errors, not argparse's default 2
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_parser() -> _Parser:
    parser = _Parser(prog="schemafilter", description=__doc__)
    parser.add_argument("--config", help="JSON config file (defaults apply when omitted)")
    parser.add_argument("--jobs", type=int, help="parallel workers across databases")
    parser.add_argument("--seed", type=int, help="override the single config seed")
    parser.add_argument("--provider", choices=["hash", "remote"], help="override provider kind")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_enrich = sub.add_parser("enrich", help="build FD graphs and merged-key reports")
    p_enrich.add_argument("--db", action="append", default=[], help="database id (repeatable)")

    p_index = sub.add_parser("index", help="build value indexes from value dumps")
    p_index.add_argument("--db", action="append", default=[])

    p_train = sub.add_parser("train", help="train the graph reranker")
    p_train.add_argument("--dataset", required=True, help="JSONL training examples")

    p_filter = sub.add_parser("filter", help="filter one question to a sub-schema")
    p_filter.add_argument("--db", required=True)
    p_filter.add_argument("--question", required=True)
    p_filter.add_argument("--top-k", type=int)
    p_filter.add_argument("--top-percent", type=float)
    p_filter.add_argument("--threshold", type=float)
    p_filter.add_argument("--no-steiner", action="store_true")

    p_eval = sub.add_parser("eval", help="metrics over a labeled eval set")
    p_eval.add_argument("--dataset", required=True, help="JSONL eval examples")
    p_eval.add_argument("--out", help="report directory (default: artifacts reports/)")

    p_bench = sub.add_parser("bench", help="latency benchmark")
    p_bench.add_argument("--db", action="append", default=[])
    p_bench.add_argument("--questions", help="JSONL of {db_id, question}")
    p_bench.add_argument("--question", help="single question used for every --db")
    p_bench.add_argument("--out", help="CSV output path (default: stdout)")
    return parser


def _configure(args) -> EngineConfig:
    config = load_config(args.config)
    if args.jobs is not None:
        config.jobs = args.jobs
    if args.seed is not None:
        config.reranker.seed = args.seed
    if args.provider is not None:
        config.provider.kind = args.provider
    config.validate()
    return config


def _make_provider(config: EngineConfig):
    if config.provider.kind == "hash":
        return HashProvider(dim=config.provider.dim)
    return RemoteProvider(
        endpoint=config.provider.endpoint,
        dim=config.provider.dim,
        max_batch=config.provider.max_batch,
        timeout=config.provider.timeout,
        model_hint=config.provider.model_hint,
        auth_token_env=config.provider.auth_token_env,
    )


def _schema_file(config: EngineConfig, db_id: str) -> Path:
    return Path(config.paths.schemas_dir) / f"{db_id}.json"


def _list_dbs(config: EngineConfig, requested: list[str]) -> list[str]:
    if requested:
        return requested
    schemas = sorted(Path(config.paths.schemas_dir).glob("*.json"))
    return [p.stem for p in schemas if not p.name.endswith(".metadata.json") and not p.name.endswith(".keys.json")]


def _load_enriched(config: EngineConfig, db_id: str, need_index: bool = False) -> DatabaseArtifacts:
    snapshot = config.schema_snapshot_path(db_id)
    graph_file = config.graph_path(db_id)
    if not snapshot.exists() or not graph_file.exists():
        raise SchemaFilterError(
            f"database {db_id!r} is not enriched: missing "
            f"{'schema snapshot' if not snapshot.exists() else 'graph file'} "
            f"({snapshot if not snapshot.exists() else graph_file}); run `schemafilter enrich`"
        )
    schema = DatabaseSchema.from_dict(json.loads(snapshot.read_text(encoding="utf-8")))
    graph = load_graph_file(graph_file)
    index = None
    index_file = config.index_path(db_id)
    if index_file.exists():
        index = load_index_file(index_file)
    elif need_index:
        raise SchemaFilterError(f"missing index artifact {index_file}; run `schemafilter index`")
    return DatabaseArtifacts(schema=schema, graph=graph, index=index)


def _build_engine(config: EngineConfig, db_ids: list[str], need_weights: bool = True) -> Engine:
    provider = _make_provider(config)
    params = None
    if need_weights:
        weights = config.weights_path()
        if not weights.exists():
            raise SchemaFilterError(f"missing weights artifact {weights}; run `schemafilter train`")
        params = load_params(weights)
    engine = Engine(provider=provider, params=params)
    for db_id in db_ids:
        engine.add_database(_load_enriched(config, db_id))
    return engine


# ---------------------------------------------------------------------------
# commands


def cmd_enrich(config: EngineConfig, db_ids: list[str]) -> int:
    dbs = _list_dbs(config, db_ids)
    if not dbs:
        log.info("no databases to enrich")
        return EXIT_OK

    def enrich_one(db_id: str) -> tuple[str, str | None]:
        try:
            schema = load_schema(_schema_file(config, db_id))
            meta_file = Path(config.paths.schemas_dir) / f"{db_id}.metadata.json"
            if meta_file.exists():
                schema = apply_metadata(schema, json.loads(meta_file.read_text(encoding="utf-8")))
            keys_file = Path(config.paths.schemas_dir) / f"{db_id}.keys.json"
            if keys_file.exists():
                prediction = load_key_prediction(keys_file)
            else:
                prediction = infer_keys_heuristic(schema)
            merged = merge_keys(schema, prediction)
            graph = build_fd_graph(merged)

            config.graph_path(db_id).parent.mkdir(parents=True, exist_ok=True)
            config.schema_snapshot_path(db_id).parent.mkdir(parents=True, exist_ok=True)
            config.reports_dir().mkdir(parents=True, exist_ok=True)
            save_graph(graph, config.graph_path(db_id))
            atomic_write(
                config.schema_snapshot_path(db_id),
                json.dumps(merged.to_dict(), indent=2, ensure_ascii=False).encode("utf-8"),
            )
            save_key_prediction(prediction, config.reports_dir() / f"{db_id}.keys.json")
            return db_id, None
        except SchemaFilterError as exc:
            return db_id, str(exc)

    failures = 0
    with ThreadPoolExecutor(max_workers=config.jobs) as pool:
        for db_id, error in pool.map(enrich_one, dbs):
            if error is None:
                log.info("enriched %s", db_id)
            else:
                failures += 1
                log.error("enrich failed for %s: %s", db_id, error)
    return EXIT_DATA if failures else EXIT_OK


def cmd_index(config: EngineConfig, db_ids: list[str]) -> int:
    dbs = _list_dbs(config, db_ids)

    def index_one(db_id: str) -> tuple[str, str | None]:
        try:
            artifacts = _load_enriched(config, db_id)
            dump = Path(config.paths.values_dir) / f"{db_id}.tsv"
            source = load_value_dump(dump) if dump.exists() else []
            index = build_value_index(artifacts.schema, source)
            config.index_path(db_id).parent.mkdir(parents=True, exist_ok=True)
            save_index(index, config.index_path(db_id))
            return db_id, None
        except SchemaFilterError as exc:
            return db_id, str(exc)

    failures = 0
    with ThreadPoolExecutor(max_workers=config.jobs) as pool:
        for db_id, error in pool.map(index_one, dbs):
            if error is None:
                log.info("indexed %s", db_id)
            else:
                failures += 1
                log.error("index failed for %s: %s", db_id, error)
    return EXIT_DATA if failures else EXIT_OK


def _read_jsonl(path: str | Path) -> list[dict]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise SchemaFilterError(f"{path}:{lineno}: bad JSON record: {exc}") from exc
    return records


def _labeled_from_record(record: dict, schema: DatabaseSchema):
    question = record["question"]
    if "gold_sqls" in record or "gold_sql" in record:
        sqls = record.get("gold_sqls") or [record["gold_sql"]]
        return build_labeled_example(question, list(sqls), schema)
    if "positives" in record:
        positives = set()
        for item in record["positives"]:
            table, column = item.split(".", 1)
            positives.add(schema.resolve(table, column))
        negatives = set(schema.columns()) - positives
        from .schema import LabeledExample

        return LabeledExample(
            question=question, db_id=schema.db_id, positives=frozenset(positives), negatives=frozenset(negatives)
        )
    raise SchemaFilterError("dataset record needs gold_sqls or positives")


def _instances_for_dataset(config: EngineConfig, records: list[dict], provider):
    """Group records by db, embed contexts, and emit training instances."""
    artifacts: dict[str, DatabaseArtifacts] = {}
    instances = []
    labeled_all = []
    for record in records:
        db_id = record["db_id"]
        if db_id not in artifacts:
            artifacts[db_id] = _load_enriched(config, db_id)
        art = artifacts[db_id]
        labeled = _labeled_from_record(record, art.schema)
        documents = [
            render_context(assemble_context(art.schema, ref, labeled.question, art.index))
            for ref in art.schema.columns()
        ]
        h0 = provider.embed_batch([(labeled.question, doc) for doc in documents])
        assert art.graph is not None
        idx = {ref: i for i, ref in enumerate(art.graph.nodes)}
        positives = np.asarray(sorted(idx[r] for r in labeled.positives), dtype=np.int64)
        negatives = np.asarray(sorted(idx[r] for r in labeled.negatives), dtype=np.int64)
        instances.append(
            TrainingInstance(graph=art.edge_arrays(), h0=h0, positives=positives, negatives=negatives)
        )
        labeled_all.append((labeled, art))
    return instances, labeled_all


def cmd_train(config: EngineConfig, dataset_path: str) -> int:
    provider = _make_provider(config)
    records = _read_jsonl(dataset_path)
    if not records:
        raise SchemaFilterError(f"dataset {dataset_path} holds no records")
    instances, _ = _instances_for_dataset(config, records, provider)
    tconf = TrainingConfig(
        layers=config.reranker.layers,
        hidden_dim=config.reranker.hidden_dim,
        attn_dim=config.reranker.attn_dim,
        margin=config.reranker.margin,
        learning_rate=config.reranker.learning_rate,
        epochs=config.reranker.epochs,
        batch_size=config.reranker.batch_size,
        negatives_per_positive=config.reranker.negatives_per_positive,
        seed=config.reranker.seed,
    )
    params, trace = train(instances, tconf)
    config.weights_path().parent.mkdir(parents=True, exist_ok=True)
    save_params(params, config.weights_path())
    config.reports_dir().mkdir(parents=True, exist_ok=True)
    trace_lines = ["epoch,step,loss"] + [f"{r.epoch},{r.step},{r.loss:.10g}" for r in trace]
    atomic_write(config.reports_dir() / "loss_trace.csv", ("\n".join(trace_lines) + "\n").encode("utf-8"))
    log.info("wrote %s (%d bytes) and loss trace (%d steps)",
             config.weights_path(), len(serialize_params(params)), len(trace))
    return EXIT_OK


def _request_from_config(config: EngineConfig, question: str, db_id: str, args) -> FilterRequest:
    top_k, top_percent, threshold = args.top_k, args.top_percent, args.threshold
    if top_k is None and top_percent is None and threshold is None:
        top_k = config.selection.top_k
        top_percent = config.selection.top_percent
        threshold = config.selection.threshold
    return FilterRequest(
        question=question,
        db_id=db_id,
        top_k=top_k,
        top_percent=top_percent,
        threshold=threshold,
        steiner_enabled=config.selection.steiner and not getattr(args, "no_steiner", False),
    )


def cmd_filter(config: EngineConfig, args) -> int:
    engine = _build_engine(config, [args.db])
    request = _request_from_config(config, args.question, args.db, args)
    response = engine.filter(request)
    json.dump(response.to_dict(), sys.stdout, indent=2)
    sys.stdout.write("\n")
    return EXIT_OK


def cmd_eval(config: EngineConfig, args) -> int:
    provider = _make_provider(config)
    records = _read_jsonl(args.dataset)
    if not records:
        raise SchemaFilterError(f"dataset {args.dataset} holds no records")
    db_ids = sorted({r["db_id"] for r in records})
    engine = _build_engine(config, db_ids)
    engine.provider = provider

    examples = []
    per_question = []
    for record in records:
        art = engine.artifacts_for(record["db_id"])
        labeled = _labeled_from_record(record, art.schema)
        table, _ = engine.score_question(record["db_id"], labeled.question)
        assert art.graph is not None
        labels = np.zeros(len(table.columns), dtype=bool)
        for ref in labeled.positives:
            labels[art.graph.index_of(ref)] = True
        examples.append(EvalExample(scores=table.values, labels=labels, graph=art.graph))
        per_question.append(
            {
                "db_id": record["db_id"],
                "question": labeled.question,
                "positives": sorted(str(r) for r in labeled.positives),
            }
        )

    report = sweep_metrics(examples, recall_floor=config.recall_floor)
    out_dir = Path(args.out) if args.out else config.reports_dir()
    out_dir.mkdir(parents=True, exist_ok=True)

    records_out = []
    for meta, entry in zip(per_question, report.per_example):
        records_out.append({**meta, **entry})
    atomic_write(
        out_dir / "eval_questions.jsonl",
        ("\n".join(json.dumps(r) for r in records_out) + "\n").encode("utf-8"),
    )
    atomic_write(out_dir / "eval_curves.csv", report.curves_csv().encode("utf-8"))
    atomic_write(out_dir / "eval_topk.csv", report.topk_csv().encode("utf-8"))
    summary = {
        "roc_auc": report.roc_auc,
        "pr_auc": report.pr_auc,
        "recall_floor": config.recall_floor,
        "operating_point": {
            "threshold": report.operating_point.threshold,
            "precision": report.operating_point.precision,
            "recall": report.operating_point.recall,
        },
        "questions": len(examples),
    }
    atomic_write(out_dir / "eval_summary.json", json.dumps(summary, indent=2).encode("utf-8"))
    json.dump(summary, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return EXIT_OK


def cmd_bench(config: EngineConfig, args) -> int:
    if args.questions:
        pairs = [(r["db_id"], r["question"]) for r in _read_jsonl(args.questions)]
        db_ids = sorted({db for db, _ in pairs})
    else:
        db_ids = _list_dbs(config, args.db)
        question = args.question or "list everything"
        pairs = [(db, question) for db in db_ids]
    engine = _build_engine(config, db_ids)
    report = bench_mod.bench(engine, pairs, top_k=config.selection.top_k or 20,
                             steiner_enabled=config.selection.steiner)
    csv_text = report.to_csv()
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        atomic_write(args.out, csv_text.encode("utf-8"))
    else:
        sys.stdout.write(csv_text)
    for agg in report.aggregates():
        log.info(
            "%s: %d tables, %d columns, median %.1f ms, p95 %.1f ms",
            agg["db_id"], agg["tables"], agg["columns"], agg["median_ms"], agg["p95_ms"],
        )
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        config = _configure(args)
        if args.command == "enrich":
            return cmd_enrich(config, args.db)
        if args.command == "index":
            return cmd_index(config, args.db)
        if args.command == "train":
            return cmd_train(config, args.dataset)
        if args.command == "filter":
            return cmd_filter(config, args)
        if args.command == "eval":
            return cmd_eval(config, args)
        if args.command == "bench":
            return cmd_bench(config, args)
        raise AssertionError(f"unhandled command {args.command}")
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except ProviderError as exc:
        log.error("provider error: %s", exc)
        return EXIT_PROVIDER
    except SchemaFilterError as exc:
        log.error("%s", exc)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
