"""End-to-end question -> sub-schema pipeline.

For one request: assemble every column's context, embed them against the
question through the configured provider, refine and score with the graph
transformer, apply the selection mode (top-k / top-percent / threshold), and
optionally close the selection under the Steiner spanner. The response
carries the full score table, the selected columns flagged terminal vs
auxiliary, the induced tables and foreign keys, and per-stage timings.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .contexts import assemble_context, render_context
from .errors import MissingArtifactError, UnknownDatabaseError
from .fdgraph import FdGraph
from .providers import EmbeddingProvider
from .reranker import EdgeArrays, RerankerParams, ScoreTable, forward, score
from .schema import ColumnRef, DatabaseSchema, ForeignKey
from .steiner import ClosureSelection, closure
from .values import InvertedIndex


@dataclass(frozen=True)
class FilterRequest:
    question: str
    db_id: str
    top_k: int | None = None
    top_percent: float | None = None
    threshold: float | None = None
    steiner_enabled: bool = True

    def __post_init__(self):
        modes = [m for m in (self.top_k, self.top_percent, self.threshold) if m is not None]
        if len(modes) != 1:
            raise ValueError("exactly one of top_k / top_percent / threshold must be set")
        if self.top_k is not None and self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.top_percent is not None and not (0.0 < self.top_percent <= 1.0):
            raise ValueError("top_percent must be in (0, 1]")


@dataclass
class StageTimings:
    context_ms: float = 0.0
    embed_ms: float = 0.0
    forward_ms: float = 0.0
    steiner_ms: float = 0.0

    @property
    def total_ms(self) -> float:
        return self.context_ms + self.embed_ms + self.forward_ms + self.steiner_ms

    def to_dict(self) -> dict:
        return {
            "context_ms": self.context_ms,
            "embed_ms": self.embed_ms,
            "forward_ms": self.forward_ms,
            "steiner_ms": self.steiner_ms,
            "total_ms": self.total_ms,
        }


@dataclass(frozen=True)
class SelectedColumn:
    ref: ColumnRef
    index: int
    score: float
    kind: str  # terminal | auxiliary


@dataclass
class FilterResponse:
    db_id: str
    question: str
    scores: ScoreTable
    selected: tuple[SelectedColumn, ...]
    tables: tuple[str, ...]
    foreign_keys: tuple[ForeignKey, ...]
    timings: StageTimings

    @property
    def selected_refs(self) -> tuple[ColumnRef, ...]:
        return tuple(col.ref for col in self.selected)

    def to_dict(self) -> dict:
        return {
            "db_id": self.db_id,
            "question": self.question,
            "selected": [
                {
                    "table": col.ref.table,
                    "column": col.ref.column,
                    "score": col.score,
                    "kind": col.kind,
                }
                for col in self.selected
            ],
            "tables": list(self.tables),
            "foreign_keys": [
                {"source": str(fk.source), "target": str(fk.target), "provenance": fk.provenance}
                for fk in self.foreign_keys
            ],
            "scores": {str(ref): float(v) for ref, v in zip(self.scores.columns, self.scores.values)},
            "timings": self.timings.to_dict(),
        }


@dataclass
class DatabaseArtifacts:
    """Everything the pipeline needs for one database."""

    schema: DatabaseSchema
    graph: FdGraph | None = None
    index: InvertedIndex | None = None
    arrays: EdgeArrays | None = field(default=None, repr=False)

    def edge_arrays(self) -> EdgeArrays:
        if self.graph is None:
            raise MissingArtifactError(f"graph artifact for {self.schema.db_id!r} is not loaded")
        if self.arrays is None:
            self.arrays = EdgeArrays.from_graph(self.graph)
        return self.arrays


class Engine:
    """Shared immutable state: per-db artifacts, provider, reranker weights."""

    def __init__(self, provider: EmbeddingProvider, params: RerankerParams | None = None):
        self.provider = provider
        self.params = params
        self.databases: dict[str, DatabaseArtifacts] = {}

    def add_database(self, artifacts: DatabaseArtifacts) -> None:
        self.databases[artifacts.schema.db_id] = artifacts

    def artifacts_for(self, db_id: str) -> DatabaseArtifacts:
        try:
            return self.databases[db_id]
        except KeyError:
            raise UnknownDatabaseError(
                f"database {db_id!r} is not loaded (have: {sorted(self.databases)})"
            ) from None

    # -- stages ----------------------------------------------------------

    def documents_for(self, db_id: str, question: str) -> list[str]:
        artifacts = self.artifacts_for(db_id)
        schema = artifacts.schema
        return [
            render_context(assemble_context(schema, ref, question, artifacts.index))
            for ref in schema.columns()
        ]

    def score_question(self, db_id: str, question: str) -> tuple[ScoreTable, StageTimings]:
        artifacts = self.artifacts_for(db_id)
        if artifacts.graph is None:
            raise MissingArtifactError(f"graph artifact for {db_id!r} is not loaded")
        if self.params is None:
            raise MissingArtifactError("reranker weights are not loaded")
        timings = StageTimings()

        start = time.perf_counter()
        documents = self.documents_for(db_id, question)
        timings.context_ms = (time.perf_counter() - start) * 1000.0

        start = time.perf_counter()
        h0 = self.provider.embed_batch([(question, doc) for doc in documents])
        timings.embed_ms = (time.perf_counter() - start) * 1000.0

        start = time.perf_counter()
        refined = forward(artifacts.edge_arrays(), h0, self.params)
        values = score(refined, self.params)
        timings.forward_ms = (time.perf_counter() - start) * 1000.0

        return ScoreTable(columns=artifacts.graph.nodes, values=values), timings

    def filter(self, request: FilterRequest) -> FilterResponse:
        artifacts = self.artifacts_for(request.db_id)
        table, timings = self.score_question(request.db_id, request.question)
        n = len(table.columns)

        if request.top_k is not None:
            m = min(request.top_k, n)
        elif request.top_percent is not None:
            m = max(1, math.ceil(request.top_percent * n))
        else:
            m = int((table.values >= request.threshold).sum())

        order = np.argsort(-table.values, kind="stable")
        terminal_idx = [int(i) for i in order[:m]]

        start = time.perf_counter()
        selected: list[SelectedColumn] = []
        if terminal_idx and request.steiner_enabled:
            assert artifacts.graph is not None
            result: ClosureSelection = closure(table, artifacts.graph, m)
            for idx in result.terminals:
                selected.append(
                    SelectedColumn(table.columns[idx], idx, float(table.values[idx]), "terminal")
                )
            for idx in result.aux:
                selected.append(
                    SelectedColumn(table.columns[idx], idx, float(table.values[idx]), "auxiliary")
                )
        else:
            for idx in terminal_idx:
                selected.append(
                    SelectedColumn(table.columns[idx], idx, float(table.values[idx]), "terminal")
                )
        timings.steiner_ms = (time.perf_counter() - start) * 1000.0

        chosen = {col.ref for col in selected}
        tables = tuple(
            t.name
            for t in artifacts.schema.tables
            if any(ref.table.lower() == t.name.lower() for ref in chosen)
        )
        fks = tuple(
            fk
            for fk in artifacts.schema.foreign_keys
            if fk.source in chosen and fk.target in chosen
        )
        return FilterResponse(
            db_id=request.db_id,
            question=request.question,
            scores=table,
            selected=tuple(selected),
            tables=tables,
            foreign_keys=fks,
            timings=timings,
        )
