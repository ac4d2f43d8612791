"""Latency benchmarking: per-question wall clock with stage breakdown."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .pipeline import Engine, FilterRequest, StageTimings


@dataclass(frozen=True)
class BenchRow:
    db_id: str
    question: str
    n_tables: int
    n_columns: int
    timings: StageTimings


@dataclass
class BenchReport:
    rows: list[BenchRow]

    def sorted_rows(self) -> list[BenchRow]:
        return sorted(self.rows, key=lambda r: (r.n_columns, r.db_id, r.question))

    def aggregates(self) -> list[dict]:
        """Median and p95 total latency per database."""
        per_db: dict[str, list[float]] = {}
        width: dict[str, tuple[int, int]] = {}
        for row in self.rows:
            per_db.setdefault(row.db_id, []).append(row.timings.total_ms)
            width[row.db_id] = (row.n_tables, row.n_columns)
        out = []
        for db_id in sorted(per_db, key=lambda d: (width[d][1], d)):
            totals = np.asarray(per_db[db_id])
            out.append(
                {
                    "db_id": db_id,
                    "tables": width[db_id][0],
                    "columns": width[db_id][1],
                    "questions": len(totals),
                    "median_ms": float(np.median(totals)),
                    "p95_ms": float(np.percentile(totals, 95)),
                }
            )
        return out

    def to_csv(self) -> str:
        lines = ["db_id,tables,columns,context_ms,embed_ms,forward_ms,steiner_ms,total_ms"]
        for row in self.sorted_rows():
            t = row.timings
            lines.append(
                f"{row.db_id},{row.n_tables},{row.n_columns},"
                f"{t.context_ms:.3f},{t.embed_ms:.3f},{t.forward_ms:.3f},"
                f"{t.steiner_ms:.3f},{t.total_ms:.3f}"
            )
        return "\n".join(lines) + "\n"


def bench(
    engine: Engine,
    questions: Sequence[tuple[str, str]],
    top_k: int = 20,
    steiner_enabled: bool = True,
) -> BenchReport:
    """Run (db_id, question) pairs through the filter and collect timings."""
    rows = []
    for db_id, question in questions:
        artifacts = engine.artifacts_for(db_id)
        response = engine.filter(
            FilterRequest(
                question=question, db_id=db_id, top_k=top_k, steiner_enabled=steiner_enabled
            )
        )
        rows.append(
            BenchRow(
                db_id=db_id,
                question=question,
                n_tables=len(artifacts.schema.tables),
                n_columns=artifacts.schema.column_count,
                timings=response.timings,
            )
        )
    return BenchReport(rows=rows)
