"""Synthetic schema and corpus generators for tests, demos, and benchmarks."""

from __future__ import annotations

import numpy as np

from .schema import ColumnDef, ColumnRef, DatabaseSchema, ForeignKey, TableDef


def make_wide_schema(db_id: str, n_tables: int, n_columns: int, seed: int = 0) -> DatabaseSchema:
    """A star-ish schema of the requested width: every table gets a primary
    key, every non-root table a foreign key to an earlier table, and filler
    content columns until the global column budget is spent."""
    if n_columns < 2 * n_tables - 1:
        raise ValueError("need at least pk+fk columns per table")
    rng = np.random.default_rng(seed)
    base = n_columns // n_tables
    extras = n_columns - base * n_tables

    tables = []
    fks = []
    for ti in range(n_tables):
        width = base + (1 if ti < extras else 0)
        name = f"t{ti:04d}"
        cols = [ColumnDef(name=f"{name}_id", sql_type="integer", nullable=False)]
        if ti > 0:
            parent = int(rng.integers(0, ti))
            cols.append(ColumnDef(name=f"ref{parent:04d}", sql_type="integer"))
            fks.append(
                ForeignKey(
                    source=ColumnRef(name, f"ref{parent:04d}"),
                    target=ColumnRef(f"t{parent:04d}", f"t{parent:04d}_id"),
                )
            )
        while len(cols) < width:
            cols.append(
                ColumnDef(
                    name=f"field{ti:04d}x{len(cols):03d}",
                    sql_type="text",
                    description=f"free text attribute {len(cols)} of {name}",
                )
            )
        tables.append(TableDef(name=name, columns=tuple(cols), primary_key=(f"{name}_id",)))
    return DatabaseSchema(db_id=db_id, tables=tuple(tables), foreign_keys=tuple(fks))


def make_random_schema(
    db_id: str,
    seed: int,
    max_tables: int = 8,
    max_columns: int = 6,
    declare_keys: bool = True,
) -> DatabaseSchema:
    """Small random schema for property tests; some tables may lack keys."""
    rng = np.random.default_rng(seed)
    n_tables = int(rng.integers(1, max_tables + 1))
    tables = []
    for ti in range(n_tables):
        n_cols = int(rng.integers(1, max_columns + 1))
        cols = [ColumnDef(name=f"c{ti}_{ci}", sql_type="text") for ci in range(n_cols)]
        has_pk = declare_keys and bool(rng.random() < 0.8)
        tables.append(
            TableDef(
                name=f"tab{ti}",
                columns=tuple(cols),
                primary_key=(cols[0].name,) if has_pk else (),
            )
        )
    fks = []
    seen = set()
    for ti in range(1, n_tables):
        if rng.random() < 0.7:
            parent = int(rng.integers(0, ti))
            if tables[parent].primary_key and len(tables[ti].columns) > 1:
                src = ColumnRef(tables[ti].name, tables[ti].columns[-1].name)
                tgt = ColumnRef(tables[parent].name, tables[parent].primary_key[0])
                if (src.key, tgt.key) not in seen:
                    seen.add((src.key, tgt.key))
                    fks.append(ForeignKey(source=src, target=tgt))
    return DatabaseSchema(db_id=db_id, tables=tuple(tables), foreign_keys=tuple(fks))


def make_planted_corpus(
    seed: int = 0,
    n_tables: int = 20,
    cols_per_table: int = 10,
    n_questions: int = 50,
) -> tuple[DatabaseSchema, list[tuple[str, str]]]:
    """A schema plus (question, gold SQL) pairs with a planted relevance signal.

    Content columns carry globally unique word tokens that their questions
    quote verbatim; key columns (primary keys and the foreign keys forming the
    join paths) are deliberately token-disjoint from every question, so a
    purely lexical ranker misses them and only connectivity closure recovers
    the join path.
    """
    rng = np.random.default_rng(seed)
    word = 0

    tables = []
    fks = []
    parents = {}
    content_cols: dict[str, list[tuple[str, tuple[str, str]]]] = {}
    for ti in range(n_tables):
        name = f"tbl{ti:02d}"
        cols = [
            ColumnDef(
                name=f"zq{ti}key",
                sql_type="integer",
                nullable=False,
                description="surrogate identifier",
            )
        ]
        if ti > 0:
            parent = int(rng.integers(0, ti))
            parents[name] = f"tbl{parent:02d}"
            cols.append(
                ColumnDef(
                    name=f"zq{ti}to{parent}",
                    sql_type="integer",
                    description="surrogate identifier",
                )
            )
            fks.append(
                ForeignKey(
                    source=ColumnRef(name, f"zq{ti}to{parent}"),
                    target=ColumnRef(f"tbl{parent:02d}", f"zq{parent}key"),
                )
            )
        content_cols[name] = []
        while len(cols) < cols_per_table:
            w1, w2 = f"veral{word}", f"dosun{word + 1}"
            word += 2
            col_name = f"{w1}_{w2}"
            cols.append(
                ColumnDef(
                    name=col_name,
                    sql_type="text",
                    description=f"records the {w1} {w2} attribute",
                )
            )
            content_cols[name].append((col_name, (w1, w2)))
        tables.append(TableDef(name=name, columns=tuple(cols), primary_key=(cols[0].name,)))

    schema = DatabaseSchema(db_id=f"planted{seed}", tables=tuple(tables), foreign_keys=tuple(fks))

    questions = []
    child_tables = [t.name for t in tables if t.name in parents]
    for _ in range(n_questions):
        child = child_tables[int(rng.integers(0, len(child_tables)))]
        parent = parents[child]
        pick_a = rng.choice(len(content_cols[child]), size=2, replace=False)
        pick_b = int(rng.integers(0, len(content_cols[parent])))
        (col_a1, words_a1) = content_cols[child][int(pick_a[0])]
        (col_a2, words_a2) = content_cols[child][int(pick_a[1])]
        (col_b, words_b) = content_cols[parent][pick_b]
        question = (
            f"Show the {words_a1[0]} {words_a1[1]} and the {words_a2[0]} {words_a2[1]} "
            f"for rows whose {words_b[0]} {words_b[1]} is large"
        )
        child_fk = next(fk for fk in fks if fk.source.table == child and fk.target.table == parent)
        sql = (
            f"SELECT a.{col_a1}, a.{col_a2} FROM {child} AS a "
            f"JOIN {parent} AS b ON a.{child_fk.source.column} = b.{child_fk.target.column} "
            f"WHERE b.{col_b} > 5"
        )
        questions.append((question, sql))
    return schema, questions


def make_value_dump(schema: DatabaseSchema, seed: int = 0, values_per_column: int = 3) -> list[tuple[ColumnRef, str]]:
    """Deterministic fake cell values (tokens derived from the column name)."""
    rng = np.random.default_rng(seed)
    rows = []
    for ref in schema.columns():
        for vi in range(values_per_column):
            suffix = int(rng.integers(0, 1000))
            rows.append((ref, f"{ref.column.replace('_', ' ')} {suffix} v{vi}"))
    return rows
