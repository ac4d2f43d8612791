"""Canonical relational-schema model and schema file ingestion.

Identifiers compare case-insensitively but keep their original spelling for
display. All types are immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import SchemaError, UnknownColumnError

DIALECTS = ("sqlite", "bigquery", "snowflake", "generic")

PROVENANCE_DECLARED = "declared"
PROVENANCE_PREDICTED = "predicted"


@dataclass(frozen=True, eq=False)
class ColumnRef:
    """A table-qualified column reference; unique within a schema."""

    table: str
    column: str

    def __post_init__(self):
        if not self.table or not self.column:
            raise SchemaError(f"empty identifier in column ref {self.table!r}.{self.column!r}")

    @property
    def key(self) -> tuple[str, str]:
        return (self.table.lower(), self.column.lower())

    def __eq__(self, other: object) -> bool:
        return isinstance(other, ColumnRef) and self.key == other.key

    def __hash__(self) -> int:
        return hash(self.key)

    def __lt__(self, other: "ColumnRef") -> bool:
        return self.key < other.key

    def __str__(self) -> str:
        return f"{self.table}.{self.column}"

    def __repr__(self) -> str:
        return f"ColumnRef({self.table}.{self.column})"


@dataclass(frozen=True)
class ColumnDef:
    name: str
    sql_type: str = ""
    description: str | None = None
    value_description: str | None = None
    nullable: bool = True
    sample_values: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.name:
            raise SchemaError("column name must be non-empty")
        object.__setattr__(self, "sample_values", tuple(self.sample_values))


@dataclass(frozen=True)
class TableDef:
    name: str
    columns: tuple[ColumnDef, ...] = ()
    description: str | None = None
    primary_key: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.name:
            raise SchemaError("table name must be non-empty")
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "primary_key", tuple(self.primary_key))
        seen: set[str] = set()
        for col in self.columns:
            low = col.name.lower()
            if low in seen:
                raise SchemaError(f"duplicate column {col.name!r}", location=f"table {self.name}")
            seen.add(low)
        for pk in self.primary_key:
            if pk.lower() not in seen:
                raise SchemaError(
                    f"primary-key member {pk!r} names no column",
                    location=f"table {self.name}",
                )

    def column(self, name: str) -> ColumnDef | None:
        low = name.lower()
        for col in self.columns:
            if col.name.lower() == low:
                return col
        return None

    @property
    def pk_members(self) -> frozenset[str]:
        return frozenset(p.lower() for p in self.primary_key)


@dataclass(frozen=True)
class ForeignKey:
    source: ColumnRef
    target: ColumnRef
    provenance: str = PROVENANCE_DECLARED

    def __post_init__(self):
        if self.source == self.target:
            raise SchemaError(f"self-referential foreign key {self.source} -> {self.target}")
        if self.provenance not in (PROVENANCE_DECLARED, PROVENANCE_PREDICTED):
            raise SchemaError(f"unknown foreign-key provenance {self.provenance!r}")

    @property
    def pair(self) -> tuple[tuple[str, str], tuple[str, str]]:
        return (self.source.key, self.target.key)

    def __str__(self) -> str:
        return f"{self.source} -> {self.target}"


@dataclass(frozen=True)
class DatabaseSchema:
    """The relational database as (tables, columns, foreign keys)."""

    db_id: str
    tables: tuple[TableDef, ...] = ()
    foreign_keys: tuple[ForeignKey, ...] = ()
    dialect: str = "generic"

    def __post_init__(self):
        object.__setattr__(self, "tables", tuple(self.tables))
        object.__setattr__(self, "foreign_keys", tuple(self.foreign_keys))
        if self.dialect not in DIALECTS:
            raise SchemaError(f"unknown dialect {self.dialect!r}")
        seen: set[str] = set()
        for t in self.tables:
            low = t.name.lower()
            if low in seen:
                raise SchemaError(f"duplicate table name {t.name!r}")
            seen.add(low)
        for i, fk in enumerate(self.foreign_keys):
            for end, ref in (("source", fk.source), ("target", fk.target)):
                if not self.has_column(ref):
                    raise SchemaError(
                        f"foreign key {fk} has dangling {end} {ref}",
                        location=f"foreign_keys[{i}]",
                    )

    # -- lookups ---------------------------------------------------------

    def table(self, name: str) -> TableDef | None:
        low = name.lower()
        for t in self.tables:
            if t.name.lower() == low:
                return t
        return None

    def has_column(self, ref: ColumnRef) -> bool:
        t = self.table(ref.table)
        return t is not None and t.column(ref.column) is not None

    def resolve(self, table: str, column: str) -> ColumnRef:
        """Canonical ColumnRef (schema spelling) for a case-insensitive name pair."""
        t = self.table(table)
        if t is None:
            raise UnknownColumnError(f"unknown table {table!r} in schema {self.db_id!r}")
        c = t.column(column)
        if c is None:
            raise UnknownColumnError(f"unknown column {table}.{column} in schema {self.db_id!r}")
        return ColumnRef(t.name, c.name)

    def column_def(self, ref: ColumnRef) -> ColumnDef:
        t = self.table(ref.table)
        if t is None:
            raise UnknownColumnError(f"unknown table {ref.table!r} in schema {self.db_id!r}")
        c = t.column(ref.column)
        if c is None:
            raise UnknownColumnError(f"unknown column {ref} in schema {self.db_id!r}")
        return c

    def columns(self) -> Iterator[ColumnRef]:
        """All columns in stable order (tables in order, columns in order)."""
        for t in self.tables:
            for c in t.columns:
                yield ColumnRef(t.name, c.name)

    @property
    def column_count(self) -> int:
        return sum(len(t.columns) for t in self.tables)

    # -- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "db_id": self.db_id,
            "dialect": self.dialect,
            "tables": [
                {
                    "name": t.name,
                    "description": t.description,
                    "primary_key": list(t.primary_key),
                    "columns": [
                        {
                            "name": c.name,
                            "type": c.sql_type,
                            "description": c.description,
                            "value_description": c.value_description,
                            "nullable": c.nullable,
                            "sample_values": list(c.sample_values),
                        }
                        for c in t.columns
                    ],
                }
                for t in self.tables
            ],
            "foreign_keys": [
                {
                    "source": {"table": fk.source.table, "column": fk.source.column},
                    "target": {"table": fk.target.table, "column": fk.target.column},
                    "provenance": fk.provenance,
                }
                for fk in self.foreign_keys
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DatabaseSchema":
        return _schema_from_native(data)


@dataclass(frozen=True)
class LabeledExample:
    """One question with its gold / non-gold column split."""

    question: str
    db_id: str
    positives: frozenset[ColumnRef]
    negatives: frozenset[ColumnRef]
    gold_sql: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "positives", frozenset(self.positives))
        object.__setattr__(self, "negatives", frozenset(self.negatives))
        if not self.positives:
            raise SchemaError("labeled example needs at least one positive column")
        if self.positives & self.negatives:
            raise SchemaError("positives and negatives overlap")


# ---------------------------------------------------------------------------
# loading


def _require(data: dict, key: str, location: str):
    if key not in data:
        raise SchemaError(f"missing field {key!r}", location=location)
    return data[key]


def _parse_column_ref(value, location: str) -> tuple[str, str]:
    """Accepts {"table": .., "column": ..} or a "Table.column" string."""
    if isinstance(value, dict):
        return (
            str(_require(value, "table", location)),
            str(_require(value, "column", location)),
        )
    if isinstance(value, str) and value.count(".") >= 1:
        table, column = value.split(".", 1)
        return table, column
    raise SchemaError(f"bad column reference {value!r}", location=location)


def _schema_from_native(data: dict) -> DatabaseSchema:
    db_id = str(_require(data, "db_id", "$"))
    dialect = str(data.get("dialect", "generic"))
    tables = []
    for ti, t in enumerate(data.get("tables", [])):
        loc = f"tables[{ti}]"
        columns = []
        for ci, c in enumerate(t.get("columns", [])):
            cloc = f"{loc}.columns[{ci}]"
            columns.append(
                ColumnDef(
                    name=str(_require(c, "name", cloc)),
                    sql_type=str(c.get("type", "")),
                    description=c.get("description"),
                    value_description=c.get("value_description"),
                    nullable=bool(c.get("nullable", True)),
                    sample_values=tuple(str(v) for v in c.get("sample_values", [])),
                )
            )
        tables.append(
            TableDef(
                name=str(_require(t, "name", loc)),
                description=t.get("description"),
                columns=tuple(columns),
                primary_key=tuple(str(p) for p in t.get("primary_key", [])),
            )
        )
    fks = []
    for fi, fk in enumerate(data.get("foreign_keys", [])):
        loc = f"foreign_keys[{fi}]"
        st, sc = _parse_column_ref(_require(fk, "source", loc), loc)
        tt, tc = _parse_column_ref(_require(fk, "target", loc), loc)
        fks.append(
            ForeignKey(
                source=ColumnRef(st, sc),
                target=ColumnRef(tt, tc),
                provenance=str(fk.get("provenance", PROVENANCE_DECLARED)),
            )
        )
    return DatabaseSchema(db_id=db_id, tables=tuple(tables), foreign_keys=tuple(fks), dialect=dialect)


def _schema_from_spider_entry(entry: dict) -> DatabaseSchema:
    """Maps one Spider-style tables-manifest entry onto the native model."""
    db_id = str(_require(entry, "db_id", "$"))
    table_names = entry.get("table_names_original") or _require(entry, "table_names", "$")
    col_entries = entry.get("column_names_original") or _require(entry, "column_names", "$")
    col_types = entry.get("column_types", ["" for _ in col_entries])

    per_table: dict[int, list[ColumnDef]] = {i: [] for i in range(len(table_names))}
    col_refs: list[tuple[int, str] | None] = []
    for idx, pair in enumerate(col_entries):
        tidx, name = int(pair[0]), str(pair[1])
        if tidx < 0:  # the "*" pseudo-column
            col_refs.append(None)
            continue
        per_table[tidx].append(ColumnDef(name=name, sql_type=str(col_types[idx])))
        col_refs.append((tidx, name))

    pk_by_table: dict[int, list[str]] = {}
    for pk in entry.get("primary_keys", []):
        members = pk if isinstance(pk, list) else [pk]
        for m in members:
            ref = col_refs[int(m)]
            if ref is None:
                raise SchemaError("primary key names the * column", location="primary_keys")
            pk_by_table.setdefault(ref[0], []).append(ref[1])

    tables = tuple(
        TableDef(
            name=str(table_names[i]),
            columns=tuple(per_table[i]),
            primary_key=tuple(pk_by_table.get(i, [])),
        )
        for i in range(len(table_names))
    )

    fks = []
    for src, tgt in entry.get("foreign_keys", []):
        sref, tref = col_refs[int(src)], col_refs[int(tgt)]
        if sref is None or tref is None:
            raise SchemaError("foreign key names the * column", location="foreign_keys")
        fks.append(
            ForeignKey(
                source=ColumnRef(str(table_names[sref[0]]), sref[1]),
                target=ColumnRef(str(table_names[tref[0]]), tref[1]),
            )
        )
    return DatabaseSchema(db_id=db_id, tables=tables, foreign_keys=tuple(fks), dialect="sqlite")


def load_schema(path: str | Path, format: str = "native", db_id: str | None = None) -> DatabaseSchema:
    """Load one database schema from a file.

    ``format`` is "native" (the JSON layout documented in the README) or
    "spider" (a Spider-style tables manifest; ``db_id`` selects the database
    when the manifest holds several).
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"cannot parse {path.name}: {exc.msg}", location=f"line {exc.lineno}, col {exc.colno}") from exc
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc

    if format == "native":
        if not isinstance(raw, dict):
            raise SchemaError("native schema file must hold one JSON object", location=path.name)
        return _schema_from_native(raw)
    if format == "spider":
        entries = raw if isinstance(raw, list) else [raw]
        if db_id is not None:
            matches = [e for e in entries if e.get("db_id") == db_id]
            if not matches:
                raise SchemaError(f"db_id {db_id!r} not found in manifest", location=path.name)
            return _schema_from_spider_entry(matches[0])
        if len(entries) != 1:
            raise SchemaError(
                f"manifest holds {len(entries)} databases; pass db_id to pick one",
                location=path.name,
            )
        return _schema_from_spider_entry(entries[0])
    raise SchemaError(f"unknown schema format {format!r}")


def save_schema(schema: DatabaseSchema, path: str | Path) -> None:
    Path(path).write_text(json.dumps(schema.to_dict(), indent=2, ensure_ascii=False), encoding="utf-8")


def apply_metadata(schema: DatabaseSchema, metadata: dict) -> DatabaseSchema:
    """Overlay externally supplied table/column descriptions onto a schema.

    ``metadata`` layout: {"tables": {name: {"description": .., "columns":
    {col: {"description": .., "value_description": ..}}}}}. Existing
    descriptions are kept; the overlay only fills gaps (observed metadata is
    used verbatim, generated metadata is ingested, never authored here).
    """
    meta_tables = {k.lower(): v for k, v in metadata.get("tables", {}).items()}
    new_tables = []
    for t in schema.tables:
        overlay = meta_tables.get(t.name.lower(), {})
        meta_cols = {k.lower(): v for k, v in overlay.get("columns", {}).items()}
        new_cols = []
        for c in t.columns:
            cov = meta_cols.get(c.name.lower(), {})
            new_cols.append(
                ColumnDef(
                    name=c.name,
                    sql_type=c.sql_type,
                    description=c.description or cov.get("description"),
                    value_description=c.value_description or cov.get("value_description"),
                    nullable=c.nullable,
                    sample_values=c.sample_values,
                )
            )
        new_tables.append(
            TableDef(
                name=t.name,
                description=t.description or overlay.get("description"),
                columns=tuple(new_cols),
                primary_key=t.primary_key,
            )
        )
    return DatabaseSchema(
        db_id=schema.db_id,
        tables=tuple(new_tables),
        foreign_keys=schema.foreign_keys,
        dialect=schema.dialect,
    )
