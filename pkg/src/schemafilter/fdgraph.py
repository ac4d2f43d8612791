"""Column-level functional-dependency graph with typed, reversible edges.

Three declared edge families (foreign-key, column-to-foreign-key,
column-to-primary-key) plus one reverse partner each, built from a schema
whose keys have been completed by ``merge_keys``. Missing keys are recovered
either heuristically from naming conventions or from an external prediction
file / endpoint.
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

from .container import atomic_write, pack_container, unpack_container
from .errors import CorruptionError, SchemaError
from .schema import (
    PROVENANCE_PREDICTED,
    ColumnRef,
    DatabaseSchema,
    ForeignKey,
    TableDef,
)

log = logging.getLogger(__name__)

GRAPH_KIND = b"FDG1"
GRAPH_VERSION = 1


class EdgeType(IntEnum):
    FOREIGN_KEY = 0
    COLUMN_TO_FOREIGN_KEY = 1
    COLUMN_TO_PRIMARY_KEY = 2
    REV_FOREIGN_KEY = 3
    REV_COLUMN_TO_FOREIGN_KEY = 4
    REV_COLUMN_TO_PRIMARY_KEY = 5

    @property
    def reverse(self) -> "EdgeType":
        return EdgeType(self.value + 3) if self.value < 3 else EdgeType(self.value - 3)

    @property
    def is_forward(self) -> bool:
        return self.value < 3


FORWARD_TYPES = (EdgeType.FOREIGN_KEY, EdgeType.COLUMN_TO_FOREIGN_KEY, EdgeType.COLUMN_TO_PRIMARY_KEY)


@dataclass(frozen=True)
class FdGraph:
    """Immutable typed directed multigraph over a schema's columns."""

    db_id: str
    nodes: tuple[ColumnRef, ...]
    edges: tuple[tuple[int, int, EdgeType], ...]
    node_index: dict[tuple[str, str], int] = field(repr=False, default_factory=dict)

    def __post_init__(self):
        if not self.node_index:
            object.__setattr__(
                self, "node_index", {ref.key: i for i, ref in enumerate(self.nodes)}
            )

    def index_of(self, ref: ColumnRef) -> int:
        return self.node_index[ref.key]

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    def debug_dump(self) -> str:
        """One edge per line: source<TAB>type<TAB>target."""
        lines = [
            f"{self.nodes[s]}\t{EdgeType(t).name.lower()}\t{self.nodes[d]}"
            for s, d, t in self.edges
        ]
        return "\n".join(lines)


@dataclass(frozen=True)
class KeyPrediction:
    """Recovered keys awaiting merge; foreign keys carry provenance=predicted."""

    primary_keys: dict[str, tuple[str, ...]] = field(default_factory=dict)
    foreign_keys: tuple[ForeignKey, ...] = ()

    @property
    def empty(self) -> bool:
        return not self.primary_keys and not self.foreign_keys

    def to_dict(self) -> dict:
        return {
            "primary_keys": {t: list(cols) for t, cols in self.primary_keys.items()},
            "foreign_keys": [
                {
                    "source": {"table": fk.source.table, "column": fk.source.column},
                    "target": {"table": fk.target.table, "column": fk.target.column},
                }
                for fk in self.foreign_keys
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "KeyPrediction":
        pks = {str(t): tuple(str(c) for c in cols) for t, cols in data.get("primary_keys", {}).items()}
        fks = tuple(
            ForeignKey(
                source=ColumnRef(fk["source"]["table"], fk["source"]["column"]),
                target=ColumnRef(fk["target"]["table"], fk["target"]["column"]),
                provenance=PROVENANCE_PREDICTED,
            )
            for fk in data.get("foreign_keys", [])
        )
        return cls(primary_keys=pks, foreign_keys=fks)


def load_key_prediction(path: str | Path) -> KeyPrediction:
    return KeyPrediction.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def save_key_prediction(pred: KeyPrediction, path: str | Path) -> None:
    Path(path).write_text(json.dumps(pred.to_dict(), indent=2), encoding="utf-8")


# ---------------------------------------------------------------------------
# key recovery


def _stems(table_name: str) -> tuple[str, ...]:
    """Singular/plural-tolerant stems of a table name (lowered)."""
    low = table_name.lower()
    stems = [low]
    if low.endswith("ies") and len(low) > 3:
        stems.append(low[:-3] + "y")
    elif low.endswith("s") and len(low) > 1:
        stems.append(low[:-1])
    return tuple(dict.fromkeys(stems))


def _pk_name_candidates(table_name: str) -> set[str]:
    names = {"id"}
    for stem in _stems(table_name):
        names.add(f"{stem}id")
        names.add(f"{stem}_id")
    return names


def infer_keys_heuristic(schema: DatabaseSchema) -> KeyPrediction:
    """Recover undeclared keys from naming conventions.

    Primary keys: for tables with no declared PK, the first column named
    ``id``, ``<table>id`` or ``<table>_id`` (singular/plural tolerant).
    Foreign keys: a column matching another table's PK as ``<stem>_<pk>`` /
    ``<stem><pk>`` (the locations.id -> cards.location_id pattern), or reusing
    the PK name verbatim when that name is more specific than plain ``id``.
    Output order is deterministic (schema order).
    """
    predicted_pks: dict[str, tuple[str, ...]] = {}
    for table in schema.tables:
        if table.primary_key:
            continue
        wanted = _pk_name_candidates(table.name)
        for col in table.columns:
            if col.name.lower() in wanted:
                predicted_pks[table.name] = (col.name,)
                break

    def pk_of(table: TableDef) -> tuple[str, ...]:
        if table.primary_key:
            return table.primary_key
        return predicted_pks.get(table.name, ())

    declared_fk_pairs = {fk.pair for fk in schema.foreign_keys}
    declared_fk_sources = {fk.source.key for fk in schema.foreign_keys}

    predicted_fks: list[ForeignKey] = []
    seen_pairs: set = set()
    for t_u in schema.tables:
        for col in t_u.columns:
            low = col.name.lower()
            if (t_u.name.lower(), low) in declared_fk_sources:
                continue
            for t_v in schema.tables:
                if t_v.name.lower() == t_u.name.lower():
                    continue
                for pk in pk_of(t_v):
                    pk_low = pk.lower()
                    patterns = set()
                    for stem in _stems(t_v.name):
                        patterns.add(f"{stem}_{pk_low}")
                        patterns.add(f"{stem}{pk_low}")
                    exact_reuse = low == pk_low and pk_low != "id"
                    if low in patterns or exact_reuse:
                        fk = ForeignKey(
                            source=ColumnRef(t_u.name, col.name),
                            target=ColumnRef(t_v.name, pk),
                            provenance=PROVENANCE_PREDICTED,
                        )
                        if fk.pair in declared_fk_pairs or fk.pair in seen_pairs:
                            continue
                        seen_pairs.add(fk.pair)
                        predicted_fks.append(fk)
    return KeyPrediction(primary_keys=predicted_pks, foreign_keys=tuple(predicted_fks))


def merge_keys(schema: DatabaseSchema, predicted: KeyPrediction) -> DatabaseSchema:
    """Overlay predicted keys onto a schema; declared keys always win."""
    pred_pks = {t.lower(): cols for t, cols in predicted.primary_keys.items()}
    new_tables = []
    for table in schema.tables:
        pred = pred_pks.get(table.name.lower())
        if pred:
            for member in pred:
                if table.column(member) is None:
                    raise SchemaError(
                        f"predicted primary key {table.name}.{member} names no column"
                    )
        if table.primary_key:
            if pred and tuple(p.lower() for p in pred) != tuple(
                p.lower() for p in table.primary_key
            ):
                log.warning(
                    "predicted primary key %s for table %s contradicts declared %s; keeping declared",
                    pred,
                    table.name,
                    table.primary_key,
                )
            new_tables.append(table)
        elif pred:
            new_tables.append(
                TableDef(
                    name=table.name,
                    description=table.description,
                    columns=table.columns,
                    primary_key=tuple(pred),
                )
            )
        else:
            new_tables.append(table)

    fks = list(schema.foreign_keys)
    existing = {fk.pair for fk in fks}
    for fk in predicted.foreign_keys:
        if fk.pair in existing:
            continue
        existing.add(fk.pair)
        fks.append(fk)
    return DatabaseSchema(
        db_id=schema.db_id,
        tables=tuple(new_tables),
        foreign_keys=tuple(fks),
        dialect=schema.dialect,
    )


# ---------------------------------------------------------------------------
# graph construction


def build_fd_graph(schema: DatabaseSchema) -> FdGraph:
    """Build the typed column graph from a (key-merged) schema.

    Per foreign key u->v: one foreign_key edge; column_to_foreign_key edges
    from every non-key column of u's table to u and of v's table to v; per
    table, column_to_primary_key edges from every non-PK column to each PK
    member. A "non-key" column is neither a PK member nor an FK source in its
    table. Every forward edge gets one reverse-typed mirror; coincident
    (source, target, type) triples are deduplicated.
    """
    nodes = tuple(schema.columns())
    index = {ref.key: i for i, ref in enumerate(nodes)}

    pk_members: dict[str, frozenset[str]] = {t.name.lower(): t.pk_members for t in schema.tables}
    fk_sources: dict[str, set[str]] = {t.name.lower(): set() for t in schema.tables}
    for fk in schema.foreign_keys:
        fk_sources[fk.source.table.lower()].add(fk.source.column.lower())

    def non_key_columns(table: TableDef):
        tlow = table.name.lower()
        for col in table.columns:
            clow = col.name.lower()
            if clow in pk_members[tlow] or clow in fk_sources[tlow]:
                continue
            yield col

    forward: list[tuple[int, int, EdgeType]] = []
    seen: set[tuple[int, int, EdgeType]] = set()

    def add(src: int, dst: int, kind: EdgeType):
        if src == dst:
            return
        edge = (src, dst, kind)
        if edge not in seen:
            seen.add(edge)
            forward.append(edge)

    for fk in schema.foreign_keys:
        add(index[fk.source.key], index[fk.target.key], EdgeType.FOREIGN_KEY)

    for fk in schema.foreign_keys:
        for side in (fk.source, fk.target):
            table = schema.table(side.table)
            assert table is not None
            key_idx = index[side.key]
            for col in non_key_columns(table):
                src = index[(table.name.lower(), col.name.lower())]
                add(src, key_idx, EdgeType.COLUMN_TO_FOREIGN_KEY)

    for table in schema.tables:
        tlow = table.name.lower()
        members = pk_members[tlow]
        if not members:
            continue
        for pk in table.primary_key:
            dst = index[(tlow, pk.lower())]
            for col in table.columns:
                if col.name.lower() in members:
                    continue
                add(index[(tlow, col.name.lower())], dst, EdgeType.COLUMN_TO_PRIMARY_KEY)

    edges = list(forward)
    for src, dst, kind in forward:
        rev = (dst, src, kind.reverse)
        if rev not in seen:
            seen.add(rev)
            edges.append(rev)

    return FdGraph(db_id=schema.db_id, nodes=nodes, edges=tuple(edges), node_index=index)


# ---------------------------------------------------------------------------
# persistence


def serialize_graph(graph: FdGraph) -> bytes:
    meta = json.dumps({"db_id": graph.db_id}).encode("utf-8")

    node_buf = bytearray(struct.pack("<I", len(graph.nodes)))
    for ref in graph.nodes:
        for part in (ref.table, ref.column):
            encoded = part.encode("utf-8")
            node_buf += struct.pack("<H", len(encoded))
            node_buf += encoded

    edge_buf = bytearray(struct.pack("<I", len(graph.edges)))
    for src, dst, kind in graph.edges:
        edge_buf += struct.pack("<III", src, dst, int(kind))

    return pack_container(
        GRAPH_KIND,
        GRAPH_VERSION,
        [("meta", meta), ("nodes", bytes(node_buf)), ("edges", bytes(edge_buf))],
    )


def load_graph(data: bytes) -> FdGraph:
    sections = unpack_container(data, GRAPH_KIND, GRAPH_VERSION)
    try:
        meta = json.loads(sections["meta"].decode("utf-8"))
        node_buf = sections["nodes"]
        edge_buf = sections["edges"]
    except KeyError as exc:
        raise CorruptionError(f"graph file is missing section {exc}") from exc

    (n_nodes,) = struct.unpack_from("<I", node_buf, 0)
    offset = 4
    nodes = []
    for _ in range(n_nodes):
        parts = []
        for _ in range(2):
            (length,) = struct.unpack_from("<H", node_buf, offset)
            offset += 2
            parts.append(node_buf[offset : offset + length].decode("utf-8"))
            offset += length
        nodes.append(ColumnRef(parts[0], parts[1]))

    (n_edges,) = struct.unpack_from("<I", edge_buf, 0)
    offset = 4
    edges = []
    for _ in range(n_edges):
        src, dst, kind = struct.unpack_from("<III", edge_buf, offset)
        offset += 12
        if src >= n_nodes or dst >= n_nodes:
            raise CorruptionError(f"edge ({src},{dst}) points outside the node table")
        edges.append((src, dst, EdgeType(kind)))

    return FdGraph(db_id=str(meta.get("db_id", "")), nodes=tuple(nodes), edges=tuple(edges))


def save_graph(graph: FdGraph, path: str | Path) -> None:
    atomic_write(path, serialize_graph(graph))


def load_graph_file(path: str | Path) -> FdGraph:
    return load_graph(Path(path).read_bytes())
