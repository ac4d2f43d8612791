"""Key recovery, graph construction rules, and graph persistence."""

from __future__ import annotations

import pytest

from schemafilter.errors import CorruptionError, FormatVersionError
from schemafilter.fdgraph import (
    EdgeType,
    KeyPrediction,
    build_fd_graph,
    infer_keys_heuristic,
    load_graph,
    merge_keys,
    serialize_graph,
)
from schemafilter.schema import (
    PROVENANCE_PREDICTED,
    ColumnDef,
    ColumnRef,
    DatabaseSchema,
    ForeignKey,
    TableDef,
)
from schemafilter.synth import make_random_schema


def _table(name, cols, pk=()):
    return TableDef(name=name, columns=tuple(ColumnDef(name=c) for c in cols), primary_key=pk)


@pytest.fixture(scope="module")
def shop_schema():
    """10-table mixed-convention fixture; heuristic output audited by hand."""
    return DatabaseSchema(
        db_id="shop",
        tables=(
            _table("locations", ["id", "city"]),
            _table("cards", ["card_id", "location_id", "label"]),
            _table("users", ["uid", "name"]),
            _table("orders", ["order_id", "user_id", "card_id", "total"], pk=("order_id",)),
            _table("categories", ["id", "title"]),
            _table("products", ["productid", "category_id", "name"]),
            _table("reviews", ["review_id", "product_id", "stars"], pk=("review_id",)),
            _table("shipments", ["shipment_id", "order_id", "location_id"], pk=("shipment_id",)),
            _table("tags", ["tagid", "name"]),
            _table("product_tags", ["product_id", "tag_id"]),
        ),
        foreign_keys=(
            ForeignKey(ColumnRef("shipments", "order_id"), ColumnRef("orders", "order_id")),
        ),
    )


class TestKeyHeuristic:
    def test_paper_pattern_location_id(self):
        schema = DatabaseSchema(
            db_id="mini",
            tables=(
                _table("locations", ["id", "city"]),
                _table("cards", ["card_id", "location_id"]),
            ),
        )
        pred = infer_keys_heuristic(schema)
        fk_pairs = [(str(fk.source), str(fk.target)) for fk in pred.foreign_keys]
        assert ("cards.location_id", "locations.id") in fk_pairs

    def test_fully_declared_schema_predicts_nothing(self, university):
        assert infer_keys_heuristic(university).empty

    def test_hand_audited_fixture(self, shop_schema):
        pred = infer_keys_heuristic(shop_schema)
        assert pred.primary_keys == {
            "locations": ("id",),
            "cards": ("card_id",),
            "categories": ("id",),
            "products": ("productid",),
            "tags": ("tagid",),
        }
        assert [(str(fk.source), str(fk.target)) for fk in pred.foreign_keys] == [
            ("cards.location_id", "locations.id"),
            ("orders.card_id", "cards.card_id"),
            ("products.category_id", "categories.id"),
            ("shipments.location_id", "locations.id"),
        ]
        assert all(fk.provenance == PROVENANCE_PREDICTED for fk in pred.foreign_keys)

    def test_deterministic(self, shop_schema):
        assert infer_keys_heuristic(shop_schema) == infer_keys_heuristic(shop_schema)


class TestMergeKeys:
    def test_disjoint_union(self, shop_schema):
        pred = infer_keys_heuristic(shop_schema)
        merged = merge_keys(shop_schema, pred)
        assert merged.table("locations").primary_key == ("id",)
        assert len(merged.foreign_keys) == len(shop_schema.foreign_keys) + len(pred.foreign_keys)

    def test_duplicate_prediction_is_noop(self, university):
        pred = KeyPrediction(
            primary_keys={"Courses": ("cid",)},
            foreign_keys=(
                ForeignKey(
                    ColumnRef("Courses", "dept_id"),
                    ColumnRef("Departments", "did"),
                    provenance=PROVENANCE_PREDICTED,
                ),
            ),
        )
        merged = merge_keys(university, pred)
        assert merged == university

    def test_declared_wins_with_warning(self, university, caplog):
        pred = KeyPrediction(primary_keys={"Courses": ("name",)})
        with caplog.at_level("WARNING"):
            merged = merge_keys(university, pred)
        assert merged.table("Courses").primary_key == ("cid",)
        assert any("contradicts" in r.message for r in caplog.records)

    def test_example_schema_with_predicted_did(self, university):
        # Departments.did undeclared; an external predictor supplies it plus the FK
        bare = DatabaseSchema(
            db_id=university.db_id,
            tables=tuple(
                TableDef(name=t.name, description=t.description, columns=t.columns, primary_key=())
                if t.name == "Departments"
                else t
                for t in university.tables
            ),
            foreign_keys=tuple(
                fk for fk in university.foreign_keys if fk.target.table != "Departments"
            ),
            dialect=university.dialect,
        )
        pred = KeyPrediction(
            primary_keys={"Departments": ("did",)},
            foreign_keys=(
                ForeignKey(
                    ColumnRef("Courses", "dept_id"),
                    ColumnRef("Departments", "did"),
                    provenance=PROVENANCE_PREDICTED,
                ),
            ),
        )
        merged = merge_keys(bare, pred)
        assert merged.table("Departments").primary_key == ("did",)
        match = [
            fk
            for fk in merged.foreign_keys
            if fk.source == ColumnRef("Courses", "dept_id")
            and fk.target == ColumnRef("Departments", "did")
        ]
        assert len(match) == 1 and match[0].provenance == PROVENANCE_PREDICTED


def edge_set(graph):
    return {
        (str(graph.nodes[s]), str(graph.nodes[d]), EdgeType(t).name.lower())
        for s, d, t in graph.edges
    }


class TestGraphBuild:
    def test_example_graph_edges(self, university):
        graph = build_fd_graph(university)
        edges = edge_set(graph)
        assert ("Courses.dept_id", "Departments.did", "foreign_key") in edges
        assert ("Courses.dept_id", "Courses.cid", "column_to_primary_key") in edges
        assert ("Departments.name", "Departments.did", "column_to_primary_key") in edges
        # reverses
        assert ("Departments.did", "Courses.dept_id", "rev_foreign_key") in edges
        assert ("Courses.cid", "Courses.dept_id", "rev_column_to_primary_key") in edges

    def test_single_keyless_table_has_nodes_no_edges(self):
        schema = DatabaseSchema(db_id="d", tables=(_table("t", ["a", "b", "c"]),))
        graph = build_fd_graph(schema)
        assert graph.num_nodes == 3
        assert graph.edges == ()

    def test_three_column_table_exact_edges(self):
        schema = DatabaseSchema(db_id="d", tables=(_table("T", ["pk", "a", "b"], pk=("pk",)),))
        graph = build_fd_graph(schema)
        assert edge_set(graph) == {
            ("T.a", "T.pk", "column_to_primary_key"),
            ("T.b", "T.pk", "column_to_primary_key"),
            ("T.pk", "T.a", "rev_column_to_primary_key"),
            ("T.pk", "T.b", "rev_column_to_primary_key"),
        }

    def test_edge_count_formula(self):
        # n columns, one PK member, zero FKs -> n-1 forward c2pk edges
        for n in (2, 5, 9):
            cols = [f"c{i}" for i in range(n)]
            schema = DatabaseSchema(db_id="d", tables=(_table("T", cols, pk=("c0",)),))
            graph = build_fd_graph(schema)
            forward = [e for e in graph.edges if e[2] == EdgeType.COLUMN_TO_PRIMARY_KEY]
            assert len(forward) == n - 1

    @pytest.mark.parametrize("seed", range(12))
    def test_reverse_closure_and_no_duplicates(self, seed):
        schema = merge_keys_with_heuristic(make_random_schema(f"r{seed}", seed))
        graph = build_fd_graph(schema)
        triples = set(graph.edges)
        assert len(triples) == len(graph.edges)
        for s, d, t in graph.edges:
            mirror = (d, s, t.reverse)
            assert mirror in triples
            assert triples == {(a, b, c) for a, b, c in triples}

    def test_deterministic_build(self, university):
        g1 = build_fd_graph(university)
        g2 = build_fd_graph(university)
        assert g1.nodes == g2.nodes
        assert g1.edges == g2.edges

    def test_every_column_is_a_node(self, university):
        graph = build_fd_graph(university)
        assert set(graph.nodes) == set(university.columns())
        assert graph.num_nodes == university.column_count


def merge_keys_with_heuristic(schema):
    return merge_keys(schema, infer_keys_heuristic(schema))


class TestGraphPersistence:
    def test_empty_graph_round_trips(self):
        schema = DatabaseSchema(db_id="empty")
        graph = build_fd_graph(schema)
        assert load_graph(serialize_graph(graph)) == graph

    def test_example_graph_round_trips(self, university):
        graph = build_fd_graph(university)
        loaded = load_graph(serialize_graph(graph))
        assert loaded.db_id == graph.db_id
        assert loaded.nodes == graph.nodes
        assert sorted(loaded.edges) == sorted(graph.edges)

    def test_corruption_detected(self, university):
        data = bytearray(serialize_graph(build_fd_graph(university)))
        data[len(data) // 2] ^= 0xFF
        with pytest.raises(CorruptionError):
            load_graph(bytes(data))
        with pytest.raises(CorruptionError):
            load_graph(bytes(data[: len(data) // 2]))

    def test_version_mismatch_detected(self, university):
        import struct
        import zlib

        data = bytearray(serialize_graph(build_fd_graph(university)))
        data[8:10] = struct.pack("<H", 99)  # version field
        data[-4:] = struct.pack("<I", zlib.crc32(bytes(data[:-4])))
        with pytest.raises(FormatVersionError):
            load_graph(bytes(data))

    def test_debug_dump_format(self, university):
        graph = build_fd_graph(university)
        lines = graph.debug_dump().splitlines()
        assert len(lines) == len(graph.edges)
        assert "Courses.dept_id\tforeign_key\tDepartments.did" in lines
