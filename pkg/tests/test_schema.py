"""Schema model, loaders, and round-trip laws."""

from __future__ import annotations

import json

import pytest

from schemafilter.errors import SchemaError
from schemafilter.schema import (
    ColumnDef,
    ColumnRef,
    DatabaseSchema,
    ForeignKey,
    TableDef,
    apply_metadata,
    load_schema,
    save_schema,
)


class TestColumnRef:
    def test_case_insensitive_equality(self):
        assert ColumnRef("Courses", "Dept_ID") == ColumnRef("courses", "dept_id")
        assert hash(ColumnRef("A", "b")) == hash(ColumnRef("a", "B"))

    def test_preserves_spelling(self):
        ref = ColumnRef("Courses", "Dept_ID")
        assert str(ref) == "Courses.Dept_ID"

    def test_rejects_empty_identifiers(self):
        with pytest.raises(SchemaError):
            ColumnRef("", "x")
        with pytest.raises(SchemaError):
            ColumnRef("t", "")


class TestInvariants:
    def test_duplicate_table_names_rejected(self):
        with pytest.raises(SchemaError):
            DatabaseSchema(
                db_id="d",
                tables=(
                    TableDef(name="T", columns=(ColumnDef(name="a"),)),
                    TableDef(name="t", columns=(ColumnDef(name="a"),)),
                ),
            )

    def test_duplicate_column_names_rejected(self):
        with pytest.raises(SchemaError):
            TableDef(name="T", columns=(ColumnDef(name="a"), ColumnDef(name="A")))

    def test_pk_member_must_exist(self):
        with pytest.raises(SchemaError) as err:
            TableDef(name="T", columns=(ColumnDef(name="a"),), primary_key=("b",))
        assert "b" in str(err.value)

    def test_dangling_fk_rejected(self):
        with pytest.raises(SchemaError) as err:
            DatabaseSchema(
                db_id="d",
                tables=(TableDef(name="T", columns=(ColumnDef(name="a"),)),),
                foreign_keys=(ForeignKey(ColumnRef("T", "a"), ColumnRef("U", "b")),),
            )
        assert "dangling" in str(err.value)

    def test_self_referential_fk_rejected(self):
        with pytest.raises(SchemaError):
            ForeignKey(ColumnRef("T", "a"), ColumnRef("t", "A"))


class TestLoader:
    def test_loads_university_file(self, tmp_path, university):
        # Example-1 schema file -> tables and the Courses.dept_id FK resolve
        path = tmp_path / "university.json"
        save_schema(university, path)
        loaded = load_schema(path)
        assert [t.name for t in loaded.tables] == [
            "Students",
            "Enrollments",
            "Courses",
            "Departments",
            "Instructors",
        ]
        fk_pairs = {(str(fk.source), str(fk.target)) for fk in loaded.foreign_keys}
        assert ("Courses.dept_id", "Departments.did") in fk_pairs

    def test_zero_tables_is_valid(self, tmp_path):
        path = tmp_path / "empty.json"
        path.write_text(json.dumps({"db_id": "empty", "tables": [], "foreign_keys": []}))
        schema = load_schema(path)
        assert schema.tables == ()

    def test_dangling_reference_names_offender(self, tmp_path):
        doc = {
            "db_id": "bad",
            "tables": [{"name": "T", "columns": [{"name": "a"}], "primary_key": []}],
            "foreign_keys": [
                {"source": {"table": "T", "column": "a"}, "target": {"table": "T", "column": "zz"}}
            ],
        }
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(SchemaError) as err:
            load_schema(path)
        assert "foreign_keys[0]" in str(err.value)

    def test_parse_error_reports_location(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{"db_id": "x", bad}')
        with pytest.raises(SchemaError) as err:
            load_schema(path)
        assert "line" in str(err.value)

    def test_round_trip_identity(self, tmp_path, university):
        path1 = tmp_path / "a.json"
        path2 = tmp_path / "b.json"
        save_schema(university, path1)
        once = load_schema(path1)
        save_schema(once, path2)
        twice = load_schema(path2)
        assert once == twice == university

    def test_spider_manifest(self, tmp_path):
        manifest = [
            {
                "db_id": "concerts",
                "table_names_original": ["singer", "concert"],
                "column_names_original": [
                    [-1, "*"],
                    [0, "singer_id"],
                    [0, "name"],
                    [1, "concert_id"],
                    [1, "singer_id"],
                ],
                "column_types": ["text", "number", "text", "number", "number"],
                "primary_keys": [1, 3],
                "foreign_keys": [[4, 1]],
            }
        ]
        path = tmp_path / "tables.json"
        path.write_text(json.dumps(manifest))
        schema = load_schema(path, format="spider", db_id="concerts")
        assert schema.dialect == "sqlite"
        assert schema.table("singer").primary_key == ("singer_id",)
        assert schema.foreign_keys[0].source == ColumnRef("concert", "singer_id")
        # multi-db manifest without db_id is ambiguous
        manifest.append({**manifest[0], "db_id": "other"})
        path.write_text(json.dumps(manifest))
        with pytest.raises(SchemaError):
            load_schema(path, format="spider")


class TestMetadataOverlay:
    def test_fills_gaps_only(self, university):
        meta = {
            "tables": {
                "Students": {
                    "description": "overlay should not replace existing",
                    "columns": {"age": {"description": "age in years"}},
                },
                "Instructors": {"description": "teaching staff"},
            }
        }
        enriched = apply_metadata(university, meta)
        # existing description kept
        assert enriched.table("Students").description == "students enrolled at the university"
        # gap filled
        assert enriched.table("Students").column("age").description == "age in years"
        assert enriched.table("Instructors").description == "teaching staff"
