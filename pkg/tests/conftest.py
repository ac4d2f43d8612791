"""Shared fixtures: the university schema and small helpers."""

from __future__ import annotations

import pytest

from schemafilter.schema import (
    ColumnDef,
    ColumnRef,
    DatabaseSchema,
    ForeignKey,
    TableDef,
)


def _col(name, sql_type="text", **kw):
    return ColumnDef(name=name, sql_type=sql_type, **kw)


@pytest.fixture(scope="session")
def university() -> DatabaseSchema:
    """Course-catalog schema: Students, Enrollments, Courses, Departments, Instructors."""
    return DatabaseSchema(
        db_id="university",
        dialect="sqlite",
        tables=(
            TableDef(
                name="Students",
                description="students enrolled at the university",
                primary_key=("sid",),
                columns=(
                    _col("sid", "integer", nullable=False),
                    _col("name", description="full student name"),
                    _col("age", "integer"),
                    _col("dept_id", "integer", description="major department"),
                ),
            ),
            TableDef(
                name="Enrollments",
                primary_key=("student_id", "course_id"),
                columns=(
                    _col("student_id", "integer", nullable=False),
                    _col("course_id", "integer", nullable=False),
                    _col("grade", description="letter grade", sample_values=("A", "B+")),
                ),
            ),
            TableDef(
                name="Courses",
                description="courses offered by departments",
                primary_key=("cid",),
                columns=(
                    _col("cid", "integer", nullable=False),
                    _col("name", description="course title"),
                    _col("dept_id", "integer", description="owning department"),
                    _col("credits", "integer", sample_values=("3", "4")),
                ),
            ),
            TableDef(
                name="Departments",
                description="academic departments",
                primary_key=("did",),
                columns=(
                    _col("did", "integer", nullable=False),
                    _col(
                        "name",
                        description="department name",
                        sample_values=("Computer Science", "History"),
                    ),
                    _col("building"),
                ),
            ),
            TableDef(
                name="Instructors",
                primary_key=("iid",),
                columns=(
                    _col("iid", "integer", nullable=False),
                    _col("name"),
                    _col("dept_id", "integer"),
                ),
            ),
        ),
        foreign_keys=(
            ForeignKey(ColumnRef("Students", "dept_id"), ColumnRef("Departments", "did")),
            ForeignKey(ColumnRef("Enrollments", "student_id"), ColumnRef("Students", "sid")),
            ForeignKey(ColumnRef("Enrollments", "course_id"), ColumnRef("Courses", "cid")),
            ForeignKey(ColumnRef("Courses", "dept_id"), ColumnRef("Departments", "did")),
            ForeignKey(ColumnRef("Instructors", "dept_id"), ColumnRef("Departments", "did")),
        ),
    )


EXAMPLE_QUESTION = "Count the number of courses offered in the Computer Science department"

EXAMPLE_SQL = """SELECT COUNT(c.cid) AS num_courses
FROM Courses AS c
JOIN Departments AS d
  ON c.dept_id = d.did
WHERE d.name = 'Computer Science';"""

EXAMPLE_GOLD = {
    ColumnRef("Courses", "cid"),
    ColumnRef("Courses", "dept_id"),
    ColumnRef("Departments", "did"),
    ColumnRef("Departments", "name"),
}


@pytest.fixture(scope="session")
def example_question():
    return EXAMPLE_QUESTION


@pytest.fixture(scope="session")
def example_sql():
    return EXAMPLE_SQL


@pytest.fixture(scope="session")
def example_gold():
    return set(EXAMPLE_GOLD)
