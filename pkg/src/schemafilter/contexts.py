"""Per-column context assembly and relevance-prompt rendering.

The column context is the eight-field textual document a provider scores
against the question: table name, column name, table description, column
description, data type, sample values, missingness flag, value description.
Field order and serialization are fixed so rendered prompts are reproducible;
missing metadata renders as an empty field, never invented.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

from .schema import ColumnRef, DatabaseSchema
from .values import InvertedIndex, retrieve_values

DEFAULT_SAMPLE_K = 2

_FIELD_LABELS = (
    "Table name",
    "Column name",
    "Table description",
    "Column description",
    "Data type",
    "Sample values",
    "Missingness flag",
    "Value description",
)


@dataclass(frozen=True)
class ColumnContext:
    table_name: str
    column_name: str
    table_description: str = ""
    column_description: str = ""
    data_type: str = ""
    sample_values: tuple[str, ...] = ()
    missingness_flag: bool = False
    value_description: str = ""

    def __post_init__(self):
        if not self.table_name or not self.column_name:
            raise ValueError("table_name and column_name must be non-empty")
        object.__setattr__(self, "sample_values", tuple(self.sample_values))

    def fields(self) -> tuple[tuple[str, str], ...]:
        """(label, rendered value) pairs in the fixed serialization order."""
        return (
            (_FIELD_LABELS[0], self.table_name),
            (_FIELD_LABELS[1], self.column_name),
            (_FIELD_LABELS[2], self.table_description),
            (_FIELD_LABELS[3], self.column_description),
            (_FIELD_LABELS[4], self.data_type),
            (_FIELD_LABELS[5], ", ".join(self.sample_values)),
            (_FIELD_LABELS[6], "true" if self.missingness_flag else "false"),
            (_FIELD_LABELS[7], self.value_description),
        )


def assemble_context(
    schema: DatabaseSchema,
    column: ColumnRef,
    query: str,
    index: InvertedIndex | None = None,
    k: int = DEFAULT_SAMPLE_K,
) -> ColumnContext:
    """Build the context document for one column against one question.

    Sample values come from the BM25 retriever when an index is present and
    yields hits; otherwise the column's stored sample values stand in (first
    one as the representative example on the retriever path, first k when no
    index exists at all).
    """
    table = schema.table(column.table)
    cdef = schema.column_def(column)
    assert table is not None

    if index is not None:
        hits = retrieve_values(index, query, column, k)
        if hits:
            samples = tuple(h.value for h in hits)
        else:
            samples = tuple(cdef.sample_values[:1])
    else:
        samples = tuple(cdef.sample_values[:k])

    return ColumnContext(
        table_name=table.name,
        column_name=cdef.name,
        table_description=table.description or "",
        column_description=cdef.description or "",
        data_type=cdef.sql_type,
        sample_values=samples,
        missingness_flag=cdef.nullable,
        value_description=cdef.value_description or "",
    )


def render_context(context: ColumnContext) -> str:
    """The context document as labeled `key: value` lines in fixed order."""
    return "\n".join(f"{label}: {value}" for label, value in context.fields())


def load_prompt_template() -> str:
    return (
        resources.files("schemafilter")
        .joinpath("resources/prompt_template.txt")
        .read_text(encoding="utf-8")
    )


def render_prompt(query: str, context: ColumnContext) -> str:
    """Instantiate the relevance prompt template for one (question, column) pair.

    The template text ships as a versioned resource file; this substitutes the
    {q} and {context(c)} placeholders and changes nothing else, so output is
    byte-stable across runs and platforms.
    """
    template = load_prompt_template()
    return template.replace("{q}", query).replace("{context(c)}", render_context(context))
