"""BM25 value retrieval against a direct-formula oracle and properties."""

from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from schemafilter.errors import UnknownColumnError
from schemafilter.schema import ColumnDef, ColumnRef, DatabaseSchema, TableDef
from schemafilter.values import (
    build_value_index,
    load_index,
    retrieve_values,
    serialize_index,
    tokenize_text,
)


def one_column_schema():
    return DatabaseSchema(
        db_id="toy",
        tables=(TableDef(name="T", columns=(ColumnDef(name="c"), ColumnDef(name="empty"))),),
    )


COL = ColumnRef("T", "c")

TOY_VALUES = [
    "alpha beta gamma",
    "alpha alpha delta",
    "beta",
    "gamma delta",
    "epsilon zeta eta",
]


def bm25_oracle(query: str, values: list[str], k1=1.2, b=0.75) -> list[tuple[str, float]]:
    """Straight-line evaluation of the standard BM25 formula on paper."""
    docs = [tokenize_text(v) for v in values]
    n = len(docs)
    avgdl = sum(len(d) for d in docs) / n
    out = []
    for value, doc in zip(values, docs):
        s = 0.0
        for term in tokenize_text(query):
            tf = doc.count(term)
            if tf == 0:
                continue
            df = sum(1 for d in docs if term in d)
            idf = max(0.0, math.log((n - df + 0.5) / (df + 0.5)))
            s += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len(doc) / avgdl))
        if s > 0:
            out.append((value, s))
    out.sort(key=lambda pair: (-pair[1], pair[0]))
    return out


def build_toy_index(values=TOY_VALUES):
    return build_value_index(one_column_schema(), [(COL, v) for v in values])


class TestBm25Oracle:
    def test_five_value_corpus_matches_hand_computation(self):
        index = build_toy_index()
        hits = retrieve_values(index, "alpha beta", COL, k=10)
        expected = bm25_oracle("alpha beta", TOY_VALUES)
        assert [h.value for h in hits] == [v for v, _ in expected]
        for hit, (_, oracle_score) in zip(hits, expected):
            assert hit.score == pytest.approx(oracle_score, abs=1e-12)
        # frozen hand-derived ordering: both-terms doc, then the short beta doc,
        # then the long alpha doc; ln(1.4) is the shared idf
        assert [h.value for h in hits] == ["alpha beta gamma", "beta", "alpha alpha delta"]
        idf = math.log(1.4)
        assert hits[0].score == pytest.approx(2 * idf * 2.2 / 2.425, abs=1e-12)
        assert hits[1].score == pytest.approx(idf * 2.2 / 1.675, abs=1e-12)
        assert hits[2].score == pytest.approx(idf * 4.4 / 3.425, abs=1e-12)

    def test_paper_example_top_hit(self, university):
        source = [
            (ColumnRef("Departments", "name"), "Computer Science"),
            (ColumnRef("Departments", "name"), "History"),
            (ColumnRef("Departments", "name"), "Mathematics"),
            (ColumnRef("Departments", "name"), "Biology"),
            (ColumnRef("Departments", "name"), "Fine Arts"),
        ]
        index = build_value_index(university, source)
        hits = retrieve_values(
            index,
            "Count the number of courses offered in the Computer Science department",
            ColumnRef("Departments", "name"),
            k=2,
        )
        assert hits and hits[0].value == "Computer Science"

    def test_no_shared_tokens_yields_empty(self):
        index = build_toy_index()
        assert retrieve_values(index, "unrelated words", COL, k=5) == []

    def test_empty_column_is_valid(self):
        index = build_toy_index()
        assert retrieve_values(index, "alpha", ColumnRef("T", "empty"), k=3) == []

    def test_duplicates_indexed_once(self):
        index = build_value_index(
            one_column_schema(), [(COL, "alpha"), (COL, "alpha"), (COL, "beta")]
        )
        assert len(index.column_postings(COL).values) == 2

    def test_unknown_column(self):
        index = build_toy_index()
        with pytest.raises(UnknownColumnError):
            retrieve_values(index, "alpha", ColumnRef("T", "nope"), k=1)
        with pytest.raises(UnknownColumnError):
            build_value_index(one_column_schema(), [(ColumnRef("X", "y"), "v")])

    def test_oversize_value_truncated_for_tokens_stored_whole(self):
        long_value = "needle " + "pad " * 300
        values = [long_value, "other thing", "third entry"]
        index = build_value_index(
            one_column_schema(), [(COL, v) for v in values], max_token_chars=6
        )
        hits = retrieve_values(index, "needle", COL, k=1)
        assert hits and hits[0].value == long_value  # stored whole
        assert retrieve_values(index, "pad", COL, k=1) == []  # truncated for tokenization


class TestProperties:
    def test_monotone_irrelevance(self):
        # a token-disjoint value never enters the hits nor displaces one;
        # raw scores legitimately move with N and avgdl, the ranking does not
        base = build_toy_index()
        extended = build_toy_index(TOY_VALUES + ["totally unrelated text"])
        q = "alpha beta"
        before = [h.value for h in retrieve_values(base, q, COL, k=10)]
        after = [h.value for h in retrieve_values(extended, q, COL, k=10)]
        assert before == after
        assert "totally unrelated text" not in after

    def test_query_token_order_invariance(self):
        index = build_toy_index()
        a = retrieve_values(index, "alpha beta", COL, k=10)
        b = retrieve_values(index, "beta alpha", COL, k=10)
        assert [(h.value, h.score) for h in a] == [(h.value, h.score) for h in b]

    @settings(max_examples=40, deadline=None)
    @given(st.data())
    def test_single_token_query_returns_containing_values(self, data):
        # constrained to df < N/2: the zero-IDF floor silences more frequent terms
        n = data.draw(st.integers(min_value=5, max_value=12))
        with_token = data.draw(st.integers(min_value=1, max_value=(n - 1) // 2))
        values = [f"needle filler{i}" if i < with_token else f"bulk{i} filler{i}" for i in range(n)]
        index = build_value_index(one_column_schema(), [(COL, v) for v in values])
        hits = retrieve_values(index, "needle", COL, k=n + 1)
        assert sorted(h.value for h in hits) == sorted(values[:with_token])


class TestPersistence:
    def test_round_trip(self, university):
        source = [
            (ColumnRef("Departments", "name"), "Computer Science"),
            (ColumnRef("Departments", "name"), "History"),
            (ColumnRef("Courses", "name"), "Algorithms"),
        ]
        index = build_value_index(university, source)
        loaded = load_index(serialize_index(index))
        assert loaded.db_id == index.db_id
        assert loaded.k1 == index.k1 and loaded.b == index.b
        for key in index.columns:
            assert loaded.columns[key] == index.columns[key]
        # identical retrieval behavior
        q = "computer science"
        ref = ColumnRef("Departments", "name")
        assert retrieve_values(loaded, q, ref, 2) == retrieve_values(index, q, ref, 2)
