"""Per-column inverted index over distinct cell values with BM25 scoring.

Built offline, read-only afterwards. Each column is its own little corpus:
N and the average document length are per column, documents are the distinct
value strings. Tokenization: lower-case, split on non-alphanumerics, drop
empties. Values longer than ``max_token_chars`` are truncated for
tokenization but stored whole.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .container import atomic_write, pack_container, unpack_container
from .errors import CorruptionError, UnknownColumnError
from .schema import ColumnRef, DatabaseSchema

INDEX_KIND = b"VIX1"
INDEX_VERSION = 1

DEFAULT_K1 = 1.2
DEFAULT_B = 0.75
DEFAULT_MAX_TOKEN_CHARS = 256

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize_text(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class ValueHit:
    value: str
    score: float


@dataclass
class _ColumnPostings:
    values: list[str] = field(default_factory=list)
    doc_lens: list[int] = field(default_factory=list)
    postings: dict[str, list[tuple[int, int]]] = field(default_factory=dict)

    @property
    def total_len(self) -> int:
        return sum(self.doc_lens)


@dataclass
class InvertedIndex:
    db_id: str
    k1: float = DEFAULT_K1
    b: float = DEFAULT_B
    max_token_chars: int = DEFAULT_MAX_TOKEN_CHARS
    columns: dict[tuple[str, str], _ColumnPostings] = field(default_factory=dict)

    def column_postings(self, column: ColumnRef) -> _ColumnPostings:
        try:
            return self.columns[column.key]
        except KeyError:
            raise UnknownColumnError(f"column {column} is not in the value index") from None


def build_value_index(
    schema: DatabaseSchema,
    value_source: Iterable[tuple[ColumnRef, str]],
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
    max_token_chars: int = DEFAULT_MAX_TOKEN_CHARS,
) -> InvertedIndex:
    """Index the distinct values of every schema column (duplicates dropped)."""
    index = InvertedIndex(db_id=schema.db_id, k1=k1, b=b, max_token_chars=max_token_chars)
    for ref in schema.columns():
        index.columns[ref.key] = _ColumnPostings()
    seen: dict[tuple[str, str], set[str]] = {key: set() for key in index.columns}

    for ref, value in value_source:
        if ref.key not in index.columns:
            raise UnknownColumnError(f"value source references unknown column {ref}")
        col = index.columns[ref.key]
        if value in seen[ref.key]:
            continue
        seen[ref.key].add(value)
        tokens = tokenize_text(value[:max_token_chars])
        vid = len(col.values)
        col.values.append(value)
        col.doc_lens.append(len(tokens))
        for term, tf in sorted(Counter(tokens).items()):
            col.postings.setdefault(term, []).append((vid, tf))
    return index


def retrieve_values(index: InvertedIndex, query: str, column: ColumnRef, k: int) -> list[ValueHit]:
    """Top-k values by BM25 against the query; zero-score values are dropped.

    idf = max(0, ln((N - df + 0.5) / (df + 0.5))); ties broken
    lexicographically on the value string.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    col = index.column_postings(column)
    n_docs = len(col.values)
    if n_docs == 0:
        return []
    avgdl = col.total_len / n_docs
    scores: dict[int, float] = {}
    for term in tokenize_text(query):
        plist = col.postings.get(term)
        if not plist:
            continue
        df = len(plist)
        idf = max(0.0, math.log((n_docs - df + 0.5) / (df + 0.5)))
        if idf == 0.0:
            continue
        for vid, tf in plist:
            dl = col.doc_lens[vid]
            denom = tf + index.k1 * (1.0 - index.b + index.b * dl / avgdl) if avgdl > 0 else tf + index.k1
            scores[vid] = scores.get(vid, 0.0) + idf * tf * (index.k1 + 1.0) / denom
    hits = [ValueHit(col.values[vid], s) for vid, s in scores.items() if s > 0.0]
    hits.sort(key=lambda h: (-h.score, h.value))
    return hits[:k]


def load_value_dump(path: str | Path) -> Iterable[tuple[ColumnRef, str]]:
    """Tab-separated (table, column, value) rows; value may itself contain tabs."""
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t", 2)
            if len(parts) != 3:
                raise CorruptionError(f"{path}:{lineno}: expected table<TAB>column<TAB>value")
            yield ColumnRef(parts[0], parts[1]), parts[2]


# ---------------------------------------------------------------------------
# persistence (same container framing as the graph file, own sections)


def serialize_index(index: InvertedIndex) -> bytes:
    meta = {
        "db_id": index.db_id,
        "k1": index.k1,
        "b": index.b,
        "max_token_chars": index.max_token_chars,
    }
    cols = [
        {
            "table": table,
            "column": column,
            "values": postings.values,
            "doc_lens": postings.doc_lens,
            "postings": {term: [[vid, tf] for vid, tf in plist] for term, plist in postings.postings.items()},
        }
        for (table, column), postings in index.columns.items()
    ]
    return pack_container(
        INDEX_KIND,
        INDEX_VERSION,
        [
            ("meta", json.dumps(meta).encode("utf-8")),
            ("columns", json.dumps(cols).encode("utf-8")),
        ],
    )


def load_index(data: bytes) -> InvertedIndex:
    sections = unpack_container(data, INDEX_KIND, INDEX_VERSION)
    try:
        meta = json.loads(sections["meta"].decode("utf-8"))
        cols = json.loads(sections["columns"].decode("utf-8"))
    except KeyError as exc:
        raise CorruptionError(f"index file is missing section {exc}") from exc
    index = InvertedIndex(
        db_id=str(meta["db_id"]),
        k1=float(meta["k1"]),
        b=float(meta["b"]),
        max_token_chars=int(meta["max_token_chars"]),
    )
    for entry in cols:
        postings = _ColumnPostings(
            values=[str(v) for v in entry["values"]],
            doc_lens=[int(x) for x in entry["doc_lens"]],
            postings={
                term: [(int(vid), int(tf)) for vid, tf in plist]
                for term, plist in entry["postings"].items()
            },
        )
        index.columns[(entry["table"], entry["column"])] = postings
    return index


def save_index(index: InvertedIndex, path: str | Path) -> None:
    atomic_write(path, serialize_index(index))


def load_index_file(path: str | Path) -> InvertedIndex:
    return load_index(Path(path).read_bytes())
