"""Gold-column extraction from SQL text.

Resolves every schema column referenced anywhere in a statement, with table
aliases and FROM-scope (including correlated subqueries) handled explicitly.
Supported subset: SELECT with joins, WHERE, GROUP/ORDER/HAVING, LIMIT,
subqueries, set operations, CASE and CAST. CTEs (WITH), window functions
(OVER) and USING clauses are rejected with UnsupportedSqlError rather than
silently under-extracting. Columns that appear only inside string literals or
comments are never extracted, and ``*`` / ``alias.*`` name no columns.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import (
    AmbiguousColumnError,
    EmptyPositivesError,
    SqlExtractionError,
    UnknownColumnError,
    UnsupportedSqlError,
)
from .schema import ColumnRef, DatabaseSchema, LabeledExample, TableDef

_TOKEN_RE = re.compile(
    r"""
      (?P<ws>\s+)
    | (?P<comment>--[^\n]*|\#[^\n]*|/\*.*?\*/)
    | (?P<string>'(?:[^']|'')*')
    | (?P<qident>"(?:[^"]|"")*"|`[^`]*`|\[[^\]]*\])
    | (?P<number>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+)
    | (?P<ident>[A-Za-z_][A-Za-z_0-9$]*)
    | (?P<punct><>|<=|>=|!=|\|\||::|[(),.;*=<>+\-/%])
    """,
    re.VERBOSE | re.DOTALL,
)

_KEYWORDS = frozenset(
    """
    select from where group by having order limit offset
    join inner left right full outer cross on as
    and or not in exists between like glob is null
    case when then else end union intersect except all distinct
    asc desc cast collate escape
    with over partition window using natural
    """.split()
)

_REJECTED = {
    "with": "common table expressions (WITH)",
    "over": "window functions (OVER)",
    "window": "WINDOW clauses",
    "using": "USING join clauses",
    "natural": "NATURAL joins",
}

_JOIN_STARTERS = frozenset({"join", "inner", "left", "right", "full", "cross"})
_CLAUSE_STARTERS = frozenset({"where", "group", "having", "order", "limit", "offset"})
_SETOPS = frozenset({"union", "intersect", "except"})


@dataclass
class _Token:
    kind: str  # kw | ident | string | number | punct
    value: str  # lowered for kw, original for the rest
    pos: int


def _tokenize(sql: str) -> list[_Token]:
    tokens: list[_Token] = []
    i = 0
    while i < len(sql):
        m = _TOKEN_RE.match(sql, i)
        if m is None:
            raise UnsupportedSqlError(f"unsupported character {sql[i]!r} at offset {i}")
        i = m.end()
        kind = m.lastgroup
        text = m.group()
        if kind in ("ws", "comment"):
            continue
        if kind == "ident":
            low = text.lower()
            if low in _KEYWORDS:
                tokens.append(_Token("kw", low, m.start()))
            else:
                tokens.append(_Token("ident", text, m.start()))
        elif kind == "qident":
            if text[0] == '"':
                inner = text[1:-1].replace('""', '"')
            else:
                inner = text[1:-1]
            tokens.append(_Token("ident", inner, m.start()))
        else:
            tokens.append(_Token(kind, text, m.start()))
    return tokens


@dataclass
class _Derived:
    """A derived table (subquery in FROM); resolving through it adds no columns."""

    exported: set[str] | None  # None = open (e.g. SELECT *), else lowered names


@dataclass
class _Scope:
    tables: dict[str, TableDef] = field(default_factory=dict)  # alias/table (lowered) -> def
    derived: dict[str, _Derived] = field(default_factory=dict)
    select_aliases: set[str] = field(default_factory=set)
    parent: "_Scope | None" = None

    def chain(self):
        scope: _Scope | None = self
        while scope is not None:
            yield scope
            scope = scope.parent


class _Extractor:
    def __init__(self, schema: DatabaseSchema):
        self.schema = schema
        self.refs: set[ColumnRef] = set()

    # -- top level --------------------------------------------------------

    def run(self, tokens: list[_Token]) -> set[ColumnRef]:
        for t in tokens:
            if t.kind == "kw" and t.value in _REJECTED:
                raise UnsupportedSqlError(f"{_REJECTED[t.value]} are outside the supported subset")
        i = self._skip_outer_parens_start(tokens, 0)
        i = self._parse_chain(tokens, i, parent=None)
        while i < len(tokens) and tokens[i].kind == "punct" and tokens[i].value in (";", ")"):
            i += 1
        if i < len(tokens):
            t = tokens[i]
            raise UnsupportedSqlError(f"unexpected {t.value!r} after statement (offset {t.pos})")
        return self.refs

    @staticmethod
    def _skip_outer_parens_start(tokens: list[_Token], i: int) -> int:
        while (
            i + 1 < len(tokens)
            and tokens[i].kind == "punct"
            and tokens[i].value == "("
            and tokens[i + 1].kind == "kw"
            and tokens[i + 1].value == "select"
        ):
            i += 1
        return i

    def _parse_chain(self, tokens: list[_Token], i: int, parent: _Scope | None) -> int:
        """SELECT block, optionally chained with UNION/INTERSECT/EXCEPT [ALL]."""
        i = self._parse_block(tokens, i, parent)
        while i < len(tokens) and tokens[i].kind == "kw" and tokens[i].value in _SETOPS:
            i += 1
            if i < len(tokens) and tokens[i].kind == "kw" and tokens[i].value == "all":
                i += 1
            i = self._parse_block(tokens, i, parent)
        return i

    # -- one SELECT block --------------------------------------------------

    def _parse_block(self, tokens: list[_Token], i: int, parent: _Scope | None) -> int:
        if i >= len(tokens) or tokens[i].kind != "kw" or tokens[i].value != "select":
            at = tokens[i].value if i < len(tokens) else "<end>"
            raise UnsupportedSqlError(f"expected SELECT, found {at!r}")
        i += 1

        spans: dict[str, tuple[int, int]] = {}
        depth = 0
        clause = "select"
        start = i
        while i < len(tokens):
            t = tokens[i]
            if t.kind == "punct":
                if t.value == "(":
                    depth += 1
                elif t.value == ")":
                    if depth == 0:
                        break  # end of an enclosing subquery
                    depth -= 1
                elif t.value == ";" and depth == 0:
                    break
            elif t.kind == "kw" and depth == 0:
                if t.value in _SETOPS:
                    break
                if t.value == "from" and clause == "select":
                    spans[clause] = (start, i)
                    clause, start = "from", i + 1
                elif t.value in _CLAUSE_STARTERS:
                    spans[clause] = (start, i)
                    clause, start = t.value, i + 1
            i += 1
        spans[clause] = (start, i)

        scope = _Scope(parent=parent)
        on_spans: list[tuple[int, int]] = []
        if "from" in spans:
            self._parse_from(tokens, spans["from"], scope, on_spans)

        # select list first so its aliases are known to GROUP/ORDER/HAVING
        if "select" in spans:
            self._walk_expressions(tokens, spans["select"], scope, in_select_list=True)
        for name in ("where", "group", "having", "order", "limit", "offset"):
            if name in spans:
                self._walk_expressions(tokens, spans[name], scope, alias_ok=name in ("group", "having", "order"))
        for span in on_spans:
            self._walk_expressions(tokens, span, scope)
        return i

    # -- FROM clause --------------------------------------------------------

    def _parse_from(
        self,
        tokens: list[_Token],
        span: tuple[int, int],
        scope: _Scope,
        on_spans: list[tuple[int, int]],
    ) -> None:
        i, end = span
        expect_source = True
        while i < end:
            t = tokens[i]
            if expect_source:
                i = self._parse_source(tokens, i, end, scope)
                expect_source = False
                continue
            if t.kind == "punct" and t.value == ",":
                i += 1
                expect_source = True
            elif t.kind == "kw" and t.value in _JOIN_STARTERS:
                while i < end and tokens[i].kind == "kw" and tokens[i].value in (
                    "inner",
                    "left",
                    "right",
                    "full",
                    "outer",
                    "cross",
                ):
                    i += 1
                if i >= end or tokens[i].kind != "kw" or tokens[i].value != "join":
                    raise UnsupportedSqlError("malformed JOIN clause")
                i += 1
                i = self._parse_source(tokens, i, end, scope)
            elif t.kind == "kw" and t.value == "on":
                i += 1
                start = i
                depth = 0
                while i < end:
                    tk = tokens[i]
                    if tk.kind == "punct":
                        if tk.value == "(":
                            depth += 1
                        elif tk.value == ")":
                            depth -= 1
                        elif tk.value == "," and depth == 0:
                            break
                    elif tk.kind == "kw" and depth == 0 and tk.value in _JOIN_STARTERS:
                        break
                    i += 1
                on_spans.append((start, i))
            else:
                raise UnsupportedSqlError(f"unexpected {t.value!r} in FROM clause (offset {t.pos})")

    def _parse_source(self, tokens: list[_Token], i: int, end: int, scope: _Scope) -> int:
        if i >= end:
            raise UnsupportedSqlError("FROM clause ends where a table was expected")
        t = tokens[i]
        if t.kind == "punct" and t.value == "(":
            if i + 1 < end and tokens[i + 1].kind == "kw" and tokens[i + 1].value == "select":
                sub = _Extractor(self.schema)
                sub.refs = self.refs  # shared sink
                j = sub._parse_chain(tokens, i + 1, parent=scope.parent)
                if j >= end or tokens[j].kind != "punct" or tokens[j].value != ")":
                    raise UnsupportedSqlError("unterminated derived table")
                exported = self._derived_exports(tokens, i + 1, j)
                j += 1
                alias, j = self._parse_alias(tokens, j, end, required=False)
                key = (alias or f"@derived{len(scope.derived)}").lower()
                scope.derived[key] = _Derived(exported=exported)
                return j
            raise UnsupportedSqlError("parenthesized FROM items other than subqueries are unsupported")
        if t.kind != "ident":
            raise UnsupportedSqlError(f"expected table name, found {t.value!r}")
        parts = [t.value]
        i += 1
        while i + 1 < end and tokens[i].kind == "punct" and tokens[i].value == "." and tokens[i + 1].kind == "ident":
            parts.append(tokens[i + 1].value)
            i += 2
        table = self.schema.table(".".join(parts)) or self.schema.table(parts[-1])
        if table is None:
            raise UnknownColumnError(f"FROM references unknown table {'.'.join(parts)!r}")
        alias, i = self._parse_alias(tokens, i, end, required=False)
        key = (alias or table.name).lower()
        if key in scope.tables or key in scope.derived:
            raise SqlExtractionError(f"duplicate table alias {key!r}")
        scope.tables[key] = table
        return i

    @staticmethod
    def _parse_alias(tokens: list[_Token], i: int, end: int, required: bool) -> tuple[str | None, int]:
        if i < end and tokens[i].kind == "kw" and tokens[i].value == "as":
            if i + 1 >= end or tokens[i + 1].kind != "ident":
                raise UnsupportedSqlError("AS must be followed by an alias")
            return tokens[i + 1].value, i + 2
        if i < end and tokens[i].kind == "ident":
            return tokens[i].value, i + 1
        if required:
            raise UnsupportedSqlError("alias expected")
        return None, i

    def _derived_exports(self, tokens: list[_Token], i: int, end: int) -> set[str] | None:
        """Best-effort output-column names of a derived table's select list."""
        # i points at SELECT
        names: set[str] = set()
        depth = 0
        j = i + 1
        item_tokens: list[_Token] = []

        def flush():
            for k, tk in enumerate(item_tokens):
                if tk.kind == "kw" and tk.value == "as" and k + 1 < len(item_tokens):
                    names.add(item_tokens[k + 1].value.lower())
                    return
            if item_tokens and item_tokens[-1].kind == "ident":
                names.add(item_tokens[-1].value.lower())

        while j < end:
            tk = tokens[j]
            if tk.kind == "punct" and tk.value == "(":
                depth += 1
            elif tk.kind == "punct" and tk.value == ")":
                depth -= 1
            elif depth == 0 and tk.kind == "kw" and tk.value == "from":
                break
            elif depth == 0 and tk.kind == "punct" and tk.value == "*":
                return None
            if depth == 0 and tk.kind == "punct" and tk.value == ",":
                flush()
                item_tokens = []
            else:
                item_tokens.append(tk)
            j += 1
        flush()
        return names

    # -- expression walking --------------------------------------------------

    def _walk_expressions(
        self,
        tokens: list[_Token],
        span: tuple[int, int],
        scope: _Scope,
        in_select_list: bool = False,
        alias_ok: bool = False,
    ) -> None:
        i, end = span
        depth = 0
        prev: _Token | None = None
        while i < end:
            t = tokens[i]
            if t.kind == "punct":
                if t.value == "(":
                    if i + 1 < end and tokens[i + 1].kind == "kw" and tokens[i + 1].value == "select":
                        sub = _Extractor(self.schema)
                        sub.refs = self.refs
                        j = sub._parse_chain(tokens, i + 1, parent=scope)
                        if j >= end or tokens[j].kind != "punct" or tokens[j].value != ")":
                            raise UnsupportedSqlError("unterminated subquery")
                        prev = tokens[j]
                        i = j + 1
                        continue
                    depth += 1
                elif t.value == ")":
                    depth -= 1
                prev = t
                i += 1
                continue
            if t.kind in ("string", "number", "kw"):
                prev = t
                i += 1
                continue

            # identifier
            if i + 1 < end and tokens[i + 1].kind == "punct" and tokens[i + 1].value == "(":
                prev = t  # function name, not a column
                i += 1
                continue
            if i + 1 < end and tokens[i + 1].kind == "punct" and tokens[i + 1].value == ".":
                parts = [t.value]
                j = i + 1
                star = False
                while j + 1 < end and tokens[j].kind == "punct" and tokens[j].value == ".":
                    nxt = tokens[j + 1]
                    if nxt.kind == "ident":
                        parts.append(nxt.value)
                        j += 2
                    elif nxt.kind == "punct" and nxt.value == "*":
                        star = True
                        j += 2
                        break
                    else:
                        raise UnsupportedSqlError(f"dangling '.' at offset {nxt.pos}")
                if not star:
                    self._resolve_qualified(parts[:-1], parts[-1], scope)
                prev = tokens[j - 1]
                i = j
                continue
            if prev is not None and prev.kind == "kw" and prev.value == "as":
                # alias declaration or CAST target type
                if in_select_list and depth == 0:
                    scope.select_aliases.add(t.value.lower())
                prev = t
                i += 1
                continue
            if in_select_list and depth == 0 and prev is not None and (
                prev.kind in ("string", "number") or (prev.kind == "punct" and prev.value == ")")
            ):
                # bare output alias directly after a closed expression / literal
                scope.select_aliases.add(t.value.lower())
                prev = t
                i += 1
                continue
            self._resolve_unqualified(t, scope, alias_ok=alias_ok)
            prev = t
            i += 1

    def _resolve_qualified(self, quals: list[str], column: str, scope: _Scope) -> None:
        qual = quals[-1].lower()
        for s in scope.chain():
            if qual in s.tables:
                table = s.tables[qual]
                cdef = table.column(column)
                if cdef is None:
                    raise UnknownColumnError(
                        f"{quals[-1]}.{column}: no such column in table {table.name}"
                    )
                self.refs.add(ColumnRef(table.name, cdef.name))
                return
            if qual in s.derived:
                d = s.derived[qual]
                if d.exported is not None and column.lower() not in d.exported:
                    raise UnknownColumnError(
                        f"{quals[-1]}.{column}: derived table exports no such column"
                    )
                return  # inner references were already collected
        raise UnknownColumnError(f"unknown table or alias {quals[-1]!r}")

    def _resolve_unqualified(self, token: _Token, scope: _Scope, alias_ok: bool) -> None:
        low = token.value.lower()
        for s in scope.chain():
            table_hits = [t for t in s.tables.values() if t.column(low) is not None]
            derived_hits = [
                d for d in s.derived.values() if d.exported is None or low in d.exported
            ]
            if len(table_hits) + len(derived_hits) > 1:
                raise AmbiguousColumnError(
                    f"column {token.value!r} is ambiguous across {len(table_hits) + len(derived_hits)} FROM items"
                )
            if table_hits:
                cdef = table_hits[0].column(low)
                assert cdef is not None
                self.refs.add(ColumnRef(table_hits[0].name, cdef.name))
                return
            if derived_hits:
                return
        if alias_ok and low in scope.select_aliases:
            return
        raise UnknownColumnError(f"column {token.value!r} not found in statement scope")


def extract_gold_columns(sql: str, schema: DatabaseSchema) -> set[ColumnRef]:
    """Every schema column referenced anywhere in one SQL statement."""
    tokens = _tokenize(sql)
    if not tokens:
        return set()
    return _Extractor(schema).run(tokens)


def build_labeled_example(
    question: str, gold_sqls: list[str], schema: DatabaseSchema
) -> LabeledExample:
    """Positives = union of columns over the gold statements; the rest are negatives."""
    positives: set[ColumnRef] = set()
    for sql in gold_sqls:
        positives |= extract_gold_columns(sql, schema)
    if not positives:
        raise EmptyPositivesError(
            f"no gold SQL for {question!r} references any column of {schema.db_id!r}"
        )
    negatives = set(schema.columns()) - positives
    return LabeledExample(
        question=question,
        db_id=schema.db_id,
        positives=frozenset(positives),
        negatives=frozenset(negatives),
        gold_sql=gold_sqls[0] if gold_sqls else None,
    )
