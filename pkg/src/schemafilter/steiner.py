"""Connectivity closure over the FD graph.

Given the top-ranked terminal columns, grow a minimal-cost connected subgraph
(per underlying component) so every join key needed for a valid query stays
in the filtered schema. Costs follow the join-economy rule: an edge is free
exactly when it links a terminal to a primary- or foreign-key column of the
same table, and costs 1 otherwise.

The greedy procedure is a deterministic cheapest-frontier growth: multi-source
0/1-BFS from the terminals absorbs intermediate nodes along cheapest paths,
then the cheapest boundary edges merge components (Kruskal over the terminal
distance network, a standard near-linear 2-approximation). Ties prefer lower
cost, then direct terminal-terminal edges, then smaller node indices.
Disconnected terminal groups yield a forest, never an error.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .fdgraph import EdgeType, FdGraph
from .reranker import ScoreTable


@dataclass(frozen=True)
class TerminalSet:
    """Top-scoring column node indices to be spanned."""

    terminals: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "terminals", tuple(int(t) for t in self.terminals))
        if not self.terminals:
            raise ValueError("terminal set must be non-empty")
        if len(set(self.terminals)) != len(self.terminals):
            raise ValueError("terminal set contains duplicates")
        if any(t < 0 for t in self.terminals):
            raise ValueError("terminal indices must be non-negative")


@dataclass(frozen=True)
class SteinerResult:
    """Connected closure (per underlying component) of a terminal set."""

    terminals: tuple[int, ...]
    nodes: frozenset[int]
    edges: frozenset[tuple[int, int]]  # undirected, stored as (min, max)
    total_cost: int

    @property
    def aux(self) -> frozenset[int]:
        return self.nodes - set(self.terminals)


def _key_columns(graph: FdGraph) -> set[int]:
    """Nodes acting as keys, derived from the graph's own typed edges."""
    keys: set[int] = set()
    for src, dst, kind in graph.edges:
        if kind == EdgeType.FOREIGN_KEY:
            keys.add(src)
            keys.add(dst)
        elif kind == EdgeType.REV_FOREIGN_KEY:
            keys.add(src)
            keys.add(dst)
        elif kind in (EdgeType.COLUMN_TO_FOREIGN_KEY, EdgeType.COLUMN_TO_PRIMARY_KEY):
            keys.add(dst)
        elif kind in (EdgeType.REV_COLUMN_TO_FOREIGN_KEY, EdgeType.REV_COLUMN_TO_PRIMARY_KEY):
            keys.add(src)
    return keys


def _undirected_pairs(graph: FdGraph) -> list[tuple[int, int]]:
    pairs = {(min(s, d), max(s, d)) for s, d, _ in graph.edges if s != d}
    return sorted(pairs)


def edge_costs(graph: FdGraph, terminals: TerminalSet) -> dict[tuple[int, int], int]:
    """Undirected cost view: 0 iff the edge links a terminal to a same-table
    key column, else 1. Typed forward/reverse multi-edges collapse to one
    undirected edge (the rule outcome does not depend on direction or type)."""
    term = set(terminals.terminals)
    keys = _key_columns(graph)
    tables = [ref.table.lower() for ref in graph.nodes]
    costs: dict[tuple[int, int], int] = {}
    for u, v in _undirected_pairs(graph):
        same_table = tables[u] == tables[v]
        free = same_table and (
            (u in term and v in keys) or (v in term and u in keys)
        )
        costs[(u, v)] = 0 if free else 1
    return costs


def greedy_steiner(graph: FdGraph, terminals: TerminalSet) -> SteinerResult:
    """Cheapest-frontier closure of the terminals over the weighted FD graph."""
    n = graph.num_nodes
    term_list = terminals.terminals
    for t in term_list:
        if t >= n:
            raise ValueError(f"terminal {t} outside graph with {n} nodes")
    term_set = set(term_list)
    costs = edge_costs(graph, terminals)

    adjacency: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for (u, v), w in costs.items():
        adjacency[u].append((v, w))
        adjacency[v].append((u, w))
    for rows in adjacency:
        rows.sort()

    # multi-source 0/1 BFS: nearest-terminal distance, owner, and parent chain
    inf = float("inf")
    dist = [inf] * n
    owner = [-1] * n
    parent = [-1] * n
    queue: deque[int] = deque()
    for t in term_list:
        dist[t] = 0
        owner[t] = t
        queue.appendleft(t)
    settled = [False] * n
    while queue:
        u = queue.popleft()
        if settled[u]:
            continue
        settled[u] = True
        for v, w in adjacency[u]:
            nd = dist[u] + w
            if nd < dist[v]:
                dist[v] = nd
                owner[v] = owner[u]
                parent[v] = u
                if w == 0:
                    queue.appendleft(v)
                else:
                    queue.append(v)

    # boundary candidates between different terminal regions
    candidates = []
    for (u, v), w in costs.items():
        if owner[u] == -1 or owner[v] == -1 or owner[u] == owner[v]:
            continue
        total = dist[u] + w + dist[v]
        flag = 0 if (u in term_set and v in term_set) else 1
        candidates.append((total, flag, u, v))
    candidates.sort()

    uf_parent = {t: t for t in term_list}

    def find(x: int) -> int:
        while uf_parent[x] != x:
            uf_parent[x] = uf_parent[uf_parent[x]]
            x = uf_parent[x]
        return x

    edges: set[tuple[int, int]] = set()

    def add_edge(a: int, b: int) -> None:
        edges.add((min(a, b), max(a, b)))

    def add_chain(x: int) -> None:
        while parent[x] != -1:
            add_edge(x, parent[x])
            x = parent[x]

    for _, _, u, v in candidates:
        ru, rv = find(owner[u]), find(owner[v])
        if ru == rv:
            continue
        uf_parent[ru] = rv
        add_chain(u)
        add_chain(v)
        add_edge(u, v)

    # prune non-terminal leaves left over from shared path segments
    degree: dict[int, int] = {}
    incident: dict[int, set[tuple[int, int]]] = {}
    for e in edges:
        for endpoint in e:
            degree[endpoint] = degree.get(endpoint, 0) + 1
            incident.setdefault(endpoint, set()).add(e)
    trim = deque(x for x in degree if degree[x] <= 1 and x not in term_set)
    while trim:
        x = trim.popleft()
        if degree.get(x, 0) > 1 or x in term_set:
            continue
        for e in list(incident.get(x, ())):
            if e not in edges:
                continue
            edges.remove(e)
            for endpoint in e:
                degree[endpoint] -= 1
                incident[endpoint].discard(e)
                if degree[endpoint] <= 1 and endpoint not in term_set:
                    trim.append(endpoint)

    nodes = set(term_list)
    for u, v in edges:
        nodes.add(u)
        nodes.add(v)
    total_cost = sum(costs[e] for e in edges)
    return SteinerResult(
        terminals=term_list,
        nodes=frozenset(nodes),
        edges=frozenset(edges),
        total_cost=int(total_cost),
    )


@dataclass(frozen=True)
class ClosureSelection:
    """Final filtered column set: terminals plus re-inserted join keys."""

    terminals: tuple[int, ...]  # score order
    aux: tuple[int, ...]  # ascending node order
    steiner: SteinerResult

    @property
    def selected(self) -> tuple[int, ...]:
        return self.terminals + self.aux

    def kind_of(self, node: int) -> str:
        return "terminal" if node in self.terminals else "auxiliary"


def closure(scores: ScoreTable | np.ndarray, graph: FdGraph, m: int) -> ClosureSelection:
    """Top-m terminals by score (stable ties) closed under greedy Steiner."""
    if m < 1:
        raise ValueError("m must be >= 1")
    values = scores.values if isinstance(scores, ScoreTable) else np.asarray(scores, dtype=np.float64)
    if values.shape[0] != graph.num_nodes:
        raise ValueError("score vector length does not match the graph")
    order = np.argsort(-values, kind="stable")
    terminals = tuple(int(i) for i in order[: min(m, graph.num_nodes)])
    result = greedy_steiner(graph, TerminalSet(terminals))
    aux = tuple(sorted(result.aux))
    return ClosureSelection(terminals=terminals, aux=aux, steiner=result)
