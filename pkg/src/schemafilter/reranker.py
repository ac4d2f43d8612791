"""Relation-aware graph transformer over the FD graph.

Forward refinement: per layer, every node keeps a self term and attends to
its in-neighbours with relation-specific message and attention projections,

    h_v <- W_self h_v + sum_{(u,v,r)} alpha_r(u,v) W_r h_u,

where the attention logits are scaled dot products (Q_r h_v . K_r h_u /
sqrt(d_k)) normalized jointly over all incoming edges of v across relations.
A linear head maps the final embedding to a relevance score. Training
minimizes a margin hinge over (positive, negative) column pairs with plain
seeded SGD; gradients are analytic (hand-derived, finite-difference checked).

Parameters are float32 in memory (matching the weights file); all math runs
in float64 internally.
"""

from __future__ import annotations

import logging
import math
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .container import atomic_write
from .errors import (
    CorruptionError,
    DimensionMismatchError,
    DivergenceError,
    FormatVersionError,
    NumericsError,
)
from .fdgraph import EdgeType, FdGraph
from .schema import ColumnRef

log = logging.getLogger(__name__)

N_RELATIONS = len(EdgeType)
WEIGHTS_MAGIC = b"SFRW"
WEIGHTS_VERSION = 1


# ---------------------------------------------------------------------------
# parameters


@dataclass
class RerankerParams:
    """All trainable tensors; matrices are (d_in, d_out), applied as H @ W."""

    layers: int
    hidden_dim: int
    attn_dim: int
    provider_dim: int
    input_proj: np.ndarray  # (p, d)
    w_self: list[np.ndarray]  # per layer (d, d)
    w_rel: list[list[np.ndarray]]  # [layer][relation] (d, d)
    w_attn_q: list[list[np.ndarray]]  # [layer][relation] (d, d_k)
    w_attn_k: list[list[np.ndarray]]  # [layer][relation] (d, d_k)
    head_w: np.ndarray  # (d,)
    head_b: np.ndarray  # (1,)

    def validate(self) -> None:
        p, d, dk, L = self.provider_dim, self.hidden_dim, self.attn_dim, self.layers
        if self.input_proj.shape != (p, d):
            raise DimensionMismatchError("input projection shape mismatch")
        if not (len(self.w_self) == len(self.w_rel) == len(self.w_attn_q) == len(self.w_attn_k) == L):
            raise DimensionMismatchError("per-layer tensor lists do not match layer count")
        for layer in range(L):
            if self.w_self[layer].shape != (d, d):
                raise DimensionMismatchError(f"w_self[{layer}] shape mismatch")
            for group, shape in (
                (self.w_rel[layer], (d, d)),
                (self.w_attn_q[layer], (d, dk)),
                (self.w_attn_k[layer], (d, dk)),
            ):
                if len(group) != N_RELATIONS:
                    raise DimensionMismatchError("relation tensor count must equal the edge-type count")
                for mat in group:
                    if mat.shape != shape:
                        raise DimensionMismatchError(f"relation tensor shape {mat.shape} != {shape}")
        if self.head_w.shape != (d,) or self.head_b.shape != (1,):
            raise DimensionMismatchError("scoring head shape mismatch")
        for tensor in self.tensors():
            if not np.isfinite(tensor).all():
                raise NumericsError("parameters contain non-finite values")

    def tensors(self) -> list[np.ndarray]:
        """All tensors in the canonical (persistence) order."""
        out = [self.input_proj]
        for layer in range(self.layers):
            out.append(self.w_self[layer])
            for rel in range(N_RELATIONS):
                out.append(self.w_rel[layer][rel])
                out.append(self.w_attn_q[layer][rel])
                out.append(self.w_attn_k[layer][rel])
        out.append(self.head_w)
        out.append(self.head_b)
        return out

    def copy(self) -> "RerankerParams":
        return RerankerParams(
            layers=self.layers,
            hidden_dim=self.hidden_dim,
            attn_dim=self.attn_dim,
            provider_dim=self.provider_dim,
            input_proj=self.input_proj.copy(),
            w_self=[m.copy() for m in self.w_self],
            w_rel=[[m.copy() for m in group] for group in self.w_rel],
            w_attn_q=[[m.copy() for m in group] for group in self.w_attn_q],
            w_attn_k=[[m.copy() for m in group] for group in self.w_attn_k],
            head_w=self.head_w.copy(),
            head_b=self.head_b.copy(),
        )


def init_params(
    layers: int,
    hidden_dim: int,
    provider_dim: int,
    attn_dim: int | None = None,
    seed: int | np.random.Generator = 0,
) -> RerankerParams:
    """Seed-controlled uniform(+-1/sqrt(fan_in)) init; identity input projection
    when provider and hidden dims already match."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    dk = attn_dim if attn_dim is not None else hidden_dim

    def uniform(shape: tuple[int, ...]) -> np.ndarray:
        bound = 1.0 / math.sqrt(shape[0])
        return rng.uniform(-bound, bound, size=shape).astype(np.float32)

    if provider_dim == hidden_dim:
        proj = np.eye(hidden_dim, dtype=np.float32)
    else:
        proj = uniform((provider_dim, hidden_dim))

    w_self, w_rel, w_q, w_k = [], [], [], []
    for _ in range(layers):
        w_self.append(uniform((hidden_dim, hidden_dim)))
        w_rel.append([uniform((hidden_dim, hidden_dim)) for _ in range(N_RELATIONS)])
        w_q.append([uniform((hidden_dim, dk)) for _ in range(N_RELATIONS)])
        w_k.append([uniform((hidden_dim, dk)) for _ in range(N_RELATIONS)])

    params = RerankerParams(
        layers=layers,
        hidden_dim=hidden_dim,
        attn_dim=dk,
        provider_dim=provider_dim,
        input_proj=proj,
        w_self=w_self,
        w_rel=w_rel,
        w_attn_q=w_q,
        w_attn_k=w_k,
        head_w=uniform((hidden_dim,)),
        head_b=np.zeros(1, dtype=np.float32),
    )
    params.validate()
    return params


# ---------------------------------------------------------------------------
# edge arrays


@dataclass(frozen=True)
class EdgeArrays:
    """Flat per-relation edge indexing precomputed once per graph."""

    num_nodes: int
    src: np.ndarray  # (E,) int64, grouped by relation in EdgeType order
    dst: np.ndarray  # (E,) int64
    rel_slices: tuple[tuple[int, slice], ...]  # (relation value, slice into src/dst)

    @classmethod
    def from_graph(cls, graph: FdGraph) -> "EdgeArrays":
        by_rel: dict[int, list[tuple[int, int]]] = {int(r): [] for r in EdgeType}
        for s, d, t in graph.edges:
            by_rel[int(t)].append((s, d))
        src_parts, dst_parts, slices = [], [], []
        offset = 0
        for rel in sorted(by_rel):
            pairs = by_rel[rel]
            if not pairs:
                continue
            slices.append((rel, slice(offset, offset + len(pairs))))
            src_parts.extend(p[0] for p in pairs)
            dst_parts.extend(p[1] for p in pairs)
            offset += len(pairs)
        return cls(
            num_nodes=graph.num_nodes,
            src=np.asarray(src_parts, dtype=np.int64),
            dst=np.asarray(dst_parts, dtype=np.int64),
            rel_slices=tuple(slices),
        )


def _as_arrays(graph: FdGraph | EdgeArrays) -> EdgeArrays:
    return graph if isinstance(graph, EdgeArrays) else EdgeArrays.from_graph(graph)


# ---------------------------------------------------------------------------
# forward / score


@dataclass
class _LayerCache:
    h_in: np.ndarray
    msg: np.ndarray | None
    alpha: np.ndarray | None
    adst: np.ndarray | None
    bsrc: np.ndarray | None


def _forward_impl(
    arrays: EdgeArrays, h0: np.ndarray, params: RerankerParams, keep_cache: bool
) -> tuple[np.ndarray, list[_LayerCache]]:
    n = arrays.num_nodes
    if h0.shape != (n, params.provider_dim):
        raise DimensionMismatchError(
            f"h0 has shape {h0.shape}, expected ({n}, {params.provider_dim})"
        )
    scale = 1.0 / math.sqrt(params.attn_dim)
    h = h0.astype(np.float64) @ params.input_proj.astype(np.float64)
    caches: list[_LayerCache] = []
    src, dst = arrays.src, arrays.dst
    n_edges = src.shape[0]

    for layer in range(params.layers):
        h_next = h @ params.w_self[layer].astype(np.float64)
        msg = alpha = adst = bsrc = None
        if n_edges:
            d, dk = params.hidden_dim, params.attn_dim
            msg = np.empty((n_edges, d))
            adst = np.empty((n_edges, dk))
            bsrc = np.empty((n_edges, dk))
            for rel, sl in arrays.rel_slices:
                w_r = params.w_rel[layer][rel].astype(np.float64)
                q_r = params.w_attn_q[layer][rel].astype(np.float64)
                k_r = params.w_attn_k[layer][rel].astype(np.float64)
                h_src = h[src[sl]]
                msg[sl] = h_src @ w_r
                adst[sl] = h[dst[sl]] @ q_r
                bsrc[sl] = h_src @ k_r
            logits = np.einsum("ek,ek->e", adst, bsrc) * scale
            peak = np.full(n, -np.inf)
            np.maximum.at(peak, dst, logits)
            expd = np.exp(logits - peak[dst])
            denom = np.zeros(n)
            np.add.at(denom, dst, expd)
            alpha = expd / denom[dst]
            agg = np.zeros((n, params.hidden_dim))
            np.add.at(agg, dst, alpha[:, None] * msg)
            h_next = h_next + agg
        if not np.isfinite(h_next).all():
            raise NumericsError(f"non-finite node states after layer {layer + 1}")
        caches.append(_LayerCache(h_in=h, msg=msg, alpha=alpha, adst=adst, bsrc=bsrc))
        h = h_next
    if not keep_cache:
        caches = []
    return h, caches


def forward(graph: FdGraph | EdgeArrays, h0: np.ndarray, params: RerankerParams) -> np.ndarray:
    """Refined node representations h^(L); L=0 returns the projected inputs."""
    refined, _ = _forward_impl(_as_arrays(graph), np.asarray(h0, dtype=np.float64), params, keep_cache=False)
    return refined


@dataclass(frozen=True)
class ScoreTable:
    """Relevance score per graph node / column."""

    columns: tuple[ColumnRef, ...]
    values: np.ndarray  # (n,) float64

    def __post_init__(self):
        if len(self.columns) != self.values.shape[0]:
            raise DimensionMismatchError("score table columns and values disagree")
        if not np.isfinite(self.values).all():
            raise NumericsError("score table contains non-finite scores")

    def score_of(self, ref: ColumnRef) -> float:
        return float(self.values[self.columns.index(ref)])

    def as_dict(self) -> dict[ColumnRef, float]:
        return {ref: float(v) for ref, v in zip(self.columns, self.values)}

    def top(self, m: int) -> np.ndarray:
        """Indices of the m best scores, ties broken by stable node order."""
        order = np.argsort(-self.values, kind="stable")
        return order[: max(0, m)]


def score(h_final: np.ndarray, params: RerankerParams) -> np.ndarray:
    """Linear head: r(v, q) = w^T h_v + b for every node."""
    return h_final @ params.head_w.astype(np.float64) + float(params.head_b[0])


def score_columns(
    graph: FdGraph, h0: np.ndarray, params: RerankerParams, arrays: EdgeArrays | None = None
) -> ScoreTable:
    refined = forward(arrays if arrays is not None else graph, h0, params)
    return ScoreTable(columns=graph.nodes, values=score(refined, params))


# ---------------------------------------------------------------------------
# losses


def _score_array(scores) -> np.ndarray:
    if isinstance(scores, ScoreTable):
        return scores.values
    return np.asarray(scores, dtype=np.float64)


def _index_array(scores, items) -> np.ndarray:
    if isinstance(scores, ScoreTable) and items and isinstance(next(iter(items)), ColumnRef):
        lookup = {ref: i for i, ref in enumerate(scores.columns)}
        return np.asarray(sorted(lookup[ref] for ref in items), dtype=np.int64)
    return np.asarray(sorted(int(i) for i in items), dtype=np.int64)


def margin_loss(scores, positives, negatives, margin: float) -> float:
    """Sum of hinge terms max(0, margin - s+ + s-) over all given (c+, c-) pairs.

    Zero exactly when every positive outscores every negative by >= margin.
    """
    if margin <= 0:
        raise ValueError("margin must be positive")
    values = _score_array(scores)
    pos = _index_array(scores, positives)
    neg = _index_array(scores, negatives)
    if pos.size == 0 or neg.size == 0:
        raise ValueError("margin loss needs non-empty positive and negative sets")
    if np.intersect1d(pos, neg).size:
        raise ValueError("positives and negatives overlap")
    diffs = margin - values[pos][:, None] + values[neg][None, :]
    return float(np.maximum(diffs, 0.0).sum())


def infonce_loss(pos_score: float, neg_scores: Sequence[float]) -> float:
    """Group-wise InfoNCE: -log softmax of the positive over {positive} u negatives.

    Computed with max-subtraction for stability.
    """
    negs = np.asarray(list(neg_scores), dtype=np.float64)
    if negs.size == 0:
        raise ValueError("InfoNCE needs at least one negative")
    group = np.concatenate(([float(pos_score)], negs))
    peak = float(group.max())
    return float(-(float(pos_score) - peak) + math.log(np.exp(group - peak).sum()))


# ---------------------------------------------------------------------------
# gradients


@dataclass
class Gradients:
    """dLoss/dParam for every tensor, float64, same layout as RerankerParams."""

    input_proj: np.ndarray
    w_self: list[np.ndarray]
    w_rel: list[list[np.ndarray]]
    w_attn_q: list[list[np.ndarray]]
    w_attn_k: list[list[np.ndarray]]
    head_w: np.ndarray
    head_b: np.ndarray

    @classmethod
    def zeros_like(cls, params: RerankerParams) -> "Gradients":
        return cls(
            input_proj=np.zeros_like(params.input_proj, dtype=np.float64),
            w_self=[np.zeros_like(m, dtype=np.float64) for m in params.w_self],
            w_rel=[[np.zeros_like(m, dtype=np.float64) for m in g] for g in params.w_rel],
            w_attn_q=[[np.zeros_like(m, dtype=np.float64) for m in g] for g in params.w_attn_q],
            w_attn_k=[[np.zeros_like(m, dtype=np.float64) for m in g] for g in params.w_attn_k],
            head_w=np.zeros_like(params.head_w, dtype=np.float64),
            head_b=np.zeros_like(params.head_b, dtype=np.float64),
        )

    def tensors(self) -> list[np.ndarray]:
        out = [self.input_proj]
        for layer in range(len(self.w_self)):
            out.append(self.w_self[layer])
            for rel in range(N_RELATIONS):
                out.append(self.w_rel[layer][rel])
                out.append(self.w_attn_q[layer][rel])
                out.append(self.w_attn_k[layer][rel])
        out.append(self.head_w)
        out.append(self.head_b)
        return out

    def add_(self, other: "Gradients") -> None:
        for mine, theirs in zip(self.tensors(), other.tensors()):
            mine += theirs

    def scale_(self, factor: float) -> None:
        for tensor in self.tensors():
            tensor *= factor


def _pair_margin_grad(
    params: RerankerParams,
    arrays: EdgeArrays,
    h0: np.ndarray,
    pos_pairs: np.ndarray,
    neg_pairs: np.ndarray,
    margin: float,
) -> tuple[float, Gradients]:
    """Loss and analytic gradients for explicit (positive, negative) index pairs."""
    h0 = np.asarray(h0, dtype=np.float64)
    h_final, caches = _forward_impl(arrays, h0, params, keep_cache=True)
    values = score(h_final, params)

    diffs = margin - values[pos_pairs] + values[neg_pairs]
    active = diffs > 0.0
    loss = float(diffs[active].sum())

    grads = Gradients.zeros_like(params)
    n = arrays.num_nodes
    d_scores = np.zeros(n)
    np.add.at(d_scores, pos_pairs[active], -1.0)
    np.add.at(d_scores, neg_pairs[active], 1.0)

    w64 = params.head_w.astype(np.float64)
    grads.head_w += h_final.T @ d_scores
    grads.head_b += d_scores.sum()
    g = d_scores[:, None] * w64[None, :]

    scale = 1.0 / math.sqrt(params.attn_dim)
    src, dst = arrays.src, arrays.dst
    for layer in range(params.layers - 1, -1, -1):
        cache = caches[layer]
        h_in = cache.h_in
        grads.w_self[layer] += h_in.T @ g
        g_prev = g @ params.w_self[layer].astype(np.float64).T
        if cache.msg is not None:
            msg, alpha, adst, bsrc = cache.msg, cache.alpha, cache.adst, cache.bsrc
            g_dst = g[dst]
            d_alpha = np.einsum("ed,ed->e", g_dst, msg)
            d_msg = alpha[:, None] * g_dst
            weighted = alpha * d_alpha
            seg = np.zeros(n)
            np.add.at(seg, dst, weighted)
            d_logits = weighted - alpha * seg[dst]
            d_adst = d_logits[:, None] * bsrc * scale
            d_bsrc = d_logits[:, None] * adst * scale
            for rel, sl in arrays.rel_slices:
                s_idx, d_idx = src[sl], dst[sl]
                h_src, h_dst = h_in[s_idx], h_in[d_idx]
                grads.w_rel[layer][rel] += h_src.T @ d_msg[sl]
                np.add.at(g_prev, s_idx, d_msg[sl] @ params.w_rel[layer][rel].astype(np.float64).T)
                grads.w_attn_q[layer][rel] += h_dst.T @ d_adst[sl]
                np.add.at(g_prev, d_idx, d_adst[sl] @ params.w_attn_q[layer][rel].astype(np.float64).T)
                grads.w_attn_k[layer][rel] += h_src.T @ d_bsrc[sl]
                np.add.at(g_prev, s_idx, d_bsrc[sl] @ params.w_attn_k[layer][rel].astype(np.float64).T)
        g = g_prev
    grads.input_proj += h0.T @ g

    for tensor in grads.tensors():
        if not np.isfinite(tensor).all():
            raise NumericsError("non-finite gradient encountered")
    return loss, grads


def _cross_pairs(positives: np.ndarray, negatives: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pos = np.repeat(positives, len(negatives))
    neg = np.tile(negatives, len(positives))
    return pos, neg


@dataclass(frozen=True)
class TrainingInstance:
    """One question's graph, initial embeddings, and label split."""

    graph: FdGraph | EdgeArrays
    h0: np.ndarray
    positives: np.ndarray
    negatives: np.ndarray

    def arrays(self) -> EdgeArrays:
        return _as_arrays(self.graph)


def grad(
    params: RerankerParams,
    batch: Sequence[TrainingInstance],
    margin: float,
) -> tuple[float, Gradients]:
    """Analytic gradients of the summed margin loss over a batch.

    Pairs are the full positives x negatives cross product per instance;
    gradients are exactly zero wherever the hinge is inactive.
    """
    total = Gradients.zeros_like(params)
    loss = 0.0
    for item in batch:
        pos, neg = _cross_pairs(item.positives, item.negatives)
        item_loss, item_grads = _pair_margin_grad(
            params, item.arrays(), item.h0, pos, neg, margin
        )
        loss += item_loss
        total.add_(item_grads)
    return loss, total


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainingConfig:
    layers: int = 3
    hidden_dim: int = 256
    attn_dim: int | None = None  # d_k; defaults to hidden_dim
    margin: float = 1.0
    learning_rate: float = 5e-5
    epochs: int = 40
    batch_size: int = 32
    negatives_per_positive: int = 7
    seed: int = 0

    def __post_init__(self):
        if self.margin <= 0:
            raise ValueError("margin must be > 0")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1 or self.negatives_per_positive < 1:
            raise ValueError("batch_size and negatives_per_positive must be >= 1")
        if self.layers < 0 or self.hidden_dim < 1:
            raise ValueError("layers must be >= 0 and hidden_dim >= 1")


@dataclass(frozen=True)
class StepRecord:
    epoch: int
    step: int
    loss: float


def train(
    dataset: Sequence[TrainingInstance],
    config: TrainingConfig,
    params: RerankerParams | None = None,
) -> tuple[RerankerParams, list[StepRecord]]:
    """Seeded SGD over the margin objective; deterministic for a fixed seed.

    Per visit each positive is paired with min(negatives_per_positive, |C-|)
    sampled negatives. Gradients are averaged over the batch. Aborts with
    DivergenceError when a batch loss exceeds 10x the first batch's loss.
    """
    if not dataset:
        raise ValueError("training dataset is empty")
    rng = np.random.default_rng(config.seed)
    provider_dim = dataset[0].h0.shape[1]
    if params is None:
        params = init_params(
            layers=config.layers,
            hidden_dim=config.hidden_dim,
            provider_dim=provider_dim,
            attn_dim=config.attn_dim,
            seed=rng,
        )
    else:
        params = params.copy()

    arrays_cache: dict[int, EdgeArrays] = {}

    def arrays_for(item: TrainingInstance) -> EdgeArrays:
        key = id(item.graph)
        if key not in arrays_cache:
            arrays_cache[key] = item.arrays()
        return arrays_cache[key]

    trace: list[StepRecord] = []
    initial_loss: float | None = None
    step = 0
    for epoch in range(config.epochs):
        order = rng.permutation(len(dataset))
        for start in range(0, len(order), config.batch_size):
            batch_idx = order[start : start + config.batch_size]
            batch_grads = Gradients.zeros_like(params)
            batch_loss = 0.0
            for di in batch_idx:
                item = dataset[int(di)]
                pos_pairs: list[np.ndarray] = []
                neg_pairs: list[np.ndarray] = []
                n_neg = min(config.negatives_per_positive, item.negatives.size)
                for p in item.positives:
                    sampled = rng.choice(item.negatives, size=n_neg, replace=False)
                    pos_pairs.append(np.full(n_neg, p, dtype=np.int64))
                    neg_pairs.append(np.sort(sampled.astype(np.int64)))
                loss, grads = _pair_margin_grad(
                    params,
                    arrays_for(item),
                    item.h0,
                    np.concatenate(pos_pairs),
                    np.concatenate(neg_pairs),
                    config.margin,
                )
                batch_loss += loss
                batch_grads.add_(grads)
            batch_loss /= len(batch_idx)
            batch_grads.scale_(1.0 / len(batch_idx))
            if initial_loss is None:
                initial_loss = batch_loss
            elif initial_loss > 0 and batch_loss > 10.0 * initial_loss:
                raise DivergenceError(
                    f"loss {batch_loss:.4g} exceeds 10x initial {initial_loss:.4g} "
                    f"at epoch {epoch + 1}, step {step}"
                )
            _apply_sgd(params, batch_grads, config.learning_rate)
            trace.append(StepRecord(epoch=epoch, step=step, loss=batch_loss))
            step += 1
        if trace:
            epoch_records = [r.loss for r in trace if r.epoch == epoch]
            log.info("epoch %d mean loss %.6f", epoch + 1, sum(epoch_records) / len(epoch_records))
    return params, trace


def _apply_sgd(params: RerankerParams, grads: Gradients, lr: float) -> None:
    for tensor, gradient in zip(params.tensors(), grads.tensors()):
        updated = tensor.astype(np.float64) - lr * gradient
        tensor[...] = updated.astype(np.float32)


# ---------------------------------------------------------------------------
# persistence (little-endian 32-bit floats, row-major, self-describing header)


def _relation_names() -> list[str]:
    return [e.name.lower() for e in EdgeType]


def serialize_params(params: RerankerParams) -> bytes:
    params.validate()
    out = bytearray()
    out += WEIGHTS_MAGIC
    out += struct.pack(
        "<HHIII",
        WEIGHTS_VERSION,
        params.layers,
        params.hidden_dim,
        params.attn_dim,
        params.provider_dim,
    )
    names = _relation_names()
    out += struct.pack("<H", len(names))
    for name in names:
        encoded = name.encode("utf-8")
        out += struct.pack("<H", len(encoded))
        out += encoded
    for tensor in params.tensors():
        out += np.ascontiguousarray(tensor, dtype="<f4").tobytes()
    out += struct.pack("<I", zlib.crc32(bytes(out)))
    return bytes(out)


def deserialize_params(data: bytes) -> RerankerParams:
    if len(data) < 24 or data[:4] != WEIGHTS_MAGIC:
        raise CorruptionError("not a reranker weights file")
    (stored_crc,) = struct.unpack("<I", data[-4:])
    if zlib.crc32(data[:-4]) != stored_crc:
        raise CorruptionError("weights file checksum mismatch (corrupt or truncated)")
    version, layers, d, dk, p = struct.unpack_from("<HHIII", data, 4)
    if version != WEIGHTS_VERSION:
        raise FormatVersionError(f"weights format version {version} (reader supports {WEIGHTS_VERSION})")
    offset = 4 + struct.calcsize("<HHIII")
    (n_names,) = struct.unpack_from("<H", data, offset)
    offset += 2
    names = []
    for _ in range(n_names):
        (length,) = struct.unpack_from("<H", data, offset)
        offset += 2
        names.append(data[offset : offset + length].decode("utf-8"))
        offset += length
    if names != _relation_names():
        raise FormatVersionError(f"relation list {names} does not match this build")

    def read(shape: tuple[int, ...]) -> np.ndarray:
        nonlocal offset
        count = int(np.prod(shape))
        end = offset + 4 * count
        if end > len(data) - 4:
            raise CorruptionError("weights file ends inside a tensor")
        arr = np.frombuffer(data, dtype="<f4", count=count, offset=offset)
        offset = end
        return arr.astype(np.float32).reshape(shape)

    input_proj = read((p, d))
    w_self, w_rel, w_q, w_k = [], [], [], []
    for _ in range(layers):
        w_self.append(read((d, d)))
        rels, qs, ks = [], [], []
        for _ in range(N_RELATIONS):
            rels.append(read((d, d)))
            qs.append(read((d, dk)))
            ks.append(read((d, dk)))
        w_rel.append(rels)
        w_q.append(qs)
        w_k.append(ks)
    head_w = read((d,))
    head_b = read((1,))
    if offset != len(data) - 4:
        raise CorruptionError("weights file has trailing bytes")
    params = RerankerParams(
        layers=layers,
        hidden_dim=d,
        attn_dim=dk,
        provider_dim=p,
        input_proj=input_proj,
        w_self=w_self,
        w_rel=w_rel,
        w_attn_q=w_q,
        w_attn_k=w_k,
        head_w=head_w,
        head_b=head_b,
    )
    params.validate()
    return params


def save_params(params: RerankerParams, path: str | Path) -> None:
    atomic_write(path, serialize_params(params))


def load_params(path: str | Path) -> RerankerParams:
    return deserialize_params(Path(path).read_bytes())
