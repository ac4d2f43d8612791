"""Ranking and selection metrics: ROC/PR AUC, high-recall operating points,
threshold sweeps, and per-k curves with and without Steiner closure.

Selection at threshold t means score >= t. Macro metrics average per-example
values; the report-level AUCs pool every example's (score, label) vector.
Empty-selection precision is 1.0 only when nothing relevant is demanded (a
recall floor of 0); anywhere positives are demanded it is 0.0. F1 is 0 when
precision and recall are both 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateLabelsError
from .fdgraph import FdGraph
from .steiner import TerminalSet, greedy_steiner


def _validate(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be equal-length 1-d arrays")
    n_pos = int(labels.sum())
    if n_pos == 0 or n_pos == labels.size:
        raise DegenerateLabelsError(
            f"need at least one positive and one negative label (got {n_pos}/{labels.size})"
        )
    return scores, labels


def roc_auc(scores, labels) -> float:
    """Trapezoidal ROC AUC with tie groups, equal to P(s+ > s-) + 0.5 P(s+ = s-)."""
    scores, labels = _validate(scores, labels)
    order = np.argsort(-scores, kind="stable")
    s, y = scores[order], labels[order]
    n_pos = int(y.sum())
    n_neg = y.size - n_pos

    tps = [0.0]
    fps = [0.0]
    i = 0
    while i < y.size:
        j = i
        while j < y.size and s[j] == s[i]:
            j += 1
        tps.append(tps[-1] + float(y[i:j].sum()))
        fps.append(fps[-1] + float((j - i) - y[i:j].sum()))
        i = j
    tpr = np.asarray(tps) / n_pos
    fpr = np.asarray(fps) / n_neg
    return float(np.trapz(tpr, fpr))


def pr_auc(scores, labels) -> float:
    """Step-wise PR AUC over descending-score thresholds (average precision)."""
    scores, labels = _validate(scores, labels)
    order = np.argsort(-scores, kind="stable")
    s, y = scores[order], labels[order]
    n_pos = int(y.sum())

    area = 0.0
    prev_recall = 0.0
    tp = 0
    seen = 0
    i = 0
    while i < y.size:
        j = i
        while j < y.size and s[j] == s[i]:
            j += 1
        tp += int(y[i:j].sum())
        seen += j - i
        recall = tp / n_pos
        precision = tp / seen
        area += (recall - prev_recall) * precision
        prev_recall = recall
        i = j
    return float(area)


@dataclass(frozen=True)
class OperatingPoint:
    threshold: float
    precision: float
    recall: float


def precision_at_high_recall(scores, labels, recall_floor: float = 0.99) -> OperatingPoint:
    """Smallest selection (largest threshold) whose recall reaches the floor.

    A floor of 0 is satisfied by the empty selection above the max score
    (precision 1.0 by the documented boundary convention). An unreachable
    floor (> 1) falls back to the all-selected point.
    """
    scores, labels = _validate(scores, labels)
    if recall_floor <= 0.0:
        return OperatingPoint(threshold=float(scores.max()) + 1.0, precision=1.0, recall=0.0)
    order = np.argsort(-scores, kind="stable")
    s, y = scores[order], labels[order]
    n_pos = int(y.sum())
    tp = 0
    seen = 0
    i = 0
    while i < y.size:
        j = i
        while j < y.size and s[j] == s[i]:
            j += 1
        tp += int(y[i:j].sum())
        seen += j - i
        recall = tp / n_pos
        if recall >= recall_floor:
            return OperatingPoint(threshold=float(s[i]), precision=tp / seen, recall=recall)
        i = j
    # floor > 1: report the all-selected point
    return OperatingPoint(threshold=float(s[-1]), precision=n_pos / y.size, recall=1.0)


# ---------------------------------------------------------------------------
# per-example selection metrics


def selection_prf(
    selected: set[int], positives: set[int], demanded: bool = True
) -> tuple[float, float, float]:
    """Precision/recall/F1 of a selected index set against the positives."""
    if not selected:
        precision = 0.0 if demanded and positives else 1.0
        recall = 0.0 if positives else 1.0
    else:
        hit = len(selected & positives)
        precision = hit / len(selected)
        recall = hit / len(positives) if positives else 1.0
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return precision, recall, f1


@dataclass(frozen=True)
class EvalExample:
    """Scored question ready for metric aggregation."""

    scores: np.ndarray  # (n,)
    labels: np.ndarray  # (n,) bool
    graph: FdGraph | None = None  # enables the Steiner-closed variant


@dataclass
class EvalReport:
    roc_auc: float
    pr_auc: float
    operating_point: OperatingPoint
    thresholds: np.ndarray
    macro_raw: np.ndarray  # (T, 3) precision, recall, f1
    macro_steiner: np.ndarray  # (T, 3)
    ks: np.ndarray
    topk_raw: np.ndarray  # (K, 2) recall, precision
    topk_steiner: np.ndarray  # (K, 2)
    per_example: list[dict] = field(default_factory=list)

    def curves_csv(self) -> str:
        lines = ["threshold,precision,recall,f1,steiner_precision,steiner_recall,steiner_f1"]
        for t, raw, st in zip(self.thresholds, self.macro_raw, self.macro_steiner):
            lines.append(
                f"{t:.10g},{raw[0]:.10g},{raw[1]:.10g},{raw[2]:.10g},"
                f"{st[0]:.10g},{st[1]:.10g},{st[2]:.10g}"
            )
        return "\n".join(lines) + "\n"

    def topk_csv(self) -> str:
        lines = ["k,recall,precision,steiner_recall,steiner_precision"]
        for k, raw, st in zip(self.ks, self.topk_raw, self.topk_steiner):
            lines.append(f"{k},{raw[0]:.10g},{raw[1]:.10g},{st[0]:.10g},{st[1]:.10g}")
        return "\n".join(lines) + "\n"


def _closed_selection(example: EvalExample, selected: list[int]) -> set[int]:
    if not selected or example.graph is None:
        return set(selected)
    result = greedy_steiner(example.graph, TerminalSet(tuple(selected)))
    return set(result.nodes)


def sweep_metrics(
    examples: Sequence[EvalExample],
    thresholds: Sequence[float] | None = None,
    ks: Sequence[int] = tuple(range(2, 21)),
    recall_floor: float = 0.99,
) -> EvalReport:
    """Macro P/R/F1 across a threshold grid and top-k curves, raw vs closed."""
    if not examples:
        raise ValueError("need at least one evaluation example")

    pooled_scores = np.concatenate([e.scores for e in examples])
    pooled_labels = np.concatenate([e.labels for e in examples])

    if thresholds is None:
        lo, hi = float(pooled_scores.min()), float(pooled_scores.max())
        thresholds = np.linspace(lo, hi, num=51) if hi > lo else np.asarray([lo])
    thresholds = np.asarray(sorted(thresholds), dtype=np.float64)

    macro_raw = np.zeros((len(thresholds), 3))
    macro_steiner = np.zeros((len(thresholds), 3))
    for ti, threshold in enumerate(thresholds):
        rows_raw, rows_st = [], []
        for example in examples:
            positives = set(np.flatnonzero(example.labels).tolist())
            order = np.argsort(-example.scores, kind="stable")
            chosen = [int(i) for i in order if example.scores[i] >= threshold]
            rows_raw.append(selection_prf(set(chosen), positives))
            rows_st.append(selection_prf(_closed_selection(example, chosen), positives))
        macro_raw[ti] = np.mean(rows_raw, axis=0)
        macro_steiner[ti] = np.mean(rows_st, axis=0)

    ks = np.asarray(sorted(ks), dtype=np.int64)
    topk_raw = np.zeros((len(ks), 2))
    topk_steiner = np.zeros((len(ks), 2))
    for ki, k in enumerate(ks):
        rows_raw, rows_st = [], []
        for example in examples:
            positives = set(np.flatnonzero(example.labels).tolist())
            order = np.argsort(-example.scores, kind="stable")
            chosen = [int(i) for i in order[: min(int(k), order.size)]]
            p, r, _ = selection_prf(set(chosen), positives)
            rows_raw.append((r, p))
            p, r, _ = selection_prf(_closed_selection(example, chosen), positives)
            rows_st.append((r, p))
        topk_raw[ki] = np.mean(rows_raw, axis=0)
        topk_steiner[ki] = np.mean(rows_st, axis=0)

    per_example = []
    for i, example in enumerate(examples):
        entry = {"example": i, "positives": int(example.labels.sum()), "columns": int(example.labels.size)}
        try:
            entry["roc_auc"] = roc_auc(example.scores, example.labels)
            entry["pr_auc"] = pr_auc(example.scores, example.labels)
        except DegenerateLabelsError:
            pass
        per_example.append(entry)

    return EvalReport(
        roc_auc=roc_auc(pooled_scores, pooled_labels),
        pr_auc=pr_auc(pooled_scores, pooled_labels),
        operating_point=precision_at_high_recall(pooled_scores, pooled_labels, recall_floor),
        thresholds=thresholds,
        macro_raw=macro_raw,
        macro_steiner=macro_steiner,
        ks=ks,
        topk_raw=topk_raw,
        topk_steiner=topk_steiner,
        per_example=per_example,
    )
