"""Logical-form and execution accuracy, per-sub-module accuracy, and the
confidence precision-recall sweep with trapezoid AUC.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import IO, Sequence

from .data import Example, SqlSketch, Table, cond_multiset, sketch_equal
from .executor import execute, results_equal
from .nl2sql import ScoredSketch

SUBMODULES = ("s_col", "s_agg", "w_num", "w_col", "w_op", "w_val")


@dataclass
class EvalReport:
    lf_accuracy: float
    x_accuracy: float
    submodules: dict[str, float]
    counts: dict[str, int]
    pr_curve: list[tuple[float, float, float]]  # (threshold, precision, recall)
    auc: float

    def to_dict(self) -> dict:
        return {
            "lf_accuracy": self.lf_accuracy,
            "x_accuracy": self.x_accuracy,
            "submodules": dict(self.submodules),
            "counts": dict(self.counts),
            "pr_curve": [list(p) for p in self.pr_curve],
            "auc": self.auc,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def write_pr_csv(self, stream: IO[str]) -> None:
        writer = csv.writer(stream)
        writer.writerow(["threshold", "precision", "recall"])
        for t, p, r in self.pr_curve:
            writer.writerow([t, p, r])


def _submodule_hits(pred: SqlSketch, gold: SqlSketch) -> dict[str, bool]:
    return {
        "s_col": pred.sel == gold.sel,
        "s_agg": pred.agg == gold.agg,
        "w_num": len(pred.conds) == len(gold.conds),
        "w_col": sorted(c.column for c in pred.conds)
        == sorted(c.column for c in gold.conds),
        "w_op": sorted((c.column, int(c.op)) for c in pred.conds)
        == sorted((c.column, int(c.op)) for c in gold.conds),
        "w_val": cond_multiset(pred.conds) == cond_multiset(gold.conds),
    }


def pr_sweep(
    confidences: Sequence[float], correctness: Sequence[bool]
) -> tuple[list[tuple[float, float, float]], float]:
    """Selective-prediction sweep: at each distinct confidence threshold,
    precision over answered examples and recall = answered fraction.
    AUC is the trapezoid integral of precision over recall, anchored at
    recall 0 with the highest-threshold precision.
    """
    if len(confidences) != len(correctness):
        raise ValueError("confidences and correctness must align")
    if not confidences:
        return [], 0.0
    curve = []
    for t in sorted(set(confidences), reverse=True):
        answered = [ok for conf, ok in zip(confidences, correctness) if conf >= t]
        precision = sum(answered) / len(answered) if answered else 1.0
        recall = len(answered) / len(confidences)
        curve.append((float(t), precision, recall))
    points = sorted((r, p) for _, p, r in curve)
    points.insert(0, (0.0, curve[0][1]))
    auc = sum(
        (r1 - r0) * (p0 + p1) / 2 for (r0, p0), (r1, p1) in zip(points, points[1:])
    )
    return curve, auc


def evaluate(
    preds: Sequence[ScoredSketch],
    golds: Sequence[Example],
    tables: dict[str, Table],
) -> EvalReport:
    """Score aligned predictions: exact sketch match (condition order
    ignored), execution-result match, and the six sub-module breakdowns.
    The PR curve uses exact-match correctness against the confidence
    (joint probability) of each prediction."""
    if len(preds) != len(golds):
        raise ValueError(f"{len(preds)} predictions for {len(golds)} gold examples")
    n = len(preds)
    lf_hits = 0
    x_hits = 0
    sub_hits = {k: 0 for k in SUBMODULES}
    lf_flags = []
    for pred, gold in zip(preds, golds):
        table = tables[gold.table_id]
        lf = sketch_equal(pred.sketch, gold.gold)
        lf_hits += lf
        lf_flags.append(lf)
        if results_equal(execute(pred.sketch, table), execute(gold.gold, table)):
            x_hits += 1
        for key, hit in _submodule_hits(pred.sketch, gold.gold).items():
            sub_hits[key] += hit
    curve, auc = pr_sweep([p.confidence for p in preds], lf_flags)
    return EvalReport(
        lf_accuracy=lf_hits / n if n else 0.0,
        x_accuracy=x_hits / n if n else 0.0,
        submodules={k: (v / n if n else 0.0) for k, v in sub_hits.items()},
        counts={"total": n, "lf_correct": lf_hits, "x_correct": x_hits},
        pr_curve=curve,
        auc=auc,
    )
