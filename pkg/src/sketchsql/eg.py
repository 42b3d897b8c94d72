"""Execution-guided decoding: candidate (partial) queries that do not
execute, or execute to an empty result, are pruned, and the surviving
sketch with the highest joint probability is returned.

Select clause: (column, aggregation) pairs combining a text column with
MAX/MIN/SUM/AVG are dropped.  Where clause: every (column, op, value)
candidate is tested via the partial query  select agg(sel) where col op
value,  empty results are dropped, and the winning conjunction must also
execute to a non-empty result.  When everything is pruned the unguided
greedy output is used and the fallback is counted.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .data import AggOp, ColumnType, CondOp, Condition, SqlSketch, Table
from .executor import execute
from .nl2sql import (
    DecodeConfig,
    ModelOutput,
    ScoredSketch,
    clamped_log,
    decode_greedy,
    top_k_indices,
)
from .tokenizer import TokenizedText, span_to_text

NUMERIC_AGGS = frozenset({AggOp.MAX, AggOp.MIN, AggOp.SUM, AggOp.AVG})


@dataclass(frozen=True)
class EgConfig:
    """Beam widths for execution-guided decoding (all configurable)."""

    n_agg_pairs: int = 4
    n_wc: int = 6
    n_ops: int = 3
    n_spans: int = 2
    n_wn: int = 3

    def __post_init__(self):
        for name in ("n_agg_pairs", "n_wc", "n_ops", "n_spans", "n_wn"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")


@dataclass
class EgInfo:
    eg_used: bool = True
    select_fallback: bool = False
    where_fallback: bool = False

    @property
    def fallback(self) -> bool:
        return self.select_fallback or self.where_fallback


def _pair_beam(o: ModelOutput, cfg: EgConfig) -> list[tuple[int, AggOp, float]]:
    """Top (sel, agg) pairs by joint probability, greedy pair first."""
    joint = o.p_sc[:, None] * o.p_sa  # [N_h, 6]
    flat = top_k_indices(joint.ravel(), cfg.n_agg_pairs)
    n_aggs = len(AggOp)
    pairs = [(i // n_aggs, i % n_aggs) for i in flat]
    greedy = (int(np.argmax(o.p_sc)), int(np.argmax(o.p_sa[int(np.argmax(o.p_sc))])))
    if greedy in pairs:
        pairs.remove(greedy)
    pairs.insert(0, greedy)
    pairs = pairs[: cfg.n_agg_pairs]
    return [(s, AggOp(a), float(joint[s, a])) for s, a in pairs]


def eg_select(
    out: ModelOutput, table: Table, cfg: EgConfig = EgConfig()
) -> tuple[int, AggOp, dict[str, float], bool]:
    """Choose (sel, agg), pruning text columns paired with numeric
    aggregation; returns (sel, agg, log-prob parts, fallback flag)."""
    o = out.as_numpy()
    survivors = [
        (s, a, j)
        for s, a, j in _pair_beam(o, cfg)
        if not (table.column_type(s) is ColumnType.TEXT and a in NUMERIC_AGGS)
    ]
    fallback = not survivors
    if fallback:
        sel, agg = int(np.argmax(o.p_sc)), AggOp.NONE
    else:
        sel, agg, _ = max(survivors, key=lambda t: t[2])
    parts = {
        "sc": clamped_log(o.p_sc[sel]),
        "sa": clamped_log(o.p_sa[sel][int(agg)]),
    }
    return sel, agg, parts, fallback


@dataclass(frozen=True)
class _CondCandidate:
    cond: Condition
    log_prob: float


def _column_candidates(
    o: ModelOutput,
    col: int,
    tok: TokenizedText,
    question: str,
    cfg: EgConfig,
    decode_cfg: DecodeConfig,
) -> list[_CondCandidate]:
    """Scored (op, value-span) candidates for one where-column, best
    operators first."""
    candidates = []
    for op_idx in top_k_indices(o.p_wo[col], cfg.n_ops):
        op = CondOp(op_idx)
        ps = o.p_wv_start[col, op_idx]
        pe = o.p_wv_end[col, op_idx]
        spans = []
        L = len(ps)
        for s in range(L):
            for e in range(s, min(s + decode_cfg.max_span, L)):
                spans.append((float(ps[s]) * float(pe[e]), s, e))
        spans.sort(key=lambda t: (-t[0], t[1], t[2]))
        for _, s, e in spans[: cfg.n_spans]:
            value = span_to_text(question, tok, s, e)
            logp = (
                clamped_log(o.p_wc[col])
                + clamped_log(o.p_wo[col][op_idx])
                + clamped_log(ps[s])
                + clamped_log(pe[e])
            )
            candidates.append(_CondCandidate(Condition(col, op, value), logp))
    return candidates


def eg_where(
    out: ModelOutput,
    tok: TokenizedText,
    question: str,
    table: Table,
    partial: tuple[int, AggOp],
    cfg: EgConfig = EgConfig(),
    decode_cfg: DecodeConfig = DecodeConfig(),
) -> tuple[tuple[Condition, ...], dict[str, float], bool]:
    """Choose the where clause maximizing the joint probability of the
    where-number, where-column, where-operator and where-value outputs
    over executable candidates."""
    o = out.as_numpy()
    sel, agg = partial

    best_per_column: dict[int, _CondCandidate] = {}
    for col in top_k_indices(o.p_wc, min(cfg.n_wc, o.n_headers)):
        surviving = [
            c
            for c in _column_candidates(o, col, tok, question, cfg, decode_cfg)
            if not execute(SqlSketch(sel, agg, (c.cond,)), table).is_empty
        ]
        if surviving:
            best_per_column[col] = max(
                enumerate(surviving), key=lambda t: (t[1].log_prob, -t[0])
            )[1]

    best: tuple[float, tuple[Condition, ...], dict[str, float]] | None = None
    for k in top_k_indices(o.p_wn, cfg.n_wn):
        if k > len(best_per_column):
            continue
        for cols in itertools.combinations(sorted(best_per_column), k):
            chosen = [best_per_column[c] for c in cols]
            conds = tuple(c.cond for c in chosen)
            if execute(SqlSketch(sel, agg, conds), table).is_empty:
                continue
            score = clamped_log(o.p_wn[k]) + sum(c.log_prob for c in chosen)
            if best is None or score > best[0]:
                parts = {
                    "wn": clamped_log(o.p_wn[k]),
                    "wc": sum(clamped_log(o.p_wc[c.cond.column]) for c in chosen),
                    "wo": sum(
                        clamped_log(o.p_wo[c.cond.column][int(c.cond.op)])
                        for c in chosen
                    ),
                    "wv": sum(
                        c.log_prob
                        - clamped_log(o.p_wc[c.cond.column])
                        - clamped_log(o.p_wo[c.cond.column][int(c.cond.op)])
                        for c in chosen
                    ),
                }
                best = (score, conds, parts)
    if best is not None:
        return best[1], best[2], False

    greedy = decode_greedy(out, tok, question, table, decode_cfg)
    parts = {key: greedy.parts[key] for key in ("wn", "wc", "wo", "wv")}
    return greedy.sketch.conds, parts, True


def decode_eg(
    out: ModelOutput,
    tok: TokenizedText,
    question: str,
    table: Table,
    cfg: EgConfig = EgConfig(),
    decode_cfg: DecodeConfig = DecodeConfig(),
) -> tuple[ScoredSketch, EgInfo]:
    sel, agg, sel_parts, sel_fallback = eg_select(out, table, cfg)
    conds, where_parts, where_fallback = eg_where(
        out, tok, question, table, (sel, agg), cfg, decode_cfg
    )
    parts = dict(sel_parts)
    parts.update(where_parts)
    sketch = SqlSketch(sel=sel, agg=agg, conds=conds)
    info = EgInfo(
        eg_used=True, select_fallback=sel_fallback, where_fallback=where_fallback
    )
    return ScoredSketch(sketch, sum(parts.values()), parts), info
