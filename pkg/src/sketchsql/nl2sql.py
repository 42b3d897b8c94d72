"""The six-sub-module sketch decoder: select-column, select-aggregation,
where-number, where-column, where-operator and where-value, driven by a
shared pair of 2-layer bidirectional LSTMs (question encoder LSTM-q and
header encoder LSTM-h, 100 units per direction) over the table-aware
encoder output.  No affine transformation is shared between sub-modules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from .data import AggOp, CondOp, Condition, SqlSketch, Table
from .encoder import EncoderOutput
from .tokenizer import TokenizedText, span_to_text

LSTM_HIDDEN = 100
LOG_CLAMP = 1e-12


def clamped_log(p: float) -> float:
    return math.log(max(float(p), LOG_CLAMP))


@dataclass
class ModelOutput:
    """The six probability structures emitted by a decoding layer.

    Arrays may be torch tensors (training) or numpy arrays (decoding):
    p_sc [N_h], p_sa [N_h, 6], p_wn [max_conds+1], p_wc [N_h],
    p_wo [N_h, 3], p_wv_start / p_wv_end [N_h, 3, L_sub].
    """

    p_sc: object
    p_sa: object
    p_wn: object
    p_wc: object
    p_wo: object
    p_wv_start: object
    p_wv_end: object

    def as_numpy(self) -> "ModelOutput":
        def conv(x):
            if isinstance(x, torch.Tensor):
                return x.detach().numpy()
            return np.asarray(x, dtype=np.float64)

        return ModelOutput(*(conv(getattr(self, f)) for f in _FIELDS))

    def to_dict(self) -> dict:
        out = self.as_numpy()
        return {f: getattr(out, f).tolist() for f in _FIELDS}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelOutput":
        return cls(**{f: np.asarray(d[f], dtype=np.float64) for f in _FIELDS})

    @property
    def n_headers(self) -> int:
        return len(self.p_sc)

    @property
    def n_question_subtokens(self) -> int:
        return self.p_wv_start.shape[-1]


_FIELDS = ("p_sc", "p_sa", "p_wn", "p_wc", "p_wo", "p_wv_start", "p_wv_end")


@dataclass(frozen=True)
class ScoredSketch:
    """A decoded sketch with its joint log-probability, broken down per
    sub-module (log_prob is always the sum of parts)."""

    sketch: SqlSketch
    log_prob: float
    parts: dict[str, float] = field(default_factory=dict)

    @property
    def confidence(self) -> float:
        return math.exp(self.log_prob)


class ColumnAttention(nn.Module):
    """Attention over question tokens with a header encoding as query:
    p(n|c) = softmax_n(D_c^T W E_n),  C_c = sum_n p(n|c) E_n."""

    def __init__(self, dim: int):
        super().__init__()
        self.w = nn.Linear(dim, dim, bias=False)

    def forward(self, E: torch.Tensor, D: torch.Tensor) -> torch.Tensor:
        scores = D @ self.w(E).T  # [N_h, L]
        p = torch.softmax(scores, dim=1)
        return p @ E


class SketchDecoder(nn.Module):
    def __init__(self, d_in: int, hidden: int = LSTM_HIDDEN, max_conds: int = 4):
        super().__init__()
        self.max_conds = max_conds
        self.hidden = hidden
        e_dim = 2 * hidden

        self.lstm_q = nn.LSTM(d_in, hidden, num_layers=2, bidirectional=True)
        self.lstm_h = nn.LSTM(d_in, hidden, num_layers=2, bidirectional=True)

        self.sc_att = ColumnAttention(e_dim)
        self.sc_d = nn.Linear(e_dim, hidden)
        self.sc_c = nn.Linear(e_dim, hidden)
        self.sc_out = nn.Linear(2 * hidden, 1)

        self.sa_att = ColumnAttention(e_dim)
        self.sa_mid = nn.Linear(e_dim, hidden)
        self.sa_out = nn.Linear(hidden, len(AggOp))

        self.wn_col_score = nn.Linear(e_dim, 1)
        self.wn_h0 = nn.Linear(e_dim, hidden)
        self.wn_c0 = nn.Linear(e_dim, hidden)
        self.wn_lstm = nn.LSTM(e_dim, hidden, num_layers=1, bidirectional=True)
        self.wn_tok_score = nn.Linear(e_dim, 1)
        self.wn_mid = nn.Linear(e_dim, hidden)
        self.wn_out = nn.Linear(hidden, max_conds + 1)

        self.wc_att = ColumnAttention(e_dim)
        self.wc_d = nn.Linear(e_dim, hidden)
        self.wc_c = nn.Linear(e_dim, hidden)
        self.wc_out = nn.Linear(2 * hidden, 1)

        self.wo_att = ColumnAttention(e_dim)
        self.wo_d = nn.Linear(e_dim, hidden)
        self.wo_c = nn.Linear(e_dim, hidden)
        self.wo_mid = nn.Linear(2 * hidden, hidden)
        self.wo_out = nn.Linear(hidden, len(CondOp))

        self.wv_att = ColumnAttention(e_dim)
        self.wv_c = nn.Linear(e_dim, hidden)
        self.wv_d = nn.Linear(e_dim, hidden)
        self.wv_op = nn.Linear(len(CondOp), hidden)
        self.wv_mid = nn.Linear(e_dim + 3 * hidden, hidden)
        self.wv_out = nn.Linear(hidden, 2)

        self.double()

    def contextualize(self, enc_out: EncoderOutput) -> tuple[torch.Tensor, torch.Tensor]:
        """LSTM-q output per question token (E) and LSTM-h encoding per
        header (D, taken at each header's final token)."""
        if enc_out.h_q.shape[0] < 1:
            raise ValueError("contextualize requires at least one question subtoken")
        if enc_out.n_headers < 1:
            raise ValueError("contextualize requires at least one header")
        E, _ = self.lstm_q(enc_out.h_q.unsqueeze(1))
        E = E.squeeze(1)  # [L, 200]
        d_rows = []
        for mat in enc_out.h_headers:
            out, _ = self.lstm_h(mat.unsqueeze(1))
            d_rows.append(out[-1, 0])
        D = torch.stack(d_rows)  # [N_h, 200]
        return E, D

    def select_column(self, E: torch.Tensor, D: torch.Tensor) -> torch.Tensor:
        C = self.sc_att(E, D)
        s = self.sc_out(torch.tanh(torch.cat([self.sc_d(D), self.sc_c(C)], dim=1)))
        return torch.softmax(s.squeeze(-1), dim=0)

    def select_agg(self, E: torch.Tensor, D: torch.Tensor) -> torch.Tensor:
        C = self.sa_att(E, D)
        return torch.softmax(self.sa_out(torch.tanh(self.sa_mid(C))), dim=1)

    def where_number(self, E: torch.Tensor, D: torch.Tensor) -> torch.Tensor:
        p_col = torch.softmax(self.wn_col_score(D).squeeze(-1), dim=0)
        C = p_col @ D
        # Both LSTM directions are seeded with the same projected state.
        h0 = self.wn_h0(C).expand(2, 1, self.hidden).contiguous()
        c0 = self.wn_c0(C).expand(2, 1, self.hidden).contiguous()
        out, _ = self.wn_lstm(E.unsqueeze(1), (h0, c0))
        p_tok = torch.softmax(self.wn_tok_score(out.squeeze(1)).squeeze(-1), dim=0)
        c_q = p_tok @ E
        return torch.softmax(self.wn_out(torch.tanh(self.wn_mid(c_q))), dim=0)

    def where_column(self, E: torch.Tensor, D: torch.Tensor) -> torch.Tensor:
        C = self.wc_att(E, D)
        s = self.wc_out(torch.tanh(torch.cat([self.wc_d(D), self.wc_c(C)], dim=1)))
        return torch.sigmoid(s.squeeze(-1))

    def where_operator(self, E: torch.Tensor, D: torch.Tensor) -> torch.Tensor:
        C = self.wo_att(E, D)
        s = self.wo_out(
            torch.tanh(self.wo_mid(torch.cat([self.wo_d(D), self.wo_c(C)], dim=1)))
        )
        return torch.softmax(s, dim=1)

    def where_value(
        self, E: torch.Tensor, D: torch.Tensor
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """Start/end distributions over question tokens for every
        (column, operator) pair: [N_h, 3, L] each."""
        n_h = D.shape[0]
        n_ops = len(CondOp)
        L = E.shape[0]
        C = self.wv_att(E, D)
        a = self.wv_c(C)  # [N_h, hidden]
        b = self.wv_d(D)  # [N_h, hidden]
        o = self.wv_op(torch.eye(n_ops, dtype=E.dtype))  # [3, hidden]
        vec = torch.cat(
            [
                E.expand(n_h, n_ops, L, E.shape[1]),
                a[:, None, None, :].expand(n_h, n_ops, L, self.hidden),
                b[:, None, None, :].expand(n_h, n_ops, L, self.hidden),
                o[None, :, None, :].expand(n_h, n_ops, L, self.hidden),
            ],
            dim=-1,
        )
        s = self.wv_out(torch.tanh(self.wv_mid(vec)))  # [N_h, 3, L, 2]
        p_start = torch.softmax(s[..., 0], dim=-1)
        p_end = torch.softmax(s[..., 1], dim=-1)
        return p_start, p_end

    def forward(self, enc_out: EncoderOutput) -> ModelOutput:
        E, D = self.contextualize(enc_out)
        p_start, p_end = self.where_value(E, D)
        return ModelOutput(
            p_sc=self.select_column(E, D),
            p_sa=self.select_agg(E, D),
            p_wn=self.where_number(E, D),
            p_wc=self.where_column(E, D),
            p_wo=self.where_operator(E, D),
            p_wv_start=p_start,
            p_wv_end=p_end,
        )


@dataclass(frozen=True)
class DecodeConfig:
    max_conds: int = 4
    max_span: int = 12


def top_k_indices(values: np.ndarray, k: int) -> list[int]:
    """Indices of the k largest values; ties broken toward lower index."""
    order = np.argsort(-np.asarray(values), kind="stable")
    return [int(i) for i in order[:k]]


def best_span(
    p_start: np.ndarray, p_end: np.ndarray, max_span: int
) -> tuple[int, int, float]:
    """Highest-probability (start, end) with start <= end < start + max_span.

    Ties break toward the lexicographically smallest pair.
    """
    best = (0, 0, -1.0)
    L = len(p_start)
    for s in range(L):
        for e in range(s, min(s + max_span, L)):
            prob = float(p_start[s]) * float(p_end[e])
            if prob > best[2]:
                best = (s, e, prob)
    return best


def decode_greedy(
    out: ModelOutput,
    tok: TokenizedText,
    question: str,
    table: Table,
    cfg: DecodeConfig = DecodeConfig(),
) -> ScoredSketch:
    """Per-sub-module argmax decoding with span search for values."""
    o = out.as_numpy()
    sel = int(np.argmax(o.p_sc))
    agg = AggOp(int(np.argmax(o.p_sa[sel])))
    k = min(int(np.argmax(o.p_wn)), o.n_headers)
    parts = {
        "sc": clamped_log(o.p_sc[sel]),
        "sa": clamped_log(o.p_sa[sel][int(agg)]),
        "wn": clamped_log(o.p_wn[int(np.argmax(o.p_wn))]),
        "wc": 0.0,
        "wo": 0.0,
        "wv": 0.0,
    }
    conds = []
    for col in top_k_indices(o.p_wc, k):
        op = CondOp(int(np.argmax(o.p_wo[col])))
        s, e, _ = best_span(
            o.p_wv_start[col, int(op)], o.p_wv_end[col, int(op)], cfg.max_span
        )
        value = span_to_text(question, tok, s, e)
        conds.append(Condition(column=col, op=op, value=value))
        parts["wc"] += clamped_log(o.p_wc[col])
        parts["wo"] += clamped_log(o.p_wo[col][int(op)])
        parts["wv"] += clamped_log(o.p_wv_start[col, int(op), s]) + clamped_log(
            o.p_wv_end[col, int(op), e]
        )
    sketch = SqlSketch(sel=sel, agg=agg, conds=tuple(conds))
    return ScoredSketch(sketch=sketch, log_prob=sum(parts.values()), parts=parts)
