"""Parameter-light decoding layer: sub-module probabilities are read from
fixed index positions of the table-aware encoder output vectors.  The
only trainable parameter is the where-number affine over the [CLS]
vector, kept as a single named array (bias folded into the last column).
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from .data import AggOp, CondOp
from .encoder import EncoderOutput
from .nl2sql import ModelOutput


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class ShallowConfig:
    """Index layout: component 0 select-column, 1..6 aggregation scores,
    7 where-column, 8..10 where-operator; question-token component mu is
    the value-start score for column mu and mu + value_end_offset the
    value-end score."""

    value_end_offset: int = 100
    max_headers: int = 44

    def check(self, d_out: int) -> None:
        if d_out < self.value_end_offset + self.max_headers:
            raise ConfigurationError(
                f"encoder width {d_out} < value_end_offset "
                f"{self.value_end_offset} + max_headers {self.max_headers}"
            )
        if self.value_end_offset < self.max_headers:
            raise ConfigurationError(
                f"value_end_offset {self.value_end_offset} overlaps start "
                f"components (max_headers {self.max_headers})"
            )


# The operator components come in the order (>, =, <); this table maps
# each CondOp to its component index so the skew lives in one place.
OP_COMPONENT = {CondOp.GT: 8, CondOp.EQ: 9, CondOp.LT: 10}

_AGG_SLICE = slice(1, 1 + len(AggOp))
_WC_COMPONENT = 7


def shallow_select_column(h_first: torch.Tensor) -> torch.Tensor:
    return torch.softmax(h_first[:, 0], dim=0)


def shallow_select_agg(h_first: torch.Tensor) -> torch.Tensor:
    """[N_h, 6] row-wise softmax over the aggregation components."""
    return torch.softmax(h_first[:, _AGG_SLICE], dim=1)


def shallow_where_column(h_first: torch.Tensor) -> torch.Tensor:
    return torch.sigmoid(h_first[:, _WC_COMPONENT])


def shallow_where_operator(h_first: torch.Tensor) -> torch.Tensor:
    """[N_h, 3] softmax over operator components, reordered to CondOp order."""
    components = [OP_COMPONENT[op] for op in CondOp]
    return torch.softmax(h_first[:, components], dim=1)


def shallow_where_number(h_cls: torch.Tensor, affine: torch.Tensor) -> torch.Tensor:
    """affine: [max_conds + 1, d_out + 1] with the bias in the last column."""
    aug = torch.cat([h_cls, h_cls.new_ones(1)])
    return torch.softmax(affine @ aug, dim=0)


def shallow_where_value(
    h_q: torch.Tensor, col: int, cfg: ShallowConfig
) -> tuple[torch.Tensor, torch.Tensor]:
    cfg.check(h_q.shape[1])
    if col >= cfg.max_headers:
        raise ConfigurationError(
            f"column {col} >= configured max_headers {cfg.max_headers}"
        )
    p_start = torch.softmax(h_q[:, col], dim=0)
    p_end = torch.softmax(h_q[:, col + cfg.value_end_offset], dim=0)
    return p_start, p_end


class ShallowDecoder(nn.Module):
    """Drop-in replacement for the six-sub-module layer; emits the same
    ModelOutput structure so greedy and execution-guided decoding run
    unchanged."""

    def __init__(self, d_out: int, max_conds: int = 4, cfg: ShallowConfig = ShallowConfig()):
        super().__init__()
        cfg.check(d_out)
        self.cfg = cfg
        self.max_conds = max_conds
        self.where_number_affine = nn.Parameter(
            torch.zeros(max_conds + 1, d_out + 1, dtype=torch.float64)
        )

    def forward(self, enc_out: EncoderOutput) -> ModelOutput:
        h_first = enc_out.header_first_rows()
        n_h = h_first.shape[0]
        if n_h > self.cfg.max_headers:
            raise ConfigurationError(
                f"{n_h} headers exceed configured max_headers {self.cfg.max_headers}"
            )
        starts, ends = [], []
        for col in range(n_h):
            ps, pe = shallow_where_value(enc_out.h_q, col, self.cfg)
            starts.append(ps)
            ends.append(pe)
        n_ops = len(CondOp)
        L = enc_out.h_q.shape[0]
        p_start = torch.stack(starts)[:, None, :].expand(n_h, n_ops, L)
        p_end = torch.stack(ends)[:, None, :].expand(n_h, n_ops, L)
        return ModelOutput(
            p_sc=shallow_select_column(h_first),
            p_sa=shallow_select_agg(h_first),
            p_wn=shallow_where_number(enc_out.h_cls, self.where_number_affine),
            p_wc=shallow_where_column(h_first),
            p_wo=shallow_where_operator(h_first),
            p_wv_start=p_start,
            p_wv_end=p_end,
        )
