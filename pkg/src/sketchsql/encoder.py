"""Table-aware input assembly and the pluggable contextual encoder.

The input layout is  [CLS] q1 .. qL [SEP] h1.. [SEP] h2.. [SEP] ...
with segment id 0 up to and including the first [SEP] and 1 afterwards.
The final two encoder layers are concatenated, so the working width is
2 * d_model, and the output is sliced into [CLS] / question / header
regions.

The bundled encoder is a small trainable transformer (all float64) so
the full pipeline can be trained and gradient-checked at desk scale;
any module producing >= 2 layers of equal shape can be plugged in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
from torch import nn

from .data import Table
from .tokenizer import CLS_ID, SEP_ID, TokenizedText, Vocabulary, tokenize_header

DEFAULT_MAX_LEN = 222


class LengthError(ValueError):
    """Assembled input exceeds the configured maximum length."""


class ShapeError(RuntimeError):
    """Encoder produced inconsistently shaped or too few layers."""


@dataclass(frozen=True)
class EncoderInput:
    """Token ids plus segment ids and the (half-open) region spans."""

    token_ids: tuple[int, ...]
    segment_ids: tuple[int, ...]
    question_span: tuple[int, int]
    header_spans: tuple[tuple[int, int], ...]

    def __len__(self) -> int:
        return len(self.token_ids)


def assemble_input(
    question: TokenizedText,
    table: Table,
    vocab: Vocabulary,
    max_len: int = DEFAULT_MAX_LEN,
) -> EncoderInput:
    if table.n_columns < 1:
        raise ValueError("table must have at least one header")
    ids = [CLS_ID]
    ids.extend(question.subtoken_ids())
    q_span = (1, len(ids))
    ids.append(SEP_ID)
    boundary = len(ids)  # segment 0 through the first [SEP] inclusive
    header_spans = []
    for name, _ in table.headers:
        start = len(ids)
        ids.extend(tokenize_header(name, vocab))
        header_spans.append((start, len(ids)))
        ids.append(SEP_ID)
    if len(ids) > max_len:
        raise LengthError(f"assembled length {len(ids)} exceeds max_len {max_len}")
    segments = [0] * boundary + [1] * (len(ids) - boundary)
    return EncoderInput(
        token_ids=tuple(ids),
        segment_ids=tuple(segments),
        question_span=q_span,
        header_spans=tuple(header_spans),
    )


@dataclass
class EncoderOutput:
    """Final-two-layer concatenation, sliced by input region."""

    H: torch.Tensor  # [len, d_out]
    h_cls: torch.Tensor  # [d_out]
    h_q: torch.Tensor  # [L_sub, d_out]
    h_headers: list[torch.Tensor]  # per header, [M_c, d_out]

    @property
    def d_out(self) -> int:
        return self.H.shape[1]

    @property
    def n_headers(self) -> int:
        return len(self.h_headers)

    def header_first_rows(self) -> torch.Tensor:
        """[N_h, d_out] matrix of each header's first-token vector."""
        return torch.stack([h[0] for h in self.h_headers])


class ContextualEncoder(nn.Module):
    """Interface: encode token/segment ids into >= 2 layers of equal shape."""

    def encode(
        self, token_ids: torch.Tensor, segment_ids: torch.Tensor
    ) -> list[torch.Tensor]:
        raise NotImplementedError


class TransformerBlock(nn.Module):
    def __init__(self, d_model: int, n_heads: int, d_ff: int):
        super().__init__()
        if d_model % n_heads:
            raise ValueError(f"d_model {d_model} not divisible by {n_heads} heads")
        self.n_heads = n_heads
        self.d_head = d_model // n_heads
        self.qkv = nn.Linear(d_model, 3 * d_model)
        self.attn_out = nn.Linear(d_model, d_model)
        self.norm1 = nn.LayerNorm(d_model)
        self.ff1 = nn.Linear(d_model, d_ff)
        self.ff2 = nn.Linear(d_ff, d_model)
        self.norm2 = nn.LayerNorm(d_model)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        n, d = x.shape
        qkv = self.qkv(x).reshape(n, 3, self.n_heads, self.d_head)
        q, k, v = qkv[:, 0], qkv[:, 1], qkv[:, 2]  # [n, heads, d_head]
        scores = torch.einsum("ihd,jhd->hij", q, k) / math.sqrt(self.d_head)
        attn = torch.softmax(scores, dim=-1)
        mixed = torch.einsum("hij,jhd->ihd", attn, v).reshape(n, d)
        x = self.norm1(x + self.attn_out(mixed))
        x = self.norm2(x + self.ff2(torch.nn.functional.gelu(self.ff1(x))))
        return x


class ToyTransformerEncoder(ContextualEncoder):
    """Token + position + segment embeddings followed by transformer blocks.

    Returns every block's output so callers can concatenate the last two.
    """

    def __init__(
        self,
        vocab_size: int,
        n_layers: int = 4,
        d_model: int = 64,
        n_heads: int = 4,
        d_ff: int = 256,
        max_positions: int = 512,
    ):
        super().__init__()
        self.vocab_size = vocab_size
        self.d_model = d_model
        self.tok_emb = nn.Embedding(vocab_size, d_model)
        self.pos_emb = nn.Embedding(max_positions, d_model)
        self.seg_emb = nn.Embedding(2, d_model)
        self.blocks = nn.ModuleList(
            TransformerBlock(d_model, n_heads, d_ff) for _ in range(n_layers)
        )
        self.double()

    def embed(self, token_ids: torch.Tensor, segment_ids: torch.Tensor) -> torch.Tensor:
        if token_ids.numel() and int(token_ids.max()) >= self.vocab_size:
            raise IndexError(
                f"token id {int(token_ids.max())} out of range for "
                f"vocab size {self.vocab_size}"
            )
        positions = torch.arange(len(token_ids))
        return (
            self.tok_emb(token_ids) + self.pos_emb(positions) + self.seg_emb(segment_ids)
        )

    def encode(
        self, token_ids: torch.Tensor, segment_ids: torch.Tensor
    ) -> list[torch.Tensor]:
        x = self.embed(token_ids, segment_ids)
        outputs = []
        for block in self.blocks:
            x = block(x)
            outputs.append(x)
        return outputs


def encode_table_aware(inp: EncoderInput, enc: ContextualEncoder) -> EncoderOutput:
    token_ids = torch.tensor(inp.token_ids, dtype=torch.long)
    segment_ids = torch.tensor(inp.segment_ids, dtype=torch.long)
    layers = enc.encode(token_ids, segment_ids)
    if len(layers) < 2:
        raise ShapeError(f"encoder produced {len(layers)} layer(s); need at least 2")
    shape = layers[0].shape
    if any(layer.shape != shape for layer in layers):
        raise ShapeError("encoder layers have mismatched shapes")
    if shape[0] != len(inp):
        raise ShapeError(
            f"encoder output length {shape[0]} != input length {len(inp)}"
        )
    H = torch.cat([layers[-2], layers[-1]], dim=-1)
    qs, qe = inp.question_span
    return EncoderOutput(
        H=H,
        h_cls=H[0],
        h_q=H[qs:qe],
        h_headers=[H[s:e] for s, e in inp.header_spans],
    )
