"""Losses, optimizer wiring, gradient verification and the training loop.

The encoder and the decoding head are separate parameter groups with
their own ADAM learning rates (1e-5 / 1e-3, betas 0.9 / 0.999).  Gold
value spans are built by locating each condition value in the question;
examples whose values cannot be located are skipped and counted.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import torch

from .data import AggOp, CondOp, Example, SqlSketch, Table, normalize_value
from .encoder import (
    EncoderInput,
    EncoderOutput,
    LengthError,
    ToyTransformerEncoder,
    assemble_input,
    encode_table_aware,
)
from .nl2sql import LOG_CLAMP, DecodeConfig, ModelOutput, SketchDecoder, decode_greedy
from .shallow import ShallowConfig, ShallowDecoder
from .tokenizer import TokenizedText, Vocabulary, tokenize_question
from . import checkpoint


@dataclass(frozen=True)
class OptimConfig:
    lr_encoder: float = 1e-5
    lr_head: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 32
    epochs: int = 50

    def __post_init__(self):
        if self.lr_encoder < 0 or self.lr_head < 0:
            raise ValueError("learning rates must be non-negative")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("betas must lie in (0, 1)")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size and epochs must be positive")


@dataclass(frozen=True)
class GoldLabels:
    sel: int
    agg: AggOp
    n_conds: int
    columns: tuple[int, ...]
    ops: dict[int, CondOp]
    spans: dict[int, tuple[int, int]]  # inclusive subtoken spans


@dataclass(frozen=True)
class Unlocatable:
    reason: str


def _find_value_span(
    question: str, tok: TokenizedText, value: str
) -> tuple[int, int] | None:
    """First word-aligned occurrence of the value, as an inclusive
    subtoken span."""
    target = normalize_value(value)
    words = tok.words
    for i in range(len(words)):
        for j in range(i, len(words)):
            text = question[words[i].char_start : words[j].char_end]
            if normalize_value(text) == target:
                sub_idx = [
                    k for k, s in enumerate(tok.subtokens) if i <= s.word_index <= j
                ]
                if not sub_idx:
                    return None
                return (sub_idx[0], sub_idx[-1])
    return None


def make_labels(ex: Example, tok: TokenizedText) -> GoldLabels | Unlocatable:
    columns = []
    ops: dict[int, CondOp] = {}
    spans: dict[int, tuple[int, int]] = {}
    for cond in ex.gold.conds:
        if cond.column in ops:
            return Unlocatable(f"duplicate where-column {cond.column}")
        span = _find_value_span(ex.question, tok, cond.value)
        if span is None:
            return Unlocatable(f"value {cond.value!r} not found in question")
        columns.append(cond.column)
        ops[cond.column] = cond.op
        spans[cond.column] = span
    return GoldLabels(
        sel=ex.gold.sel,
        agg=ex.gold.agg,
        n_conds=len(ex.gold.conds),
        columns=tuple(sorted(columns)),
        ops=ops,
        spans=spans,
    )


def _nll(p: torch.Tensor) -> torch.Tensor:
    return -torch.clamp(p, min=LOG_CLAMP).log()


def loss(out: ModelOutput, gold: GoldLabels) -> torch.Tensor:
    """Sum of per-sub-module negative log-likelihoods, with where-column
    treated as independent binary cross-entropies over all columns."""
    total = _nll(out.p_sc[gold.sel])
    total = total + _nll(out.p_sa[gold.sel, int(gold.agg)])
    total = total + _nll(out.p_wn[min(gold.n_conds, len(out.p_wn) - 1)])
    in_gold = torch.zeros_like(out.p_wc)
    for col in gold.columns:
        in_gold[col] = 1.0
    total = total + (
        in_gold * _nll(out.p_wc) + (1.0 - in_gold) * _nll(1.0 - out.p_wc)
    ).sum()
    for col in gold.columns:
        op = int(gold.ops[col])
        s, e = gold.spans[col]
        total = total + _nll(out.p_wo[col, op])
        total = total + _nll(out.p_wv_start[col, op, s])
        total = total + _nll(out.p_wv_end[col, op, e])
    return total


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    layer: str = "nl2sql"  # "nl2sql" | "shallow"
    d_model: int = 64
    n_layers: int = 4
    n_heads: int = 4
    d_ff: int = 256
    max_conds: int = 4
    max_len: int = 222
    value_end_offset: int = 100
    max_headers: int = 44

    def __post_init__(self):
        if self.layer not in ("nl2sql", "shallow"):
            raise ValueError(f"unknown layer {self.layer!r}")

    _META_FIELDS = (
        "vocab_size",
        "d_model",
        "n_layers",
        "n_heads",
        "d_ff",
        "max_conds",
        "max_len",
        "value_end_offset",
        "max_headers",
    )

    def to_meta(self) -> np.ndarray:
        vals = [float(getattr(self, f)) for f in self._META_FIELDS]
        vals.append(0.0 if self.layer == "nl2sql" else 1.0)
        return np.array(vals)

    @classmethod
    def from_meta(cls, meta: np.ndarray) -> "ModelConfig":
        kwargs = {f: int(meta[i]) for i, f in enumerate(cls._META_FIELDS)}
        kwargs["layer"] = "nl2sql" if meta[len(cls._META_FIELDS)] == 0.0 else "shallow"
        return cls(**kwargs)


class SqlModel(torch.nn.Module):
    """Toy contextual encoder plus one of the two decoding layers."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.encoder = ToyTransformerEncoder(
            vocab_size=config.vocab_size,
            n_layers=config.n_layers,
            d_model=config.d_model,
            n_heads=config.n_heads,
            d_ff=config.d_ff,
        )
        d_out = 2 * config.d_model
        if config.layer == "nl2sql":
            self.head = SketchDecoder(d_in=d_out, max_conds=config.max_conds)
        else:
            self.head = ShallowDecoder(
                d_out=d_out,
                max_conds=config.max_conds,
                cfg=ShallowConfig(config.value_end_offset, config.max_headers),
            )

    def forward(self, inp: EncoderInput) -> ModelOutput:
        return self.head(encode_table_aware(inp, self.encoder))

    def encode(self, inp: EncoderInput) -> EncoderOutput:
        return encode_table_aware(inp, self.encoder)


def model_arrays(model: SqlModel) -> dict[str, np.ndarray]:
    arrays = {
        name: param.detach().numpy().astype(np.float64)
        for name, param in model.state_dict().items()
    }
    arrays["meta.hparams"] = model.config.to_meta()
    return arrays


def save_model(path, model: SqlModel) -> None:
    checkpoint.save_arrays(path, model_arrays(model))


def load_model(path) -> SqlModel:
    arrays = checkpoint.load_arrays(path)
    config = ModelConfig.from_meta(arrays.pop("meta.hparams"))
    model = SqlModel(config)
    state = {name: torch.from_numpy(arr.copy()) for name, arr in arrays.items()}
    model.load_state_dict(state)
    return model


def encoder_arrays(encoder: ToyTransformerEncoder) -> dict[str, np.ndarray]:
    return {
        f"encoder.{name}": param.detach().numpy().astype(np.float64)
        for name, param in encoder.state_dict().items()
    }


@dataclass
class PreparedExample:
    example: Example
    tok: TokenizedText
    enc_input: EncoderInput
    labels: GoldLabels


def prepare_examples(
    examples: list[Example],
    tables: dict[str, Table],
    vocab: Vocabulary,
    max_len: int = 222,
) -> tuple[list[PreparedExample], int]:
    """Tokenize, assemble and label every example; returns the usable
    ones and the skipped count (unlocatable values, over-length inputs)."""
    prepared = []
    skipped = 0
    for ex in examples:
        table = tables[ex.table_id]
        tok = tokenize_question(ex.question, vocab)
        if not tok.subtokens:
            skipped += 1
            continue
        try:
            inp = assemble_input(tok, table, vocab, max_len=max_len)
        except LengthError:
            skipped += 1
            continue
        labels = make_labels(ex, tok)
        if isinstance(labels, Unlocatable):
            skipped += 1
            continue
        prepared.append(PreparedExample(ex, tok, inp, labels))
    return prepared, skipped


def make_optimizer(model: SqlModel, cfg: OptimConfig) -> torch.optim.Adam:
    return torch.optim.Adam(
        [
            {"params": list(model.encoder.parameters()), "lr": cfg.lr_encoder},
            {"params": list(model.head.parameters()), "lr": cfg.lr_head},
        ],
        betas=(cfg.beta1, cfg.beta2),
        eps=cfg.epsilon,
    )


def train(
    examples: list[Example],
    tables: dict[str, Table],
    vocab: Vocabulary,
    model: SqlModel,
    cfg: OptimConfig,
    seed: int = 0,
    decode_cfg: DecodeConfig | None = None,
    stop_at_lf: float | None = None,
    log_fn=None,
) -> list[dict]:
    """Mini-batch ADAM training; deterministic under a fixed seed.

    Returns per-epoch records with the mean loss and training-set
    accuracies (logical form plus the six sub-modules).
    """
    from .metrics import evaluate  # local import to avoid a cycle

    if not examples:
        raise ValueError("training requires a non-empty dataset")
    decode_cfg = decode_cfg or DecodeConfig(max_conds=model.config.max_conds)
    prepared, skipped = prepare_examples(
        examples, tables, vocab, max_len=model.config.max_len
    )
    if not prepared:
        raise ValueError("no trainable examples after skipping")
    optimizer = make_optimizer(model, cfg)
    rng = np.random.default_rng(seed)
    history = []
    for epoch in range(cfg.epochs):
        t0 = time.monotonic()
        order = rng.permutation(len(prepared))
        epoch_loss = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = [prepared[i] for i in order[start : start + cfg.batch_size]]
            optimizer.zero_grad()
            batch_loss = sum(loss(model(p.enc_input), p.labels) for p in batch)
            batch_loss.backward()
            optimizer.step()
            epoch_loss += float(batch_loss.detach())
        with torch.no_grad():
            preds = [
                decode_greedy(
                    model(p.enc_input),
                    p.tok,
                    p.example.question,
                    tables[p.example.table_id],
                    decode_cfg,
                )
                for p in prepared
            ]
        report = evaluate(preds, [p.example for p in prepared], tables)
        record = {
            "epoch": epoch,
            "loss": epoch_loss / len(prepared),
            "lf_accuracy": report.lf_accuracy,
            "x_accuracy": report.x_accuracy,
            "skipped": skipped,
            "seconds": time.monotonic() - t0,
            **{f"acc_{k}": v for k, v in report.submodules.items()},
        }
        history.append(record)
        if log_fn is not None:
            log_fn(record)
        if stop_at_lf is not None and report.lf_accuracy >= stop_at_lf and all(
            v >= stop_at_lf for v in report.submodules.values()
        ):
            break
    return history


FD_NOISE_FLOOR = 1e-6


def grad_check(
    loss_fn,
    named_params: list[tuple[str, torch.nn.Parameter]],
    epsilon: float = 1e-5,
    max_coords_per_param: int = 3,
    seed: int = 0,
    corrupt: dict[str, float] | None = None,
) -> float:
    """Max relative error between analytic gradients and central finite
    differences over sampled parameter coordinates.

    Coordinates are taken where the analytic gradient is largest in
    magnitude: near-zero coordinates carry no signal and their central
    differences are dominated by floating-point cancellation.  For the
    same reason, coordinates whose gradient magnitude sits below the
    finite-difference noise floor (~1e-6 at double precision for losses
    of order 1..100) are skipped entirely.  When a parameter's gradient
    is identically zero, coordinates are drawn at random instead.

    ``corrupt`` multiplies named analytic gradients, for fault-injection
    checks of the checker itself.
    """
    rng = np.random.default_rng(seed)
    for _, p in named_params:
        p.grad = None
    loss_fn().backward()
    analytic = {}
    for name, p in named_params:
        g = p.grad.detach().clone() if p.grad is not None else torch.zeros_like(p)
        if corrupt and name in corrupt:
            g = g * corrupt[name]
        analytic[name] = g
    worst = 0.0
    with torch.no_grad():
        for name, p in named_params:
            flat = p.data.view(-1)
            n = flat.numel()
            k = min(max_coords_per_param, n)
            true_grad = (
                p.grad.detach().view(-1)
                if p.grad is not None
                else torch.zeros(n, dtype=p.dtype)
            )
            if float(true_grad.abs().max()) > 0.0:
                coords = [
                    c
                    for c in torch.topk(true_grad.abs(), k).indices.tolist()
                    if float(true_grad[c].abs()) >= FD_NOISE_FLOOR
                ]
            else:
                coords = rng.choice(n, size=k, replace=False)
            for c in coords:
                c = int(c)
                orig = float(flat[c])
                flat[c] = orig + epsilon
                plus = float(loss_fn())
                flat[c] = orig - epsilon
                minus = float(loss_fn())
                flat[c] = orig
                numeric = (plus - minus) / (2 * epsilon)
                a = float(analytic[name].view(-1)[c])
                rel = abs(a - numeric) / max(1e-8, abs(a) + abs(numeric))
                worst = max(worst, rel)
    return worst
