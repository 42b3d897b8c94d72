import math

import numpy as np
import pytest
import torch

from sketchsql.data import AggOp, CondOp, Condition, Example, SqlSketch
from sketchsql.nl2sql import ModelOutput
from sketchsql.tokenizer import tokenize_question
from sketchsql.training import (
    GoldLabels,
    ModelConfig,
    OptimConfig,
    SqlModel,
    Unlocatable,
    grad_check,
    load_model,
    loss,
    make_labels,
    make_optimizer,
    model_arrays,
    prepare_examples,
    save_model,
    train,
)


def example(question, conds=(), sel=0, agg=AggOp.NONE, table_id="t1"):
    return Example(
        question=question,
        table_id=table_id,
        gold=SqlSketch(sel=sel, agg=agg, conds=tuple(Condition(*c) for c in conds)),
    )


# --- gold label construction ---

def test_make_labels_locates_value(small_vocab):
    q = "how many players scored more than 4"
    ex = example(q, conds=[(1, CondOp.GT, "4")], agg=AggOp.COUNT)
    tok = tokenize_question(q, small_vocab)
    labels = make_labels(ex, tok)
    assert isinstance(labels, GoldLabels)
    # subtokens: how many players sco ##red more than 4 -> "4" at index 7
    assert labels.spans[1] == (7, 7)
    assert labels.ops[1] is CondOp.GT
    assert labels.columns == (1,)
    assert labels.n_conds == 1


def test_make_labels_value_not_present(small_vocab):
    q = "how many players scored more than 4"
    ex = example(q, conds=[(1, CondOp.GT, "4.0")])
    tok = tokenize_question(q, small_vocab)
    labels = make_labels(ex, tok)
    assert isinstance(labels, Unlocatable)


def test_make_labels_case_insensitive(small_vocab):
    q = "ann scored 5"
    ex = example(q, conds=[(0, CondOp.EQ, "Ann")])
    tok = tokenize_question(q, small_vocab)
    labels = make_labels(ex, tok)
    assert isinstance(labels, GoldLabels)
    assert labels.spans[0] == (0, 0)


def test_make_labels_multiword_value(small_vocab):
    q = "more than 4"
    ex = example(q, conds=[(0, CondOp.EQ, "more than 4")])
    tok = tokenize_question(q, small_vocab)
    labels = make_labels(ex, tok)
    assert isinstance(labels, GoldLabels)
    assert labels.spans[0] == (0, 2)


def test_make_labels_duplicate_where_column(small_vocab):
    q = "4 5"
    ex = example(q, conds=[(1, CondOp.GT, "4"), (1, CondOp.LT, "5")])
    tok = tokenize_question(q, small_vocab)
    assert isinstance(make_labels(ex, tok), Unlocatable)


def test_make_labels_no_conditions(small_vocab):
    q = "how many players"
    ex = example(q, agg=AggOp.COUNT)
    labels = make_labels(ex, tokenize_question(q, small_vocab))
    assert isinstance(labels, GoldLabels)
    assert labels.n_conds == 0
    assert labels.columns == ()


# --- loss ---

def uniform_output(n_h=2, L=1):
    return ModelOutput(
        p_sc=torch.full((n_h,), 1 / n_h, dtype=torch.float64),
        p_sa=torch.full((n_h, 6), 1 / 6, dtype=torch.float64),
        p_wn=torch.full((5,), 1 / 5, dtype=torch.float64),
        p_wc=torch.full((n_h,), 0.5, dtype=torch.float64),
        p_wo=torch.full((n_h, 3), 1 / 3, dtype=torch.float64),
        p_wv_start=torch.full((n_h, 3, L), 1 / L, dtype=torch.float64),
        p_wv_end=torch.full((n_h, 3, L), 1 / L, dtype=torch.float64),
    )


def test_loss_uniform_no_conditions():
    gold = GoldLabels(sel=0, agg=AggOp.NONE, n_conds=0, columns=(), ops={}, spans={})
    value = float(loss(uniform_output(), gold))
    expected = math.log(2) + math.log(6) + math.log(5) + 2 * math.log(2)
    assert value == pytest.approx(expected, abs=1e-12)


def test_loss_uniform_one_condition():
    gold = GoldLabels(
        sel=0,
        agg=AggOp.COUNT,
        n_conds=1,
        columns=(1,),
        ops={1: CondOp.GT},
        spans={1: (0, 1)},
    )
    value = float(loss(uniform_output(n_h=2, L=2), gold))
    expected = (
        math.log(2)      # select column
        + math.log(6)    # aggregation
        + math.log(5)    # where number
        + 2 * math.log(2)  # where-column BCE over both columns
        + math.log(3)    # operator
        + 2 * math.log(2)  # value start and end over 2 tokens
    )
    assert value == pytest.approx(expected, abs=1e-12)


def test_loss_clamps_zero_probability():
    out = uniform_output()
    out.p_sc = torch.tensor([0.0, 1.0], dtype=torch.float64)
    gold = GoldLabels(sel=0, agg=AggOp.NONE, n_conds=0, columns=(), ops={}, spans={})
    value = float(loss(out, gold))
    assert math.isfinite(value)
    assert value >= -math.log(1e-12)


def test_loss_where_number_clamped_to_head_size():
    gold = GoldLabels(
        sel=0, agg=AggOp.NONE, n_conds=9, columns=(), ops={}, spans={}
    )
    assert math.isfinite(float(loss(uniform_output(), gold)))


# --- optimizer and training loop ---

def tiny_config(vocab, layer="nl2sql"):
    return ModelConfig(
        vocab_size=vocab.size,
        layer=layer,
        d_model=8,
        n_layers=2,
        n_heads=2,
        d_ff=16,
        value_end_offset=8,
        max_headers=8,
    )


def tiny_dataset():
    questions = [
        ("how many players scored more than 4", AggOp.COUNT, [(1, CondOp.GT, "4")]),
        ("players scored more than 4", AggOp.NONE, [(1, CondOp.GT, "4")]),
        ("how many players", AggOp.COUNT, []),
        ("ann scored 5", AggOp.NONE, [(0, CondOp.EQ, "ann")]),
    ]
    return [example(q, conds=c, agg=a) for q, a, c in questions]


def test_optim_config_validation():
    with pytest.raises(ValueError):
        OptimConfig(lr_head=-1.0)
    with pytest.raises(ValueError):
        OptimConfig(beta1=1.0)
    with pytest.raises(ValueError):
        OptimConfig(batch_size=0)


def test_make_optimizer_two_groups(small_vocab):
    model = SqlModel(tiny_config(small_vocab))
    cfg = OptimConfig()
    opt = make_optimizer(model, cfg)
    assert len(opt.param_groups) == 2
    assert opt.param_groups[0]["lr"] == cfg.lr_encoder
    assert opt.param_groups[1]["lr"] == cfg.lr_head
    n_enc = sum(p.numel() for p in opt.param_groups[0]["params"])
    assert n_enc == sum(p.numel() for p in model.encoder.parameters())


def test_prepare_examples_counts_skips(small_vocab, f1_table):
    examples = tiny_dataset() + [example("4", conds=[(1, CondOp.GT, "77")])]
    prepared, skipped = prepare_examples(examples, {"t1": f1_table}, small_vocab)
    assert len(prepared) == 4
    assert skipped == 1


def test_one_step_decreases_loss(small_vocab, f1_table):
    torch.manual_seed(0)
    model = SqlModel(tiny_config(small_vocab))
    prepared, _ = prepare_examples(tiny_dataset(), {"t1": f1_table}, small_vocab)
    opt = make_optimizer(model, OptimConfig(lr_encoder=1e-3, lr_head=1e-2))

    def total():
        return sum(loss(model(p.enc_input), p.labels) for p in prepared)

    before = float(total().detach())
    opt.zero_grad()
    total().backward()
    opt.step()
    assert float(total().detach()) < before


def test_zero_learning_rate_leaves_parameters(small_vocab, f1_table):
    torch.manual_seed(0)
    model = SqlModel(tiny_config(small_vocab))
    snapshot = {k: v.clone() for k, v in model.state_dict().items()}
    train(
        tiny_dataset(),
        {"t1": f1_table},
        small_vocab,
        model,
        OptimConfig(lr_encoder=0.0, lr_head=0.0, epochs=1),
    )
    for k, v in model.state_dict().items():
        assert torch.equal(v, snapshot[k])


def test_train_history_records(small_vocab, f1_table):
    torch.manual_seed(0)
    model = SqlModel(tiny_config(small_vocab))
    logged = []
    history = train(
        tiny_dataset(),
        {"t1": f1_table},
        small_vocab,
        model,
        OptimConfig(epochs=2, batch_size=2),
        seed=1,
        log_fn=logged.append,
    )
    assert len(history) == 2
    for rec in history:
        for key in ("epoch", "loss", "lf_accuracy", "x_accuracy", "acc_s_col"):
            assert key in rec
    assert logged == history


def test_train_empty_dataset_rejected(small_vocab, f1_table):
    model = SqlModel(tiny_config(small_vocab))
    with pytest.raises(ValueError):
        train([], {"t1": f1_table}, small_vocab, model, OptimConfig(epochs=1))


def test_train_deterministic_under_seed(small_vocab, f1_table):
    def run():
        torch.manual_seed(3)
        model = SqlModel(tiny_config(small_vocab))
        train(
            tiny_dataset(),
            {"t1": f1_table},
            small_vocab,
            model,
            OptimConfig(epochs=1, batch_size=2),
            seed=3,
        )
        return model_arrays(model)

    a, b = run(), run()
    assert a.keys() == b.keys()
    for k in a:
        assert np.array_equal(a[k], b[k])


# --- checkpoint integration ---

def test_save_load_roundtrip(tmp_path, small_vocab):
    torch.manual_seed(0)
    model = SqlModel(tiny_config(small_vocab))
    path = tmp_path / "model.bin"
    save_model(path, model)
    again = load_model(path)
    assert again.config == model.config
    a, b = model_arrays(model), model_arrays(again)
    assert a.keys() == b.keys()
    for k in a:
        assert np.array_equal(a[k], b[k])


def test_shallow_checkpoint_single_head_array(tmp_path, small_vocab):
    torch.manual_seed(0)
    deep = SqlModel(tiny_config(small_vocab, layer="nl2sql"))
    shallow = SqlModel(tiny_config(small_vocab, layer="shallow"))
    head_names = [k for k in model_arrays(shallow) if k.startswith("head.")]
    assert head_names == ["head.where_number_affine"]
    path = tmp_path / "shallow.bin"
    save_model(path, shallow)
    assert load_model(path).config.layer == "shallow"
    enc_keys = {k for k in model_arrays(deep) if k.startswith("encoder.")}
    assert enc_keys == {k for k in model_arrays(shallow) if k.startswith("encoder.")}


# --- gradient checking ---

def test_grad_check_quadratic_exact():
    p = torch.nn.Parameter(torch.tensor([1.0, -2.0, 3.0], dtype=torch.float64))

    def loss_fn():
        return (p * p).sum()

    assert grad_check(loss_fn, [("p", p)]) < 1e-9


def test_grad_check_detects_corruption():
    p = torch.nn.Parameter(torch.tensor([1.0, -2.0, 3.0], dtype=torch.float64))

    def loss_fn():
        return (p * p).sum()

    assert grad_check(loss_fn, [("p", p)], corrupt={"p": 2.0}) > 0.3


def test_grad_check_full_model(small_vocab, f1_table):
    torch.manual_seed(0)
    model = SqlModel(tiny_config(small_vocab))
    prepared, _ = prepare_examples(
        [example("ann scored 5", conds=[(0, CondOp.EQ, "ann")])],
        {"t1": f1_table},
        small_vocab,
    )
    p = prepared[0]

    def loss_fn():
        return loss(model(p.enc_input), p.labels)

    named = list(model.named_parameters())[:6]
    assert grad_check(loss_fn, named, max_coords_per_param=2) < 1e-4
