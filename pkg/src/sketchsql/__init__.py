"""Sketch-based natural-language-to-SQL: table-aware encoding, a
six-sub-module decoding layer (plus a parameter-light variant),
execution-guided decoding over an embedded query executor, and a
training and evaluation harness."""

from .data import (
    AggOp,
    ColumnType,
    CondOp,
    Condition,
    Example,
    SqlSketch,
    Table,
    parse_examples,
    parse_tables,
    sketch_equal,
)
from .executor import ExecResult, execute, results_equal, row_matches
from .tokenizer import TokenizedText, Vocabulary, basic_tokenize, tokenize_question, wordpiece
from .encoder import EncoderInput, EncoderOutput, ToyTransformerEncoder, assemble_input, encode_table_aware
from .nl2sql import DecodeConfig, ModelOutput, ScoredSketch, SketchDecoder, decode_greedy
from .shallow import ShallowConfig, ShallowDecoder
from .eg import EgConfig, decode_eg, eg_select, eg_where
from .training import ModelConfig, OptimConfig, SqlModel, grad_check, load_model, make_labels, save_model, train
from .metrics import EvalReport, evaluate, pr_sweep

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
