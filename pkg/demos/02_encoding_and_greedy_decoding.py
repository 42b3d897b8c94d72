"""From question text to a decoded sketch, step by step.

The pipeline is: tokenize the question, assemble a single sequence that
interleaves the question with the table headers, run the contextual
encoder, hand the per-token vectors to the decoding layer (six
sub-modules, each emitting a probability distribution), and read off a
sketch greedily.  This demo uses a small randomly-initialized model so
the predictions are arbitrary — the point is the shapes and the
normalization invariants that hold at any parameter setting.

Run:  python3 demos/02_encoding_and_greedy_decoding.py
"""

import numpy as np
import torch

from sketchsql import (
    ColumnType,
    DecodeConfig,
    ModelConfig,
    SqlModel,
    Table,
    Vocabulary,
    assemble_input,
    decode_greedy,
    tokenize_question,
)

torch.manual_seed(0)

table = Table(
    id="t1",
    headers=(("Player", ColumnType.TEXT), ("Score", ColumnType.REAL)),
    rows=(("ann", 3), ("bob", 5), ("ann", 2)),
)
question = "how many players scored more than 4"

vocab = Vocabulary.from_tokens(
    ["how", "many", "players", "scored", "more", "than", "player", "score", "4"]
)

# 1. Tokenize: lowercase word split, then greedy wordpiece against the vocab.
tok = tokenize_question(question, vocab)
print("question subtokens:", tok.subtokens)

# 2. Assemble: [CLS] question [SEP] header1 [SEP] header2 [SEP] ...
#    with segment ids separating question tokens from header tokens.
inp = assemble_input(tok, table, vocab)
print("assembled length:", len(inp), "| header spans:", inp.header_spans)

# 3. Encode + decode.  The model bundles the toy transformer encoder with
#    the six-sub-module decoding head; forward() returns the six
#    probability structures.
model = SqlModel(ModelConfig(vocab_size=vocab.size, d_model=16, n_layers=2,
                             n_heads=2, d_ff=32))
with torch.no_grad():
    out = model(inp).as_numpy()

print()
print("sub-module outputs (shape, sum):")
print(f"  select column   p_sc {out.p_sc.shape}  sums to {out.p_sc.sum():.6f}")
print(f"  aggregation     p_sa {out.p_sa.shape}  rows sum to "
      f"{out.p_sa.sum(axis=1)}")
print(f"  condition count p_wn {out.p_wn.shape}  sums to {out.p_wn.sum():.6f}")
print(f"  where columns   p_wc {out.p_wc.shape}  independent sigmoids: {out.p_wc}")
print(f"  where operator  p_wo {out.p_wo.shape}  rows sum to {out.p_wo.sum(axis=1)}")
print(f"  value spans     p_wv_start {out.p_wv_start.shape}  each (col, op) row "
      f"sums to 1 over question subtokens")

# 4. Greedy readout: argmax per sub-module, best start<=end span per
#    condition, value text recovered from the original question string.
scored = decode_greedy(out, tok, question, table, DecodeConfig())
print()
print("greedy sketch:", scored.sketch.to_dict())
print("log-prob:", f"{scored.log_prob:.4f}",
      "= sum of parts", {k: round(v, 4) for k, v in scored.parts.items()})
