"""Execution-guided decoding: letting the database veto bad guesses.

Greedy decoding takes each sub-module's argmax independently, so it can
produce queries that are well-scored but nonsensical when executed —
summing a text column, or a condition no row satisfies.  Execution-
guided decoding keeps a small beam of candidates per decision, runs each
partial query against the table, and discards the ones that come back
empty, falling back to the greedy choice only when every candidate
fails.

This demo constructs the sub-module probabilities by hand so the
failure is visible and deterministic: the model's top pick selects
SUM over the text column "Player" and a condition value ("9 4") that
matches no row, and execution guidance repairs both.

Run:  python3 demos/04_execution_guided_decoding.py
"""

import numpy as np

from sketchsql import (
    ColumnType,
    DecodeConfig,
    EgConfig,
    ModelOutput,
    Table,
    Vocabulary,
    decode_eg,
    decode_greedy,
    execute,
    tokenize_question,
)

table = Table(
    id="t1",
    headers=(("Player", ColumnType.TEXT), ("Score", ColumnType.REAL)),
    rows=(("ann", 3), ("bob", 5), ("ann", 2)),
)
question = "total score above 9 4"
vocab = Vocabulary.from_tokens(["total", "score", "above", "9", "4"])
tok = tokenize_question(question, vocab)
L = len(tok.subtokens)  # 5 question subtokens

# Hand-built sub-module probabilities (2 headers, 5 question tokens).
# Aggregation codes: NONE MAX MIN COUNT SUM AVG; operators: EQ GT LT.
uniform_spans = np.full((2, 3, L), 1.0 / L)
start = uniform_spans.copy()
end = uniform_spans.copy()
# value span for (column Score, operator >): the best-scored span is the
# two-token "9 4", then the single token "4"
start[1, 1] = [0.05, 0.05, 0.05, 0.45, 0.40]
end[1, 1] = [0.05, 0.05, 0.05, 0.10, 0.75]
out = ModelOutput(
    p_sc=np.array([0.7, 0.3]),                       # favors Player (text!)
    p_sa=np.array([[0.05, 0.05, 0.05, 0.05, 0.75, 0.05]] * 2),  # favors SUM
    p_wn=np.array([0.10, 0.80, 0.05, 0.03, 0.02]),   # one condition
    p_wc=np.array([0.20, 0.90]),                     # condition on Score
    p_wo=np.array([[0.8, 0.1, 0.1], [0.1, 0.8, 0.1]]),
    p_wv_start=start,
    p_wv_end=end,
)

greedy = decode_greedy(out, tok, question, table, DecodeConfig())
print("greedy sketch :", greedy.sketch.to_dict())
print("greedy result :", execute(greedy.sketch, table).to_dict())
print("  (SUM over a text column with an unsatisfiable condition -> empty)")

guided, info = decode_eg(out, tok, question, table, EgConfig(), DecodeConfig())
print()
print("guided sketch :", guided.sketch.to_dict())
print("guided result :", execute(guided.sketch, table).to_dict())
print("fallback used :", info.fallback)
print()
print("what changed and why:")
print("  select: (Player, SUM) pruned — numeric aggregation over a text")
print("          column can never execute; next beam pair is (Score, SUM)")
print("  where : 'score > 9 4' matches no row, so the partial query")
print("          returns empty; the next-best value span '4' survives")
print()
print("the guided sketch keeps an honest score: log-prob",
      f"{guided.log_prob:.4f} is the sum of its parts",
      {k: round(v, 4) for k, v in guided.parts.items()})
