import numpy as np
import pytest

from sketchsql.data import ColumnType, Table
from sketchsql.tokenizer import Vocabulary


@pytest.fixture
def f1_table() -> Table:
    return Table(
        id="t1",
        headers=(("Player", ColumnType.TEXT), ("Score", ColumnType.REAL)),
        rows=(("ann", 3), ("bob", 5), ("ann", 2)),
    )


@pytest.fixture
def small_vocab() -> Vocabulary:
    return Vocabulary.from_tokens(
        [
            "how", "many", "players", "sco", "##red", "##re", "more", "than",
            "player", "4", "5", "ann", "bob", "?",
        ]
    )


def normalized(v: np.ndarray, axis=None) -> bool:
    return bool(np.all(np.abs(np.sum(v, axis=axis) - 1.0) <= 1e-9))
