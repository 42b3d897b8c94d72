"""Two-stage tokenization: rule-based word splitting, then greedy
longest-match subword segmentation, with character offsets preserved so
predicted subtoken spans map back to question substrings.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, NamedTuple

PAD_ID = 0
UNK_ID = 1
CLS_ID = 2
SEP_ID = 3
_RESERVED = ["[PAD]", "[UNK]", "[CLS]", "[SEP]"]
CONTINUATION_PREFIX = "##"


class Word(NamedTuple):
    text: str
    char_start: int
    char_end: int


class Subtoken(NamedTuple):
    id: int
    word_index: int


@dataclass(frozen=True)
class Vocabulary:
    """Token -> id map with fixed reserved ids [PAD]=0 [UNK]=1 [CLS]=2 [SEP]=3."""

    token_to_id: dict[str, int]
    id_to_token: tuple[str, ...]

    @classmethod
    def from_tokens(cls, tokens: Iterable[str]) -> "Vocabulary":
        id_to_token = list(_RESERVED)
        for tok in tokens:
            if tok in _RESERVED:
                continue
            id_to_token.append(tok)
        token_to_id = {tok: i for i, tok in enumerate(id_to_token)}
        if len(token_to_id) != len(id_to_token):
            raise ValueError("duplicate tokens in vocabulary")
        return cls(token_to_id=token_to_id, id_to_token=tuple(id_to_token))

    @classmethod
    def from_file(cls, path: str | Path) -> "Vocabulary":
        with open(path, encoding="utf-8") as f:
            tokens = [line.rstrip("\n") for line in f if line.rstrip("\n")]
        return cls.from_tokens(tokens)

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for tok in self.id_to_token[len(_RESERVED):]:
                f.write(tok + "\n")

    @property
    def size(self) -> int:
        return len(self.id_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    def __getitem__(self, token: str) -> int:
        return self.token_to_id[token]


@dataclass(frozen=True)
class TokenizedText:
    words: tuple[Word, ...]
    subtokens: tuple[Subtoken, ...]

    @property
    def n_subtokens(self) -> int:
        return len(self.subtokens)

    def subtoken_ids(self) -> list[int]:
        return [s.id for s in self.subtokens]


def basic_tokenize(text: str) -> list[Word]:
    """Split on whitespace, then split off punctuation as single-char words."""
    words: list[Word] = []
    i = 0
    n = len(text)
    while i < n:
        if text[i].isspace():
            i += 1
            continue
        if not text[i].isalnum():
            words.append(Word(text[i], i, i + 1))
            i += 1
            continue
        j = i
        while j < n and text[j].isalnum():
            j += 1
        words.append(Word(text[i:j], i, j))
        i = j
    return words


def wordpiece(word: str, vocab: Vocabulary) -> list[int]:
    """Greedy longest-match-first segmentation of a lowercased word.

    Pieces after the first are looked up with the "##" prefix.  When no
    segmentation exists the single [UNK] id is returned.
    """
    if not word:
        raise ValueError("wordpiece requires a non-empty word")
    word = word.lower()
    ids: list[int] = []
    start = 0
    while start < len(word):
        end = len(word)
        piece_id = None
        while end > start:
            piece = word[start:end]
            if start > 0:
                piece = CONTINUATION_PREFIX + piece
            if piece in vocab:
                piece_id = vocab[piece]
                break
            end -= 1
        if piece_id is None:
            return [UNK_ID]
        ids.append(piece_id)
        start = end
    return ids


def tokenize_question(text: str, vocab: Vocabulary) -> TokenizedText:
    words = basic_tokenize(text)
    subtokens: list[Subtoken] = []
    for wi, w in enumerate(words):
        for tid in wordpiece(w.text, vocab):
            subtokens.append(Subtoken(tid, wi))
    return TokenizedText(words=tuple(words), subtokens=tuple(subtokens))


def tokenize_header(name: str, vocab: Vocabulary) -> list[int]:
    """Subword-tokenize a header directly, without punctuation splitting."""
    ids: list[int] = []
    for chunk in name.split():
        ids.extend(wordpiece(chunk, vocab))
    return ids or [UNK_ID]


def span_to_text(question: str, tok: TokenizedText, start_sub: int, end_sub: int) -> str:
    """Question substring covering the words of an inclusive subtoken span."""
    if not 0 <= start_sub < len(tok.subtokens) or not 0 <= end_sub < len(tok.subtokens):
        raise IndexError(
            f"subtoken span ({start_sub}, {end_sub}) out of range "
            f"for {len(tok.subtokens)} subtokens"
        )
    if start_sub > end_sub:
        raise IndexError(f"span start {start_sub} exceeds end {end_sub}")
    w_start = tok.words[tok.subtokens[start_sub].word_index]
    w_end = tok.words[tok.subtokens[end_sub].word_index]
    return question[w_start.char_start : w_end.char_end]
