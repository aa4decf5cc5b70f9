"""WordPiece segmentation and encoder/decoder sequence construction."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .errors import FormatError, LengthError

PAD, UNK, CLS, SEP, MASK = "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"
RESERVED = (PAD, UNK, CLS, SEP, MASK)

SEGMENT_A = 0
SEGMENT_B = 1

MAX_WORD_CHARS = 100


class Vocab:
    """Bijective token <-> id map with the five BERT reserved tokens."""

    def __init__(self, tokens: Sequence[str]):
        self.itos: List[str] = list(tokens)
        self.stoi = {}
        for i, tok in enumerate(self.itos):
            if tok in self.stoi:
                raise FormatError(f"duplicate token {tok!r} at line {i + 1}")
            self.stoi[tok] = i
        for tok in RESERVED:
            if tok not in self.stoi:
                raise FormatError(f"vocabulary is missing reserved token {tok}")
        self.pad_id = self.stoi[PAD]
        self.unk_id = self.stoi[UNK]
        self.cls_id = self.stoi[CLS]
        self.sep_id = self.stoi[SEP]
        self.mask_id = self.stoi[MASK]
        self.reserved_ids = frozenset(self.stoi[t] for t in RESERVED)

    @classmethod
    def from_words(cls, words: Iterable[str]) -> "Vocab":
        """Reserved tokens first, then ``words`` in first-seen order."""
        seen = dict.fromkeys(RESERVED)
        for w in words:
            seen.setdefault(w)
        return cls(list(seen))

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, token: str) -> bool:
        return token in self.stoi

    def id(self, token: str) -> int:
        return self.stoi.get(token, self.unk_id)

    def ids(self, tokens: Iterable[str]) -> List[int]:
        return [self.id(t) for t in tokens]

    def tokens(self, ids: Iterable[int]) -> List[str]:
        return [self.itos[i] for i in ids]

    def save(self, path) -> None:
        Path(path).write_text("".join(t + "\n" for t in self.itos), encoding="utf-8")


def load_vocab(path) -> Vocab:
    """One token per line, UTF-8; the zero-based line number is the id."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return Vocab([line.rstrip("\r") for line in lines])


def wordpiece_tokenize(text: str, vocab: Vocab) -> List[str]:
    """Greedy longest-match-first segmentation of each whitespace word."""
    out: List[str] = []
    for word in text.split():
        if len(word) > MAX_WORD_CHARS:
            out.append(UNK)
            continue
        pieces = []
        start = 0
        while start < len(word):
            end = len(word)
            piece = None
            while start < end:
                candidate = word[start:end]
                if start > 0:
                    candidate = "##" + candidate
                if candidate in vocab.stoi:
                    piece = candidate
                    break
                end -= 1
            if piece is None:
                pieces = [UNK]
                break
            pieces.append(piece)
            start = end
        out.extend(pieces)
    return out


def detokenize(tokens: Sequence[str]) -> str:
    """Merge ``##`` continuations and drop reserved tokens."""
    words: List[str] = []
    for tok in tokens:
        if tok in RESERVED:
            continue
        if tok.startswith("##"):
            if words:
                words[-1] += tok[2:]
                continue
            warnings.warn(f"continuation piece {tok!r} without a preceding word", stacklevel=2)
            tok = tok[2:]
        words.append(tok)
    return " ".join(words)


@dataclass
class EncodedPair:
    ids: np.ndarray
    segments: np.ndarray
    positions: np.ndarray

    def __len__(self) -> int:
        return len(self.ids)


@dataclass
class EncodedTarget:
    ids: np.ndarray
    segments: np.ndarray
    positions: np.ndarray
    gold: np.ndarray

    def __len__(self) -> int:
        return len(self.ids)


def _as_ids(tokens: Sequence, vocab: Vocab) -> List[int]:
    return [t if isinstance(t, (int, np.integer)) else vocab.id(t) for t in tokens]


def encode_pair(src_tokens: Sequence, mt_tokens: Sequence, vocab: Vocab,
                max_positions: Optional[int] = None) -> EncodedPair:
    """``[CLS] src [SEP] mt [SEP]``.

    Segment A covers ``[CLS] src [SEP]``, segment B the rest. Positions count
    from 0 over the A region and restart at 0 on the first mt token.
    """
    src = _as_ids(src_tokens, vocab)
    mt = _as_ids(mt_tokens, vocab)
    a_len = len(src) + 2
    b_len = len(mt) + 1
    if max_positions is not None and a_len + b_len > max_positions:
        raise LengthError(
            f"pair of {a_len + b_len} tokens exceeds the position table ({max_positions})"
        )
    ids = [vocab.cls_id, *src, vocab.sep_id, *mt, vocab.sep_id]
    segments = [SEGMENT_A] * a_len + [SEGMENT_B] * b_len
    positions = list(range(a_len)) + list(range(b_len))
    return EncodedPair(
        np.array(ids, dtype=np.int64),
        np.array(segments, dtype=np.int64),
        np.array(positions, dtype=np.int64),
    )


def encode_target(pe_tokens: Sequence, vocab: Vocab,
                  max_positions: Optional[int] = None) -> EncodedTarget:
    """Decoder input ``[CLS] pe`` and gold ``pe [SEP]``, all in segment B."""
    pe = _as_ids(pe_tokens, vocab)
    n = len(pe) + 1
    if max_positions is not None and n > max_positions:
        raise LengthError(f"target needs {n} positions, table holds {max_positions}")
    return EncodedTarget(
        ids=np.array([vocab.cls_id, *pe], dtype=np.int64),
        segments=np.full(n, SEGMENT_B, dtype=np.int64),
        positions=np.arange(n, dtype=np.int64),
        gold=np.array([*pe, vocab.sep_id], dtype=np.int64),
    )
