"""Triplet corpora: reading, length filtering, oversampling and token batching."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .errors import FormatError, LengthError, ParameterError
from .tokenizer import EncodedPair, EncodedTarget, Vocab, encode_pair, encode_target, wordpiece_tokenize

MAX_SRC_MT_TOKENS = 199
MAX_PE_TOKENS = 99


@dataclass(frozen=True)
class Triplet:
    src: str
    mt: str
    pe: str


def read_triplets(path) -> List[Triplet]:
    """Read ``src<TAB>mt<TAB>pe`` lines."""
    triplets = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            fields = line.rstrip("\n").rstrip("\r").split("\t")
            if len(fields) != 3:
                raise FormatError(f"{path}: line {lineno} has {len(fields)} fields, expected 3")
            triplets.append(Triplet(*fields))
    return triplets


def write_triplets(triplets: Sequence[Triplet], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in triplets:
            fh.write(f"{t.src}\t{t.mt}\t{t.pe}\n")


def filter_by_length(triplets: Sequence[Triplet], vocab: Vocab,
                     max_src_mt: int = MAX_SRC_MT_TOKENS,
                     max_pe: int = MAX_PE_TOKENS) -> List[Triplet]:
    """Drop triplets whose src+mt or pe subword counts are too long.

    Counts are WordPiece pieces without the special tokens.
    """
    kept = []
    for t in triplets:
        n_in = len(wordpiece_tokenize(t.src, vocab)) + len(wordpiece_tokenize(t.mt, vocab))
        if n_in <= max_src_mt and len(wordpiece_tokenize(t.pe, vocab)) <= max_pe:
            kept.append(t)
    return kept


def oversample_mix(small: Sequence[Triplet], large: Sequence[Triplet], factor: int,
                   seed: int = 0) -> List[Triplet]:
    """``factor`` copies of ``small`` plus ``large``, shuffled with ``seed``."""
    if factor < 1:
        raise ParameterError(f"oversampling factor must be >= 1, got {factor}")
    pool = list(small) * factor + list(large)
    order = np.random.default_rng(seed).permutation(len(pool))
    return [pool[i] for i in order]


@dataclass
class Example:
    pair: EncodedPair
    target: EncodedTarget
    index: int = 0

    @property
    def target_tokens(self) -> int:
        return len(self.target.gold)


def encode_triplets(triplets: Sequence[Triplet], vocab: Vocab,
                    max_positions: Optional[int] = None) -> List[Example]:
    examples = []
    for i, t in enumerate(triplets):
        pair = encode_pair(wordpiece_tokenize(t.src, vocab), wordpiece_tokenize(t.mt, vocab),
                           vocab, max_positions)
        target = encode_target(wordpiece_tokenize(t.pe, vocab), vocab, max_positions)
        examples.append(Example(pair, target, i))
    return examples


@dataclass
class Batch:
    enc_ids: np.ndarray
    enc_segments: np.ndarray
    enc_positions: np.ndarray
    enc_pad: np.ndarray  # True at padding
    dec_ids: np.ndarray
    dec_segments: np.ndarray
    dec_positions: np.ndarray
    gold: np.ndarray
    dec_pad: np.ndarray
    indices: List[int] = field(default_factory=list)

    @property
    def size(self) -> int:
        return len(self.indices)

    @property
    def token_count(self) -> int:
        return int((~self.dec_pad).sum())


def _pad(rows: Sequence[np.ndarray], value: int) -> np.ndarray:
    width = max(len(r) for r in rows)
    out = np.full((len(rows), width), value, dtype=np.int64)
    for i, r in enumerate(rows):
        out[i, : len(r)] = r
    return out


def collate(examples: Sequence[Example], pad_id: int = 0) -> Batch:
    pairs = [e.pair for e in examples]
    targets = [e.target for e in examples]
    enc_ids = _pad([p.ids for p in pairs], pad_id)
    dec_ids = _pad([t.ids for t in targets], pad_id)
    return Batch(
        enc_ids=enc_ids,
        enc_segments=_pad([p.segments for p in pairs], 0),
        enc_positions=_pad([p.positions for p in pairs], 0),
        enc_pad=_pad([np.ones(len(p), dtype=np.int64) for p in pairs], 0) == 0,
        dec_ids=dec_ids,
        dec_segments=_pad([t.segments for t in targets], 0),
        dec_positions=_pad([t.positions for t in targets], 0),
        gold=_pad([t.gold for t in targets], pad_id),
        dec_pad=_pad([np.ones(len(t), dtype=np.int64) for t in targets], 0) == 0,
        indices=[e.index for e in examples],
    )


def batch_by_tokens(examples: Sequence[Example], budget: int, seed: int = 0,
                    pad_id: int = 0) -> List[Batch]:
    """Pack examples into batches of at most ``budget`` target tokens.

    Examples are sorted by (target, source) length and packed greedily so
    similar lengths share a batch; the batch order is then shuffled.
    """
    for pos, e in enumerate(examples):
        if e.target_tokens > budget:
            raise LengthError(
                f"example {e.index} (position {pos}) has {e.target_tokens} target tokens, "
                f"budget is {budget}"
            )
    order = sorted(range(len(examples)),
                   key=lambda i: (examples[i].target_tokens, len(examples[i].pair), i))
    groups: List[List[Example]] = []
    current: List[Example] = []
    used = 0
    for i in order:
        e = examples[i]
        if current and used + e.target_tokens > budget:
            groups.append(current)
            current, used = [], 0
        current.append(e)
        used += e.target_tokens
    if current:
        groups.append(current)
    perm = np.random.default_rng(seed).permutation(len(groups))
    return [collate(groups[i], pad_id) for i in perm]
