"""Translation Edit Rate and corpus BLEU on whitespace tokens.

TER = (insertions + deletions + substitutions + shifts) / reference length.
Shifts are chosen greedily, tercom-style: at each round every block of the
hypothesis (up to ``MAX_SHIFT_SIZE`` words) that also occurs in the
reference is tried at the insertion points suggested by the current
alignment, and the move that lowers the edit distance most is applied.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List, Sequence, Tuple

from .errors import FormatError, ParameterError

MAX_SHIFT_SIZE = 10
MAX_NGRAM = 4

# DP traceback operations
_MATCH, _SUB, _INS, _DEL = "M", "S", "I", "D"


def edit_distance(hyp: Sequence[str], ref: Sequence[str]) -> int:
    """Word-level Levenshtein distance (unit costs)."""
    return _align(tuple(hyp), tuple(ref))[0]


@lru_cache(maxsize=65536)
def _align(hyp: Tuple[str, ...], ref: Tuple[str, ...]) -> Tuple[int, Tuple[str, ...]]:
    """Minimum edit distance and one optimal operation path (hyp -> ref).

    Ties prefer match/substitution, then deletion of a hyp word, then
    insertion of a ref word.
    """
    n, m = len(hyp), len(ref)
    cost = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        cost[i][0] = i
    for j in range(1, m + 1):
        cost[0][j] = j
    for i in range(1, n + 1):
        hi = hyp[i - 1]
        row, prev = cost[i], cost[i - 1]
        for j in range(1, m + 1):
            diag = prev[j - 1] + (hi != ref[j - 1])
            row[j] = min(diag, prev[j] + 1, row[j - 1] + 1)
    ops = []
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and cost[i][j] == cost[i - 1][j - 1] + (hyp[i - 1] != ref[j - 1]):
            ops.append(_MATCH if hyp[i - 1] == ref[j - 1] else _SUB)
            i, j = i - 1, j - 1
        elif i > 0 and cost[i][j] == cost[i - 1][j] + 1:
            ops.append(_DEL)
            i -= 1
        else:
            ops.append(_INS)
            j -= 1
    ops.reverse()
    return cost[n][m], tuple(ops)


def _alignment_maps(ops: Sequence[str], n_hyp: int, n_ref: int):
    """Per-word error flags and a ref-position -> hyp-position map."""
    hyp_err = [True] * n_hyp
    ref_err = [True] * n_ref
    ref_to_hyp: Dict[int, int] = {}
    i = j = 0
    for op in ops:
        if op in (_MATCH, _SUB):
            ref_to_hyp[j] = i
            if op == _MATCH:
                hyp_err[i] = ref_err[j] = False
            i += 1
            j += 1
        elif op == _DEL:
            i += 1
        else:
            ref_to_hyp[j] = i - 1
            j += 1
    return hyp_err, ref_err, ref_to_hyp


def _move(words: Tuple[str, ...], start: int, length: int, dest: int) -> Tuple[str, ...]:
    """Move ``words[start:start+length]`` so it begins before ``words[dest]``
    of the original sequence."""
    block = words[start:start + length]
    rest = words[:start] + words[start + length:]
    if dest > start:
        dest -= length
    return rest[:dest] + block + rest[dest:]


def _best_shift(hyp: Tuple[str, ...], ref: Tuple[str, ...]):
    base, ops = _align(hyp, ref)
    hyp_err, ref_err, ref_to_hyp = _alignment_maps(ops, len(hyp), len(ref))
    best = None
    for hs in range(len(hyp)):
        for rs in range(len(ref)):
            length = 0
            while (length < MAX_SHIFT_SIZE and hs + length < len(hyp) and rs + length < len(ref)
                   and hyp[hs + length] == ref[rs + length]):
                length += 1
                if not any(hyp_err[hs:hs + length]) or not any(ref_err[rs:rs + length]):
                    continue
                tried = set()
                for offset in range(-1, length):
                    r = rs + offset
                    if r < 0:
                        dest = 0
                    elif r in ref_to_hyp:
                        dest = ref_to_hyp[r] + 1
                    else:
                        continue
                    if dest in tried or hs <= dest <= hs + length:
                        continue
                    tried.add(dest)
                    shifted = _move(hyp, hs, length, dest)
                    gain = base - _align(shifted, ref)[0]
                    key = (gain, length, -hs, -dest)
                    if best is None or key > best[0]:
                        best = (key, shifted)
    return best


def ter_edits(hyp: Sequence[str], ref: Sequence[str], shifts: bool = True) -> int:
    """Shift count plus the edit distance after shifting."""
    words = tuple(hyp)
    ref = tuple(ref)
    n_shifts = 0
    while shifts:
        found = _best_shift(words, ref)
        if found is None or found[0][0] <= 0:
            break
        words = found[1]
        n_shifts += 1
    return n_shifts + _align(words, ref)[0]


def ter(hyp: Sequence[str], ref: Sequence[str], shifts: bool = True) -> float:
    """Edits per reference word (a fraction, not a percentage)."""
    if len(ref) == 0:
        raise ParameterError("TER is undefined for an empty reference")
    return ter_edits(hyp, ref, shifts) / len(ref)


# ---------------------------------------------------------------------------
# BLEU


@dataclass
class SegmentScore:
    edits: int
    ref_length: int
    matches: Tuple[int, ...]
    totals: Tuple[int, ...]
    hyp_length: int


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def ngram_stats(hyp: Sequence[str], ref: Sequence[str], max_n: int = MAX_NGRAM):
    """Clipped n-gram matches and hypothesis n-gram totals for orders 1..max_n."""
    matches, totals = [], []
    for n in range(1, max_n + 1):
        h, r = _ngrams(hyp, n), _ngrams(ref, n)
        matches.append(sum(min(c, r[g]) for g, c in h.items()))
        totals.append(max(len(hyp) - n + 1, 0))
    return tuple(matches), tuple(totals)


def bleu_from_stats(matches: Sequence[int], totals: Sequence[int], hyp_len: int, ref_len: int) -> float:
    if hyp_len == 0 or any(m == 0 for m in matches):
        return 0.0
    log_prec = sum(math.log(m / t) for m, t in zip(matches, totals)) / len(matches)
    brevity = min(0.0, 1.0 - ref_len / hyp_len)
    return 100.0 * math.exp(log_prec + brevity)


def bleu(hyps: Sequence[Sequence[str]], refs: Sequence[Sequence[str]]) -> float:
    """Corpus BLEU-4 with one reference, no smoothing, on a 0-100 scale."""
    if len(hyps) != len(refs):
        raise ParameterError(f"{len(hyps)} hypotheses but {len(refs)} references")
    if not hyps:
        raise ParameterError("BLEU needs at least one segment")
    matches = [0] * MAX_NGRAM
    totals = [0] * MAX_NGRAM
    hyp_len = ref_len = 0
    for h, r in zip(hyps, refs):
        m, t = ngram_stats(h, r)
        matches = [a + b for a, b in zip(matches, m)]
        totals = [a + b for a, b in zip(totals, t)]
        hyp_len += len(h)
        ref_len += len(r)
    return bleu_from_stats(matches, totals, hyp_len, ref_len)


def segment_score(hyp: Sequence[str], ref: Sequence[str]) -> SegmentScore:
    m, t = ngram_stats(hyp, ref)
    edits = ter_edits(hyp, ref) if ref else len(hyp)
    return SegmentScore(edits, len(ref), m, t, len(hyp))


@dataclass
class CorpusScore:
    ter: float  # percentage
    bleu: float

    def report(self) -> str:
        return f"TER\tBLEU\n{self.ter:.2f}\t{self.bleu:.2f}\n"


def corpus_scores(hyp_lines: Sequence[str], ref_lines: Sequence[str]) -> CorpusScore:
    """Aggregate edits and n-gram counts over the corpus before dividing."""
    if len(hyp_lines) != len(ref_lines):
        raise FormatError(f"{len(hyp_lines)} hypothesis lines but {len(ref_lines)} reference lines")
    if not hyp_lines:
        raise ParameterError("cannot score an empty corpus")
    hyps = [(h or "").split() for h in hyp_lines]
    refs = [r.split() for r in ref_lines]
    segs = [segment_score(h, r) for h, r in zip(hyps, refs)]
    ref_words = sum(s.ref_length for s in segs)
    if ref_words == 0:
        raise ParameterError("TER is undefined: every reference is empty")
    ter_pct = 100.0 * sum(s.edits for s in segs) / ref_words
    return CorpusScore(ter_pct, bleu(hyps, refs))


def _read_lines(path) -> List[str]:
    with open(path, encoding="utf-8") as fh:
        return [line.rstrip("\n").rstrip("\r") for line in fh]


def score_corpus(hyp_file, ref_file) -> CorpusScore:
    return corpus_scores(_read_lines(hyp_file), _read_lines(ref_file))
