"""Beam search over the incremental decoder with average length penalty."""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import ApeError, ParameterError
from .tokenizer import EncodedPair, Vocab, detokenize, encode_pair, wordpiece_tokenize

DEFAULT_MAX_LEN = 100


@dataclass
class Hypothesis:
    tokens: List[int]  # starts with the BOS id
    logp: float = 0.0
    finished: bool = False

    @property
    def length(self) -> int:
        """Emitted tokens, end-of-sequence included, BOS excluded."""
        return len(self.tokens) - 1

    @property
    def score(self) -> float:
        return self.logp / self.length if self.length else 0.0


def log_probs(logits: np.ndarray) -> np.ndarray:
    """Row-wise log-softmax in float64."""
    x = np.asarray(logits, dtype=np.float64)
    shifted = x - x.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def generation_mask(vocab_size: int, reserved_ids: Sequence[int], eos_id: int) -> np.ndarray:
    """True for ids that may never be generated: every reserved id except EOS."""
    banned = np.zeros(vocab_size, dtype=bool)
    banned[[i for i in reserved_ids if i != eos_id]] = True
    return banned


def search(step, state, bos_id: int, eos_id: int, beam: int, max_len: int,
           banned: Optional[np.ndarray] = None) -> Tuple[Hypothesis, List[Hypothesis]]:
    """Generic beam search.

    ``step(state, last_ids) -> (logits (k, V), new_state)`` scores the next
    token for each of the ``k`` live hypotheses; ``state.select(rows)``
    reorders the state. Returns the best completed hypothesis and the whole
    completed pool.

    Each step ranks every one-token extension by cumulative log-probability
    and keeps the top ``beam``; extensions ending in EOS move to the pool.
    At step ``max_len`` only EOS is allowed. The search stops early once
    ``beam`` completed hypotheses score at least as well as any live
    hypothesis could (a live hypothesis with cumulative log-prob ``c`` can
    reach at best ``c / max_len``).
    """
    if beam < 1:
        raise ParameterError(f"beam must be >= 1, got {beam}")
    if max_len < 1:
        raise ParameterError(f"max_len must be >= 1, got {max_len}")
    live = [Hypothesis([bos_id])]
    pool: List[Hypothesis] = []
    for t in range(1, max_len + 1):
        logits, state = step(state, np.array([h.tokens[-1] for h in live]))
        lp = log_probs(logits)
        if banned is not None:
            lp[:, banned] = -np.inf
        if t == max_len:
            keep = lp[:, eos_id].copy()
            lp[:] = -np.inf
            lp[:, eos_id] = keep
        totals = np.array([h.logp for h in live])[:, None] + lp
        flat = totals.reshape(-1)
        # stable sort keeps ties in (hypothesis, token) order
        order = np.argsort(-flat, kind="stable")[:beam]
        rows, next_live = [], []
        for idx in order:
            if not np.isfinite(flat[idx]):
                break
            r, tok = divmod(int(idx), lp.shape[1])
            hyp = Hypothesis(live[r].tokens + [tok], float(flat[idx]), tok == eos_id)
            if hyp.finished:
                pool.append(hyp)
            else:
                rows.append(r)
                next_live.append(hyp)
        live = next_live
        if not live:
            break
        state = state.select(np.array(rows))
        if len(pool) >= beam:
            bound = max(h.logp for h in live) / max_len
            if sum(h.score >= bound for h in pool) >= beam:
                break
    if not pool:
        raise ApeError("beam search produced no finished hypothesis")
    best = max(pool, key=lambda h: h.score)
    return best, pool


def beam_search(model, pair: EncodedPair, beam: int = 8, max_len: int = DEFAULT_MAX_LEN,
                return_pool: bool = False):
    """Decode one encoded (src, mt) pair; returns generated ids without BOS/EOS."""
    cfg = model.config
    if beam < 1:
        raise ParameterError(f"beam must be >= 1, got {beam}")
    max_len = min(max_len, cfg.max_positions)
    memory = model.encode(pair)
    state = model.start_decoding(memory)
    banned = generation_mask(cfg.vocab_size, cfg.reserved_ids, cfg.sep_id)
    best, pool = search(model.decode_step, state, cfg.cls_id, cfg.sep_id, beam, max_len, banned)
    ids = best.tokens[1:-1] if best.finished else best.tokens[1:]
    return (ids, best, pool) if return_pool else ids


def greedy_decode(model, pair: EncodedPair, max_len: int = DEFAULT_MAX_LEN) -> List[int]:
    """Stepwise argmax decoding (reference for the beam-1 case)."""
    cfg = model.config
    banned = generation_mask(cfg.vocab_size, cfg.reserved_ids, cfg.sep_id)
    max_len = min(max_len, cfg.max_positions)
    state = model.start_decoding(model.encode(pair))
    out, last = [], cfg.cls_id
    for t in range(1, max_len + 1):
        logits, state = model.decode_step(state, [last])
        lp = log_probs(logits)[0]
        lp[banned] = -np.inf
        last = cfg.sep_id if t == max_len else int(np.argmax(lp))
        if last == cfg.sep_id:
            break
        out.append(last)
    return out


def translate_corpus(model, triplets, vocab: Vocab, beam: int = 8, max_len: int = DEFAULT_MAX_LEN,
                     workers: int = 1) -> List[Optional[str]]:
    """Post-edit every triplet's mt; output order follows input order.

    Items that fail (e.g. too long for the position table) yield ``None``
    and a warning; the rest of the corpus is still processed.
    """
    def one(t) -> Optional[str]:
        try:
            pair = encode_pair(wordpiece_tokenize(t.src, vocab), wordpiece_tokenize(t.mt, vocab),
                               vocab, model.config.max_positions)
            return detokenize(vocab.tokens(beam_search(model, pair, beam, max_len)))
        except ApeError as exc:
            warnings.warn(f"translation failed: {exc}", stacklevel=2)
            return None

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, triplets))
    return [one(t) for t in triplets]


def write_outputs(lines: Sequence[Optional[str]], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in lines:
            fh.write((line or "") + "\n")
