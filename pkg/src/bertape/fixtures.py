"""Synthetic post-editing corpora for smoke tests and demos.

The copy-with-edits corpus pairs a short "source" sentence with its
word-by-word "translation" (the post-edit); the mt side is that post-edit
with one or two scripted token edits (substitution, insertion, deletion).
"""

from __future__ import annotations

from typing import List, Tuple

import numpy as np

from .data import Triplet
from .tokenizer import Vocab

LEXICON: Tuple[Tuple[str, str], ...] = (
    ("the", "das"), ("house", "haus"), ("dog", "hund"), ("cat", "katze"),
    ("red", "rot"), ("big", "gross"), ("small", "klein"), ("old", "alt"),
    ("tree", "baum"), ("green", "gruen"), ("sleeps", "schlaeft"), ("runs", "laeuft"),
)


def copy_edit_corpus(n: int = 64, seed: int = 0, min_len: int = 3, max_len: int = 6) -> List[Triplet]:
    rng = np.random.default_rng(seed)
    target_words = [t for _, t in LEXICON]
    out = []
    for _ in range(n):
        idx = rng.integers(0, len(LEXICON), size=int(rng.integers(min_len, max_len + 1)))
        src = [LEXICON[i][0] for i in idx]
        pe = [LEXICON[i][1] for i in idx]
        mt = list(pe)
        for _ in range(int(rng.integers(1, 3))):
            kind = rng.choice(["sub", "ins", "del"]) if len(mt) > 1 else "sub"
            pos = int(rng.integers(0, len(mt)))
            if kind == "sub":
                choices = [w for w in target_words if w != mt[pos]]
                mt[pos] = choices[int(rng.integers(0, len(choices)))]
            elif kind == "ins":
                mt.insert(pos, target_words[int(rng.integers(0, len(target_words)))])
            else:
                del mt[pos]
        out.append(Triplet(" ".join(src), " ".join(mt), " ".join(pe)))
    return out


def lexicon_vocab() -> Vocab:
    return Vocab.from_words([w for pair in LEXICON for w in pair])
