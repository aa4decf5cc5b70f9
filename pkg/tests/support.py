"""Small builders shared by the test modules."""

import numpy as np

from bertape.data import collate, encode_triplets
from bertape.model import ModelConfig, build_model, preset
from bertape.tokenizer import Vocab, encode_pair

WORDS = [f"w{i}" for i in range(15)]


def toy_vocab(words=WORDS):
    """Reserved tokens plus ``words``; 20 entries by default."""
    return Vocab.from_words(words)


def tiny_config(vocab=None, **overrides):
    """L=2, H=8, A=2, F=16 over a 20-entry vocabulary."""
    vocab = vocab or toy_vocab()
    base = dict(layers=2, hidden=8, heads=2, ff=16, max_positions=16)
    base.update(overrides)
    return ModelConfig.for_vocab(vocab, **base)


def tiny_model(name="SHARED_SA", seed=0, dtype=np.float64, vocab=None, **overrides):
    return build_model(tiny_config(vocab, **overrides), preset(name), seed=seed, dtype=dtype)


def random_triplets(rng, n, vocab=None, max_len=5):
    from bertape.data import Triplet

    vocab = vocab or toy_vocab()
    words = [t for i, t in enumerate(vocab.itos) if i not in vocab.reserved_ids]

    def sentence(lo=1):
        return " ".join(rng.choice(words, size=int(rng.integers(lo, max_len + 1))))

    return [Triplet(sentence(), sentence(), sentence()) for _ in range(n)]


def random_batch(rng, n=3, vocab=None, max_len=5):
    vocab = vocab or toy_vocab()
    return collate(encode_triplets(random_triplets(rng, n, vocab, max_len), vocab))


def random_pair(rng, vocab=None, max_len=5):
    vocab = vocab or toy_vocab()
    content = [i for i in range(len(vocab)) if i not in vocab.reserved_ids]
    src = list(rng.choice(content, size=int(rng.integers(1, max_len + 1))))
    mt = list(rng.choice(content, size=int(rng.integers(0, max_len + 1))))
    return encode_pair(src, mt, vocab)
