import numpy as np
import pytest

from bertape.data import (Triplet, batch_by_tokens, collate, encode_triplets, filter_by_length,
                          oversample_mix, read_triplets, write_triplets)
from bertape.errors import FormatError, LengthError, ParameterError
from bertape.tokenizer import Vocab

from support import random_triplets


def test_read_triplets(tmp_path):
    path = tmp_path / "t.tsv"
    path.write_text("a\tb\tc\n", encoding="utf-8")
    assert read_triplets(path) == [Triplet("a", "b", "c")]
    path.write_text("", encoding="utf-8")
    assert read_triplets(path) == []


def test_read_triplets_bad_line(tmp_path):
    path = tmp_path / "t.tsv"
    path.write_text("a\tb\n", encoding="utf-8")
    with pytest.raises(FormatError, match="line 1"):
        read_triplets(path)


def test_write_read_round_trip(tmp_path, rng, vocab):
    triplets = random_triplets(rng, 10, vocab)
    write_triplets(triplets, tmp_path / "t.tsv")
    assert read_triplets(tmp_path / "t.tsv") == triplets


def _words(n):
    return " ".join(["a"] * n)


@pytest.fixture
def ab_vocab():
    return Vocab.from_words(["a", "b"])


def test_filter_boundaries(ab_vocab):
    kept = Triplet(_words(100), _words(99), _words(99))
    long_input = Triplet(_words(100), _words(100), _words(10))
    long_pe = Triplet("a", "a", _words(100))
    assert filter_by_length([kept, long_input, long_pe], ab_vocab) == [kept]
    assert filter_by_length([], ab_vocab) == []


def test_oversample_mix_proportions():
    small = [Triplet(str(i), "", "") for i in range(23)]
    large = [Triplet("L", "", "")] * 8000
    mixed = oversample_mix(small, large, 35, seed=0)
    assert len(mixed) == 23 * 35 + 8000
    share = sum(t.src != "L" for t in mixed) / len(mixed)
    assert share == pytest.approx(805000 / 8805000, abs=1e-12)


def test_oversample_factor_one_is_permutation():
    small = [Triplet(str(i), "", "") for i in range(30)]
    mixed = oversample_mix(small, [], 1, seed=3)
    assert sorted(mixed, key=lambda t: int(t.src)) == small
    with pytest.raises(ParameterError):
        oversample_mix(small, [], 0)


def _make(vocab, n, index):
    ex = encode_triplets([Triplet("a", "a", _words(n - 1))], vocab)[0]
    ex.index = index
    return ex


def test_batch_packing_oracle(ab_vocab):
    examples = [_make(ab_vocab, 400, i) for i in range(3)]
    sizes = sorted(b.size for b in batch_by_tokens(examples, 1024, seed=0))
    assert sizes == [1, 2]


def test_single_example_single_batch(ab_vocab):
    batches = batch_by_tokens([_make(ab_vocab, 7, 0)], 100)
    assert len(batches) == 1 and batches[0].indices == [0]


def test_batch_over_budget_names_example(ab_vocab):
    with pytest.raises(LengthError, match="example 5"):
        batch_by_tokens([_make(ab_vocab, 50, 5)], 20)


def test_batches_cover_epoch_within_budget(rng, vocab):
    examples = encode_triplets(random_triplets(rng, 40, vocab), vocab)
    batches = batch_by_tokens(examples, 16, seed=1)
    seen = sorted(i for b in batches for i in b.indices)
    assert seen == list(range(40))
    assert all(b.token_count <= 16 for b in batches)
    again = batch_by_tokens(examples, 16, seed=1)
    assert [b.indices for b in again] == [b.indices for b in batches]


def test_collate_padding(vocab, rng):
    examples = encode_triplets(random_triplets(rng, 4, vocab), vocab)
    batch = collate(examples, pad_id=vocab.pad_id)
    for row, ex in enumerate(examples):
        n = len(ex.pair)
        assert not batch.enc_pad[row, :n].any() and batch.enc_pad[row, n:].all()
        np.testing.assert_array_equal(batch.enc_ids[row, :n], ex.pair.ids)
        assert (batch.gold[row, len(ex.target.gold):] == vocab.pad_id).all()
    assert batch.token_count == sum(e.target_tokens for e in examples)
