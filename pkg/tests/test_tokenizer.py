import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bertape.errors import FormatError, LengthError
from bertape.tokenizer import (CLS, RESERVED, SEGMENT_A, SEGMENT_B, SEP, UNK, Vocab, detokenize,
                               encode_pair, encode_target, load_vocab, wordpiece_tokenize)


@pytest.fixture
def wp_vocab():
    return Vocab.from_words(["un", "##able", "able", "a", "b", "c", "x", "y"])


def test_reserved_only_vocab(tmp_path):
    path = tmp_path / "vocab.txt"
    path.write_text("\n".join(RESERVED) + "\n", encoding="utf-8")
    assert len(load_vocab(path)) == 5


def test_duplicate_token_rejected(tmp_path):
    path = tmp_path / "vocab.txt"
    path.write_text("\n".join(RESERVED + ("the", "the")) + "\n", encoding="utf-8")
    with pytest.raises(FormatError, match="duplicate"):
        load_vocab(path)


def test_missing_reserved_token_named(tmp_path):
    path = tmp_path / "vocab.txt"
    path.write_text("\n".join(t for t in RESERVED if t != SEP) + "\n", encoding="utf-8")
    with pytest.raises(FormatError, match=r"\[SEP\]"):
        load_vocab(path)


def test_large_vocab_round_trip(tmp_path):
    tokens = list(RESERVED) + [f"tok{i}" for i in range(30000 - len(RESERVED))]
    path = tmp_path / "vocab.txt"
    Vocab(tokens).save(path)
    vocab = load_vocab(path)
    assert len(vocab) == 30000
    rng = np.random.default_rng(0)
    for i in rng.integers(0, 30000, size=100):
        assert vocab.id(vocab.tokens([i])[0]) == i


def test_wordpiece_greedy_longest_match(wp_vocab):
    assert wordpiece_tokenize("unable", wp_vocab) == ["un", "##able"]
    assert wordpiece_tokenize("able", wp_vocab) == ["able"]
    assert wordpiece_tokenize("xyzzy", wp_vocab) == [UNK]
    assert wordpiece_tokenize("a   unable\tb", wp_vocab) == ["a", "un", "##able", "b"]


def test_overlong_word_is_unknown(wp_vocab):
    assert wordpiece_tokenize("a" * 101, wp_vocab) == [UNK]


def test_detokenize():
    assert detokenize(["un", "##able"]) == "unable"
    assert detokenize(["a", "b"]) == "a b"
    assert detokenize([CLS, "a", SEP]) == "a"


def test_detokenize_leading_continuation_warns():
    with pytest.warns(UserWarning):
        assert detokenize(["##able", "x"]) == "able x"


@settings(max_examples=50, deadline=None)
@given(st.lists(st.sampled_from(["un", "able", "unable", "a", "x", "y"]), max_size=8))
def test_tokenize_detokenize_round_trip(words):
    vocab = Vocab.from_words(["un", "##able", "able", "a", "x", "y"])
    text = " ".join(words)
    assert detokenize(wordpiece_tokenize(text, vocab)) == text


def test_encode_pair_layout(wp_vocab):
    enc = encode_pair(["a", "b"], ["c"], wp_vocab)
    v = wp_vocab
    assert enc.ids.tolist() == [v.cls_id, v.id("a"), v.id("b"), v.sep_id, v.id("c"), v.sep_id]
    A, B = SEGMENT_A, SEGMENT_B
    assert enc.segments.tolist() == [A, A, A, A, B, B]
    assert enc.positions.tolist() == [0, 1, 2, 3, 0, 1]


def test_encode_pair_empty_mt(wp_vocab):
    enc = encode_pair(["a"], [], wp_vocab)
    v = wp_vocab
    assert enc.ids.tolist() == [v.cls_id, v.id("a"), v.sep_id, v.sep_id]
    assert enc.positions.tolist() == [0, 1, 2, 0]


def test_encode_pair_length_error(wp_vocab):
    with pytest.raises(LengthError):
        encode_pair(["a"] * 5, ["b"] * 5, wp_vocab, max_positions=12)
    assert len(encode_pair(["a"] * 5, ["b"] * 4, wp_vocab, max_positions=12)) == 12


def test_encode_target(wp_vocab):
    v = wp_vocab
    t = encode_target(["x", "y"], v)
    assert t.ids.tolist() == [v.cls_id, v.id("x"), v.id("y")]
    assert t.gold.tolist() == [v.id("x"), v.id("y"), v.sep_id]
    assert set(t.segments.tolist()) == {SEGMENT_B}
    empty = encode_target([], v)
    assert empty.ids.tolist() == [v.cls_id] and empty.gold.tolist() == [v.sep_id]
    with pytest.raises(LengthError):
        encode_target(["x"] * 4, v, max_positions=4)
