import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bertape.errors import FormatError, ParameterError
from bertape.metrics import bleu, corpus_scores, edit_distance, score_corpus, ter, ter_edits

from oracles import levenshtein, naive_bleu

tokens = st.lists(st.sampled_from("abcdefg"), min_size=1, max_size=8)


def test_ter_examples():
    assert ter(list("abcd"), list("abcd")) == 0.0
    assert ter(list("abcd"), list("axcd")) == 0.25
    assert ter(list("cab"), list("abc")) == pytest.approx(1 / 3)
    assert ter(list("cab"), list("abc"), shifts=False) == pytest.approx(2 / 3)


def test_ter_empty_ref():
    with pytest.raises(ParameterError):
        ter(["a"], [])


def test_ter_is_case_sensitive():
    assert ter(["The"], ["the"]) == 1.0


def test_bleu_examples():
    assert bleu([["a", "b", "c", "d"]], [["a", "b", "c", "d"]]) == pytest.approx(100.0)
    assert bleu([["the"] * 3], [["the", "cat"]]) == 0.0
    assert bleu([[]], [["a", "b"]]) == 0.0


def test_bleu_errors():
    with pytest.raises(ParameterError):
        bleu([["a"]], [])
    with pytest.raises(ParameterError):
        bleu([], [])


def test_bleu_brevity_penalty_value():
    ref = "a b c d e f".split()
    hyp = "a b c d e".split()
    assert bleu([hyp], [ref]) == pytest.approx(100 * np.exp(1 - 6 / 5), rel=1e-12)


def test_corpus_aggregates_before_dividing():
    score = corpus_scores(["a b c x", "a b c d e f"], ["a b c d", "a b c d e f"])
    assert score.ter == pytest.approx(10.0)


def test_score_corpus_files(tmp_path):
    hyp, ref = tmp_path / "hyp.txt", tmp_path / "ref.txt"
    hyp.write_text("a b c\nd e f g\n", encoding="utf-8")
    ref.write_text("a b c\nd e f g\n", encoding="utf-8")
    report = score_corpus(hyp, ref).report()
    assert report == "TER\tBLEU\n0.00\t100.00\n"
    ref.write_text("a b c\n", encoding="utf-8")
    with pytest.raises(FormatError):
        score_corpus(hyp, ref)


@settings(max_examples=100, deadline=None)
@given(tokens)
def test_identity_scores(x):
    assert ter(x, x) == 0.0
    if len(x) >= 4:
        assert bleu([x], [x]) == pytest.approx(100.0)


@settings(max_examples=100, deadline=None)
@given(tokens, tokens)
def test_shifts_never_hurt(h, r):
    assert ter_edits(h, r) <= ter_edits(h, r, shifts=False)
    assert ter_edits(h, r, shifts=False) == levenshtein(h, r) == edit_distance(h, r)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(tokens, tokens), min_size=1, max_size=4), st.permutations("abcdefg"))
def test_bleu_relabeling_invariance_and_oracle(pairs, perm):
    hyps, refs = [h for h, _ in pairs], [r for _, r in pairs]
    relabel = dict(zip("abcdefg", perm))
    score = bleu(hyps, refs)
    assert score == pytest.approx(naive_bleu(hyps, refs), abs=1e-9)
    mapped = bleu([[relabel[t] for t in h] for h in hyps], [[relabel[t] for t in r] for r in refs])
    assert mapped == pytest.approx(score, abs=1e-12)
