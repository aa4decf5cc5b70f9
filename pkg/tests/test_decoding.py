import numpy as np
import pytest

from bertape.decoding import Hypothesis, beam_search, greedy_decode, search, translate_corpus, write_outputs
from bertape.errors import ParameterError

from support import random_pair, random_triplets, tiny_model, toy_vocab


class State:
    """Prefixes of the live hypotheses, for a lookup-table language model."""

    def __init__(self, prefixes):
        self.prefixes = prefixes

    def select(self, rows):
        return State([list(self.prefixes[r]) for r in rows])


def _run(table, default, beam, max_len):
    def step(state, last):
        prefixes = [p + [int(t)] for p, t in zip(state.prefixes, last)]
        probs = np.array([table.get(tuple(p), default) for p in prefixes], dtype=np.float64)
        return np.log(probs + 1e-300), State(prefixes)

    return search(step, State([[]]), bos_id=0, eos_id=1, beam=beam, max_len=max_len)


def test_search_prefers_longer_when_normalised_score_wins():
    # ids: 0 BOS, 1 EOS, 2 a, 3 b
    table = {
        (0,): [0, 0.4, 0.6, 0.0],
        (0, 2): [0, 0.9, 0.1, 0.0],
    }
    best, pool = _run(table, [0, 1.0, 0, 0], beam=4, max_len=5)
    assert best.tokens == [0, 2, 1]
    assert best.score == pytest.approx(np.log(0.6 * 0.9) / 2)
    assert best.score == max(h.score for h in pool)


def test_search_forces_eos_at_max_len():
    table = {(0,): [0, 0.0, 1.0, 0.0], (0, 2): [0, 0.0, 1.0, 0.0]}
    best, _ = _run(table, [0, 0.0, 1.0, 0.0], beam=2, max_len=2)
    assert best.tokens == [0, 2, 1] and best.finished


def test_hypothesis_invariants_on_pool():
    rng = np.random.default_rng(0)
    table = {}
    default = rng.dirichlet(np.ones(4))
    best, pool = _run(table, default, beam=3, max_len=4)
    for h in pool:
        assert h.finished and h.tokens[-1] == 1 and h.logp <= 0
        assert h.score == pytest.approx(h.logp / (len(h.tokens) - 1))


def test_beam_must_be_positive():
    model, _ = tiny_model()
    with pytest.raises(ParameterError):
        beam_search(model, random_pair(np.random.default_rng(0)), beam=0)


def test_hypothesis_score():
    h = Hypothesis([2, 7, 3], -3.0, True)
    assert h.length == 2 and h.score == -1.5


@pytest.mark.parametrize("seed", range(5))
def test_beam_one_is_greedy(seed):
    rng = np.random.default_rng(seed)
    model, _ = tiny_model("SHARED_SA", seed=seed, dtype=np.float32)
    for _, t in model.store.unique():
        t.data[...] = rng.normal(0, 0.5, size=t.shape)
    pair = random_pair(rng)
    assert beam_search(model, pair, beam=1, max_len=8) == greedy_decode(model, pair, max_len=8)


def test_certain_sep_gives_empty_output():
    model, store = tiny_model("TRANSFORMER", dtype=np.float32)
    last = f"decoder.layer{model.config.layers - 1}.ff_norm"
    direction = np.zeros(model.config.hidden, dtype=np.float32)
    direction[0] = 1.0
    store[f"{last}.gain"].data[...] = 0.0
    store[f"{last}.bias"].data[...] = direction
    store["encoder.embeddings.word"].data[model.config.sep_id] = 100.0 * direction
    assert beam_search(model, random_pair(np.random.default_rng(1)), beam=8) == []


def test_larger_beam_never_worse():
    worse = 0
    for seed in range(20):
        rng = np.random.default_rng(100 + seed)
        model, _ = tiny_model("BERT_DEC", seed=seed, dtype=np.float32)
        for _, t in model.store.unique():
            t.data[...] = rng.normal(0, 0.5, size=t.shape)
        pair = random_pair(rng)
        _, wide, _ = beam_search(model, pair, beam=8, max_len=6, return_pool=True)
        _, narrow, _ = beam_search(model, pair, beam=1, max_len=6, return_pool=True)
        worse += wide.score < narrow.score - 1e-12
    assert worse == 0


def test_max_len_clamped_to_position_table():
    model, _ = tiny_model(max_positions=8, dtype=np.float32)
    out = beam_search(model, random_pair(np.random.default_rng(2), max_len=2), beam=2, max_len=100)
    assert len(out) < 8


def _trained_free_model():
    model, _ = tiny_model("SHARED_SA", seed=4, dtype=np.float32)
    rng = np.random.default_rng(4)
    for _, t in model.store.unique():
        t.data[...] = rng.normal(0, 0.5, size=t.shape)
    return model


def test_translate_corpus_contracts():
    vocab = toy_vocab()
    model = _trained_free_model()
    assert translate_corpus(model, [], vocab) == []
    items = random_triplets(np.random.default_rng(9), 10, vocab)
    first = translate_corpus(model, items, vocab, beam=2)
    assert translate_corpus(model, items, vocab, beam=2) == first
    order = np.random.default_rng(1).permutation(10)
    shuffled = translate_corpus(model, [items[i] for i in order], vocab, beam=2)
    assert shuffled == [first[i] for i in order]
    assert translate_corpus(model, items, vocab, beam=2, workers=3) == first


def test_translate_corpus_isolates_failures(tmp_path):
    from bertape.data import Triplet

    vocab = toy_vocab()
    model = _trained_free_model()
    items = [Triplet("w1", "w2", "w3"), Triplet(" ".join(["w1"] * 20), "w2", "w3"), Triplet("w4", "w5", "w6")]
    with pytest.warns(UserWarning, match="translation failed"):
        out = translate_corpus(model, items, vocab, beam=2)
    assert out[1] is None and out[0] is not None and out[2] is not None
    write_outputs(out, tmp_path / "out.txt")
    lines = (tmp_path / "out.txt").read_text(encoding="utf-8").split("\n")
    assert len(lines) == 4 and lines[1] == ""
