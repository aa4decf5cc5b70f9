"""
Overfitting a copy-with-edits corpus
====================================

The fixture pairs short English sentences with word-by-word "German"
post-edits; the MT side is the post-edit with one or two scripted errors.
A toy model with the SHARED_SA preset learns to undo the errors. The full
2000 steps take a few minutes on one CPU core; pass a smaller step count
as the first argument for a quicker look.
"""

import sys
import time

from bertape.data import encode_triplets
from bertape.decoding import translate_corpus
from bertape.fixtures import copy_edit_corpus, lexicon_vocab
from bertape.metrics import corpus_scores
from bertape.model import ModelConfig, build_model, preset
from bertape.training import TrainConfig, train

steps = int(sys.argv[1]) if len(sys.argv) > 1 else 2000
triplets = copy_edit_corpus(64, seed=0)
vocab = lexicon_vocab()

for t in triplets[:3]:
    print(f"src: {t.src}\nmt:  {t.mt}\npe:  {t.pe}\n")

mc = ModelConfig.for_vocab(vocab, layers=2, hidden=64, heads=4, ff=256, max_positions=64)
model, store = build_model(mc, preset("SHARED_SA"), seed=0)
cfg = TrainConfig(warmup_steps=steps // 10, peak_lr=1e-3, max_steps=steps, checkpoint_interval=steps,
                  ema_decay=0.05)

start = time.perf_counter()
result = train(model, store, encode_triplets(triplets, vocab), cfg)
print(f"trained {steps} steps in {time.perf_counter() - start:.0f} s; "
      f"loss {result.losses[0]:.3f} -> {result.losses[-1]:.3f}")

# decode with the EMA shadow, as a saved checkpoint would be
ema_model = result.model.with_store(result.shadow)
hyps = translate_corpus(ema_model, triplets, vocab, beam=8)
print(corpus_scores(hyps, [t.pe for t in triplets]).report(), end="")
print(f"verbatim: {sum(h == t.pe for h, t in zip(hyps, triplets))}/{len(triplets)}")
for h, t in list(zip(hyps, triplets))[:3]:
    print(f"mt:  {t.mt}\nout: {h}\n")
