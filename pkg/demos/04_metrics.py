"""
TER and BLEU by hand
====================

TER counts insertions, deletions, substitutions and block shifts per
reference word. BLEU is the geometric mean of clipped n-gram precisions
times a brevity penalty; corpus scores add up counts before dividing.
"""

from bertape.metrics import bleu, corpus_scores, ngram_stats, ter

ref = "a b c".split()
hyp = "c a b".split()
print("TER with shifts:   ", round(ter(hyp, ref), 4))  # move "c" to the end: 1 / 3
print("TER without shifts:", round(ter(hyp, ref, shifts=False), 4))  # delete + insert: 2 / 3

# clipping: "the" appears once in the reference, so only one of three counts
matches, totals = ngram_stats("the the the".split(), "the cat".split())
print()
print("n-gram matches:", matches, "totals:", totals)
print("BLEU:", bleu([["the"] * 3], [["the", "cat"]]))

hyps = ["the cat sat on the mat", "a b c x"]
refs = ["the cat sat on a mat", "a b c d"]
print()
print(corpus_scores(hyps, refs).report(), end="")
