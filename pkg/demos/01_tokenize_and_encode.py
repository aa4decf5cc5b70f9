"""
Tokenizing a triplet and laying out the encoder input
=====================================================

A WordPiece vocabulary splits unknown words greedily into the longest
known pieces. The encoder reads source and MT as one sequence; positions
restart at the first MT token and the segment id flips from A to B there.
"""

from bertape.tokenizer import Vocab, detokenize, encode_pair, encode_target, wordpiece_tokenize

vocab = Vocab.from_words(["the", "house", "##s", "das", "haus", "hauser", "##er", "un", "##able"])
print("vocabulary size:", len(vocab))

# greedy longest match: "houses" is not a word in the vocabulary, "house" + "##s" is
for word in ["houses", "unable", "zebra"]:
    print(f"{word!r:10} -> {wordpiece_tokenize(word, vocab)}")

src = wordpiece_tokenize("the houses", vocab)
mt = wordpiece_tokenize("das hauser", vocab)
pair = encode_pair(src, mt, vocab)

print()
print(f"{'token':8} {'segment':>7} {'position':>8}")
for tok, seg, pos in zip(vocab.tokens(pair.ids), pair.segments, pair.positions):
    print(f"{tok:8} {seg:>7} {pos:>8}")

# the decoder is fed [CLS] + pe and predicts pe + [SEP]
target = encode_target(wordpiece_tokenize("das haus", vocab), vocab)
print()
print("decoder input:", vocab.tokens(target.ids))
print("gold output:  ", vocab.tokens(target.gold))
print("detokenized:  ", detokenize(vocab.tokens(target.gold)))
