"""
Decoder sharing presets and their tie groups
============================================

Each preset wires the decoder differently to the encoder. Tied tensors are
one storage under several names, so they count once and move together;
initialised tensors start as copies and are free to drift apart.
"""

from bertape.model import PRESETS, PRESET_LABELS, ModelConfig, build_model, count_parameters

mc = ModelConfig(layers=2, hidden=64, heads=4, ff=256, vocab_size=1000, max_positions=64)
H = mc.hidden

print(f"{'preset':18} {'parameters':>10}  {'tie groups':>10}  label")
for name, sc in PRESETS.items():
    _, store = build_model(mc, sc)
    print(f"{name:18} {count_parameters(store):>10}  {len(store.tie_groups()):>10}  {PRESET_LABELS[name].strip()}")

# tying the decoder self-attention to the encoder's removes one attention
# block (four H x H matrices and four biases) per layer
_, init = build_model(mc, PRESETS["BERT_DEC_CA_INIT"])
_, shared = build_model(mc, PRESETS["SHARED_SA"])
print()
print("SHARED_SA saves", count_parameters(init) - count_parameters(shared),
      "parameters; L*(4H^2+4H) =", mc.layers * (4 * H * H + 4 * H))

# a tie group is a single tensor: writing through one name shows up in all
_, store = build_model(mc, PRESETS["SHARED_SA_CA"])
group = next(g for g in store.tie_groups() if g[0].endswith("layer0.self_attn.q.weight"))
print()
print("tie group:", group)
store[group[0]].data[0, 0] = 1.5
print("values seen through each name:", [float(store[n].data[0, 0]) for n in group])
