"""
Checkpoint files and tie reconstruction
=======================================

A checkpoint is a magic string, a length-prefixed JSON header and a raw
float32 payload. Only canonical tensors are stored; the header lists which
names alias them, so loading rebuilds the shared storage.
"""

import json
import struct
import tempfile
from pathlib import Path

from bertape.checkpoint import checkpoint_from_store, load_checkpoint, model_metadata, save_checkpoint, \
    store_from_checkpoint
from bertape.model import ModelConfig, build_model, preset

mc = ModelConfig(layers=1, hidden=16, heads=2, ff=32, vocab_size=50, max_positions=16)
model, store = build_model(mc, preset("SHARED_SA"))

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "model.ckpt"
    save_checkpoint(checkpoint_from_store(store, model_metadata(model, step=0)), path)
    blob = path.read_bytes()
    (hlen,) = struct.unpack("<Q", blob[8:16])
    header = json.loads(blob[16:16 + hlen])
    print("magic:", blob[:8], "header bytes:", hlen, "payload bytes:", len(blob) - 16 - hlen)
    print("first tensors:", [(e["name"], e["shape"], e["offset"]) for e in header["tensors"][:3]])
    print("tie groups:", len(header["ties"]))

    # loading and saving again reproduces the file byte for byte
    again = Path(tmp) / "again.ckpt"
    save_checkpoint(load_checkpoint(path), again)
    print("byte identical:", again.read_bytes() == blob)

    loaded = store_from_checkpoint(load_checkpoint(path))
    a, b = "encoder.layer0.self_attn.v.weight", "decoder.layer0.self_attn.v.weight"
    print("aliased after load:", loaded[a] is loaded[b])
