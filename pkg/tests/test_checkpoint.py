import numpy as np
import pytest

from bertape.checkpoint import (MAGIC, Checkpoint, checkpoint_from_store, import_weights, load_checkpoint,
                                model_from_checkpoint, model_metadata, read_name_mapping, save_checkpoint,
                                store_from_checkpoint)
from bertape.errors import DimensionError, FormatError
from bertape.model import PRESETS, build_model, encoder_parameter_names, preset

from support import random_pair, tiny_config, tiny_model


def _saved(tmp_path, name="SHARED_SA"):
    model, store = tiny_model(name, dtype=np.float32, seed=2)
    path = tmp_path / f"{name}.ckpt"
    save_checkpoint(checkpoint_from_store(store, model_metadata(model, step=7)), path)
    return model, store, path


@pytest.mark.parametrize("name", list(PRESETS))
def test_round_trip_is_byte_identical(tmp_path, name):
    _, _, path = _saved(tmp_path, name)
    again = tmp_path / "again.ckpt"
    save_checkpoint(load_checkpoint(path), again)
    assert again.read_bytes() == path.read_bytes()


def test_header_layout(tmp_path):
    _, store, path = _saved(tmp_path)
    blob = path.read_bytes()
    assert blob[:8] == MAGIC
    header = Checkpoint.from_bytes(blob).header()
    offsets = [e["offset"] for e in header["tensors"]]
    assert offsets == sorted(offsets) and offsets[0] == 0
    assert [e["name"] for e in header["tensors"]] == [n for n, _ in store.unique()]


def test_ties_rebuilt_on_load(tmp_path):
    _, store, path = _saved(tmp_path)
    loaded = store_from_checkpoint(load_checkpoint(path))
    assert sorted(map(sorted, loaded.tie_groups())) == sorted(map(sorted, store.tie_groups()))
    a, b = "encoder.layer1.self_attn.o.weight", "decoder.layer1.self_attn.o.weight"
    loaded[a].data[0, 0] = 123.0
    assert loaded[b].data[0, 0] == 123.0


def test_model_from_checkpoint_reproduces_outputs(tmp_path):
    model, _, path = _saved(tmp_path)
    clone = model_from_checkpoint(load_checkpoint(path))
    pair = random_pair(np.random.default_rng(0))
    assert clone.encode(pair).data.tobytes() == model.encode(pair).data.tobytes()
    assert clone.sharing == model.sharing and clone.config == model.config


@pytest.mark.parametrize("mangle", ["magic", "truncate", "trailing"])
def test_corrupt_files_rejected(tmp_path, mangle):
    _, _, path = _saved(tmp_path)
    blob = path.read_bytes()
    blob = {"magic": b"XXXXXXXX" + blob[8:], "truncate": blob[:-4], "trailing": blob + b"\0\0\0\0"}[mangle]
    with pytest.raises(FormatError):
        Checkpoint.from_bytes(blob)


def test_import_weights_with_mapping(tmp_path):
    mc = tiny_config()
    _, donor = tiny_model("TRANSFORMER", dtype=np.float32)
    names = encoder_parameter_names(mc)
    dump = {f"ext/{i}": donor[n].data.T if n.endswith("q.weight") else donor[n].data for i, n in enumerate(names)}
    lines = [f"ext/{i}\t{n}" + ("\tT" if n.endswith("q.weight") else "") for i, n in enumerate(names)]
    (tmp_path / "map.tsv").write_text("# external\tinternal\n" + "\n".join(lines) + "\n", encoding="utf-8")
    ckpt = import_weights(dump, read_name_mapping(tmp_path / "map.tsv"), mc)
    _, store = build_model(mc, preset("SHARED_SA"), pretrained=ckpt)
    for n in names:
        np.testing.assert_array_equal(store[n].data, donor[n].data)


def test_import_weights_reports_problems():
    mc = tiny_config()
    with pytest.raises(DimensionError, match="no mapping provides encoder.embeddings.word"):
        import_weights({}, [], mc)
    with pytest.raises(DimensionError, match="shape"):
        import_weights({"w": np.zeros((2, 2))}, [("w", "encoder.embeddings.word", False)], mc)


def test_bad_mapping_line(tmp_path):
    (tmp_path / "map.tsv").write_text("only-one-column\n", encoding="utf-8")
    with pytest.raises(FormatError, match="line 1"):
        read_name_mapping(tmp_path / "map.tsv")
