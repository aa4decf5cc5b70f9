"""Named-tensor checkpoint files.

Layout::

    b"BERTAPE1"                      8-byte magic
    <u8 little-endian>               header length in bytes
    header                           canonical JSON (UTF-8, sorted keys)
    payload                          little-endian float32 arrays, back to back

The header lists each canonical tensor with its dtype, shape and payload
offset (in header order, non-overlapping), the tie groups as
``canonical -> [alias, ...]``, the names subject to weight decay, and free
form metadata (configs, step). Serialisation is canonical, so loading and
saving a file reproduces it byte for byte.
"""

from __future__ import annotations

import json
import struct
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional

import numpy as np

from .errors import DimensionError, FormatError
from .model import Model, ModelConfig, ParameterStore, SharingConfig, _shape_of, encoder_parameter_names
from .tensor import Tensor

MAGIC = b"BERTAPE1"
DTYPE = "float32"
_LE_F32 = np.dtype("<f4")


@dataclass
class Checkpoint:
    tensors: "OrderedDict[str, np.ndarray]" = field(default_factory=OrderedDict)
    ties: Dict[str, List[str]] = field(default_factory=dict)
    decayed: List[str] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def header(self) -> dict:
        entries, offset = [], 0
        for name, arr in self.tensors.items():
            entries.append({"name": name, "dtype": DTYPE, "shape": list(arr.shape), "offset": offset})
            offset += arr.size * 4
        return {
            "decayed": list(self.decayed),
            "metadata": self.metadata,
            "tensors": entries,
            "ties": {k: list(v) for k, v in self.ties.items()},
        }

    def to_bytes(self) -> bytes:
        head = json.dumps(self.header(), sort_keys=True, separators=(",", ":"),
                          ensure_ascii=False, allow_nan=False).encode("utf-8")
        payload = b"".join(np.ascontiguousarray(a, dtype=_LE_F32).tobytes() for a in self.tensors.values())
        return MAGIC + struct.pack("<Q", len(head)) + head + payload

    @classmethod
    def from_bytes(cls, blob: bytes) -> "Checkpoint":
        if blob[:8] != MAGIC:
            raise FormatError("not a checkpoint file (bad magic)")
        if len(blob) < 16:
            raise FormatError("truncated checkpoint header")
        (hlen,) = struct.unpack("<Q", blob[8:16])
        try:
            header = json.loads(blob[16:16 + hlen].decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FormatError(f"unreadable checkpoint header: {exc}") from exc
        payload = memoryview(blob)[16 + hlen:]
        tensors: "OrderedDict[str, np.ndarray]" = OrderedDict()
        expected = 0
        for entry in header.get("tensors", []):
            name, shape, offset = entry["name"], tuple(entry["shape"]), entry["offset"]
            if entry.get("dtype") != DTYPE:
                raise FormatError(f"{name}: unsupported dtype {entry.get('dtype')!r}")
            if name in tensors:
                raise FormatError(f"tensor {name!r} listed twice")
            if offset != expected:
                raise FormatError(f"{name}: offset {offset} breaks header order (expected {expected})")
            nbytes = int(np.prod(shape, dtype=np.int64)) * 4
            if offset + nbytes > len(payload):
                raise FormatError(f"{name}: payload truncated")
            tensors[name] = np.frombuffer(payload[offset:offset + nbytes], dtype=_LE_F32).reshape(shape).astype(np.float32)
            expected = offset + nbytes
        if expected != len(payload):
            raise FormatError(f"{len(payload) - expected} trailing payload bytes")
        ties = {k: list(v) for k, v in header.get("ties", {}).items()}
        for canon in ties:
            if canon not in tensors:
                raise FormatError(f"tie group refers to unknown tensor {canon!r}")
        return cls(tensors, ties, list(header.get("decayed", [])), header.get("metadata", {}))


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    Path(path).write_bytes(ckpt.to_bytes())


def load_checkpoint(path) -> Checkpoint:
    return Checkpoint.from_bytes(Path(path).read_bytes())


def checkpoint_from_store(store: ParameterStore, metadata: Optional[dict] = None) -> Checkpoint:
    tensors = OrderedDict((name, t.data.astype(np.float32)) for name, t in store.unique())
    ties = {group[0]: group[1:] for group in store.tie_groups()}
    decayed = [name for name in tensors if store.is_decayed(name)]
    return Checkpoint(tensors, ties, decayed, dict(metadata or {}))


def store_from_checkpoint(ckpt: Checkpoint, dtype=np.float32) -> ParameterStore:
    """Rebuild a store; aliases listed in ``ties`` share storage again."""
    store = ParameterStore()
    decayed = set(ckpt.decayed)
    for name, arr in ckpt.tensors.items():
        store.add(name, Tensor(arr.astype(dtype), requires_grad=True, dtype=dtype), decay=name in decayed)
    # aliases are re-registered in name order of the canonical listing
    for canon, aliases in ckpt.ties.items():
        for alias in aliases:
            store.tie(alias, canon)
    return store


def model_metadata(model: Model, **extra) -> dict:
    meta = {"model_config": model.config.to_dict(), "sharing": model.sharing.to_dict()}
    meta.update(extra)
    return meta


def model_from_checkpoint(ckpt: Checkpoint, dtype=np.float32) -> Model:
    try:
        mc = ModelConfig.from_dict(ckpt.metadata["model_config"])
        sc = SharingConfig(**ckpt.metadata["sharing"])
    except KeyError as exc:
        raise FormatError(f"checkpoint metadata lacks {exc.args[0]!r}") from None
    store = store_from_checkpoint(ckpt, dtype)
    bad = [f"{n} {store[n].shape} != {_shape_of(n, mc)}"
           for n in encoder_parameter_names(mc) if n in store and store[n].shape != _shape_of(n, mc)]
    if bad:
        raise DimensionError("checkpoint tensors do not match its config: " + "; ".join(bad))
    return Model(mc, sc, store)


def read_name_mapping(path) -> List[tuple]:
    """Lines ``external<TAB>internal[<TAB>T]``; ``T`` transposes the array."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) not in (2, 3) or (len(parts) == 3 and parts[2] != "T"):
                raise FormatError(f"{path}: line {lineno}: expected 'external<TAB>internal[<TAB>T]'")
            rows.append((parts[0], parts[1], len(parts) == 3))
    return rows


def import_weights(dump: Mapping[str, np.ndarray], mapping: List[tuple], mc: ModelConfig,
                   metadata: Optional[dict] = None) -> Checkpoint:
    """Convert an external flat name -> array dump (e.g. an ``.npz``) into a
    checkpoint of encoder-side tensors, following an explicit name mapping."""
    tensors: "OrderedDict[str, np.ndarray]" = OrderedDict()
    problems = []
    for external, internal, transpose in mapping:
        if external not in dump:
            problems.append(f"missing external tensor {external}")
            continue
        arr = np.asarray(dump[external], dtype=np.float32)
        if transpose:
            arr = arr.T
        want = _shape_of(internal, mc)
        if arr.shape != want:
            problems.append(f"{external} -> {internal}: shape {arr.shape} != {want}")
            continue
        tensors[internal] = np.ascontiguousarray(arr)
    required = encoder_parameter_names(mc)
    problems += [f"no mapping provides {n}" for n in required if n not in tensors]
    if problems:
        raise DimensionError("; ".join(problems))
    ordered = OrderedDict((n, tensors[n]) for n in required)
    meta = {"model_config": mc.to_dict(), "source": "import-weights"}
    meta.update(metadata or {})
    decayed = [n for n in required if n.endswith(("weight", "word", "position", "segment"))]
    return Checkpoint(ordered, {}, decayed, meta)
