"""BERT-shaped encoder-decoder for automatic post-editing.

A single encoder reads ``[CLS] src [SEP] mt [SEP]``; a causal decoder with
context attention generates pe. Word, position and segment embeddings are
shared between both sides, and the word embedding doubles (transposed) as
the output projection.

Which decoder blocks are copied from the encoder and which are aliased to
it is declared by a :class:`SharingConfig`. Aliasing is literal: tied names
in the :class:`ParameterStore` resolve to the same :class:`Tensor`, so one
optimizer update moves every member of the group.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import asdict, dataclass, fields
from typing import Dict, Iterator, List, Mapping, Optional, Tuple

import numpy as np

from . import tensor as T
from .errors import ConfigError, DimensionError, LengthError
from .tensor import Tensor

ATTN_PROJECTIONS = ("q", "k", "v", "o")
FF_PROJECTIONS = ("in", "out")


@dataclass(frozen=True)
class ModelConfig:
    layers: int = 12
    hidden: int = 768
    heads: int = 12
    ff: int = 3072
    vocab_size: int = 119547
    max_positions: int = 512
    eps: float = 1e-12
    dropout: float = 0.1
    pad_id: int = 0
    cls_id: int = 2
    sep_id: int = 3
    reserved_ids: Tuple[int, ...] = (0, 1, 2, 3, 4)

    def __post_init__(self):
        if self.heads < 1 or self.hidden % self.heads:
            raise ConfigError(f"hidden size {self.hidden} not divisible by {self.heads} heads")
        if min(self.hidden, self.ff, self.vocab_size, self.max_positions) < 1 or self.layers < 0:
            raise ConfigError(f"non-positive model dimension in {self}")
        object.__setattr__(self, "reserved_ids", tuple(int(i) for i in self.reserved_ids))

    @property
    def head_dim(self) -> int:
        return self.hidden // self.heads

    @classmethod
    def toy(cls, vocab_size: int, **overrides) -> "ModelConfig":
        """L=2, H=64, A=4, F=256."""
        base = dict(layers=2, hidden=64, heads=4, ff=256, vocab_size=vocab_size, max_positions=64)
        base.update(overrides)
        return cls(**base)

    @classmethod
    def for_vocab(cls, vocab, **overrides) -> "ModelConfig":
        ids = dict(
            vocab_size=len(vocab),
            pad_id=vocab.pad_id,
            cls_id=vocab.cls_id,
            sep_id=vocab.sep_id,
            reserved_ids=tuple(sorted(vocab.reserved_ids)),
        )
        ids.update(overrides)
        return cls(**ids)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["reserved_ids"] = list(self.reserved_ids)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: (tuple(v) if k == "reserved_ids" else v) for k, v in d.items() if k in known})


@dataclass(frozen=True)
class SharingConfig:
    decoder_init: str = "random"  # random | bert
    context_attn_init: str = "random"  # random | from_self_attn
    tie_self_attn: bool = False
    tie_context_to_self: bool = False
    tie_feed_forward: bool = False

    def __post_init__(self):
        if self.decoder_init not in ("random", "bert"):
            raise ConfigError(f"decoder_init must be 'random' or 'bert', got {self.decoder_init!r}")
        if self.context_attn_init not in ("random", "from_self_attn"):
            raise ConfigError(
                f"context_attn_init must be 'random' or 'from_self_attn', got {self.context_attn_init!r}"
            )
        if self.tie_context_to_self and not self.tie_self_attn:
            raise ConfigError("tying context attention to self-attention requires tie_self_attn")

    def to_dict(self) -> dict:
        return asdict(self)


# Row order of the ablation table.
PRESETS: "OrderedDict[str, SharingConfig]" = OrderedDict(
    TRANSFORMER=SharingConfig(),
    BERT_DEC=SharingConfig(decoder_init="bert"),
    BERT_DEC_CA_INIT=SharingConfig(decoder_init="bert", context_attn_init="from_self_attn"),
    SHARED_SA=SharingConfig(decoder_init="bert", context_attn_init="from_self_attn", tie_self_attn=True),
    SHARED_SA_CA=SharingConfig(
        decoder_init="bert", context_attn_init="from_self_attn", tie_self_attn=True, tie_context_to_self=True
    ),
    SHARED_SA_FF=SharingConfig(
        decoder_init="bert", context_attn_init="from_self_attn", tie_self_attn=True, tie_context_to_self=True,
        tie_feed_forward=True,
    ),
)

PRESET_LABELS = {
    "TRANSFORMER": "Transformer decoder",
    "BERT_DEC": "Pre-trained BERT",
    "BERT_DEC_CA_INIT": "  with CA <- SA",
    "SHARED_SA": "  and SA <-> Encoder SA",
    "SHARED_SA_CA": "  and CA <-> SA",
    "SHARED_SA_FF": "  and FF <-> Encoder FF",
}


def preset(name: str) -> SharingConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown sharing preset {name!r}; choose from {', '.join(PRESETS)}") from None


class ParameterStore:
    """Named parameters; several names may alias one tensor (a tie group).

    The first name registered for a tensor is its canonical name.
    """

    def __init__(self):
        self._tensors: "OrderedDict[str, Tensor]" = OrderedDict()
        self._canonical: Dict[int, str] = {}
        self._decayed: set = set()

    def add(self, name: str, tensor: Tensor, decay: bool = False) -> Tensor:
        if name in self._tensors:
            raise KeyError(f"parameter {name!r} already registered")
        if id(tensor) in self._canonical:
            raise ValueError(f"{name!r}: tensor already registered; use tie()")
        self._tensors[name] = tensor
        self._canonical[id(tensor)] = name
        if decay:
            self._decayed.add(name)
        return tensor

    def tie(self, name: str, target: str) -> Tensor:
        """Register ``name`` as another handle on ``target``'s storage."""
        if name in self._tensors:
            raise KeyError(f"parameter {name!r} already registered")
        tensor = self._tensors[target]
        self._tensors[name] = tensor
        return tensor

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __len__(self) -> int:
        return len(self._tensors)

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def names(self) -> List[str]:
        return list(self._tensors)

    def canonical(self, name: str) -> str:
        return self._canonical[id(self._tensors[name])]

    def unique(self) -> List[Tuple[str, Tensor]]:
        """(canonical name, tensor) pairs, one per storage, in registration order."""
        return [(n, t) for n, t in self._tensors.items() if self._canonical[id(t)] == n]

    def tie_groups(self) -> List[List[str]]:
        groups: "OrderedDict[str, List[str]]" = OrderedDict()
        for name, t in self._tensors.items():
            groups.setdefault(self._canonical[id(t)], []).append(name)
        return [g for g in groups.values() if len(g) > 1]

    def is_decayed(self, name: str) -> bool:
        return self.canonical(name) in self._decayed

    def zero_grad(self) -> None:
        for _, t in self.unique():
            t.grad = None

    def copy(self, dtype=None) -> "ParameterStore":
        """Deep copy with the same tie topology."""
        out = ParameterStore()
        for name, t in self._tensors.items():
            canon = self._canonical[id(t)]
            if canon == name:
                data = t.data.astype(dtype) if dtype is not None else t.data.copy()
                out.add(name, Tensor(data, requires_grad=t.requires_grad, dtype=data.dtype),
                        decay=name in self._decayed)
            else:
                out.tie(name, canon)
        return out

    def state(self) -> Dict[str, np.ndarray]:
        return {n: t.data for n, t in self.unique()}


def count_parameters(store: ParameterStore, trainable_only: bool = True) -> int:
    """Number of scalar values over unique storages (ties count once)."""
    return int(sum(t.data.size for _, t in store.unique() if t.requires_grad or not trainable_only))


# ---------------------------------------------------------------------------
# parameter naming


def _attn_names(prefix: str) -> List[str]:
    return [f"{prefix}.{p}.{kind}" for p in ATTN_PROJECTIONS for kind in ("weight", "bias")]


def _ff_names(prefix: str) -> List[str]:
    return [f"{prefix}.{p}.{kind}" for p in FF_PROJECTIONS for kind in ("weight", "bias")]


def _norm_names(prefix: str) -> List[str]:
    return [f"{prefix}.gain", f"{prefix}.bias"]


EMBEDDING_NAMES = ("word", "position", "segment", "norm.gain", "norm.bias")


def encoder_parameter_names(mc: ModelConfig) -> List[str]:
    """Every name an encoder-side (pretrained) checkpoint must provide."""
    names = [f"encoder.embeddings.{n}" for n in EMBEDDING_NAMES]
    for layer in range(mc.layers):
        p = f"encoder.layer{layer}"
        names += _attn_names(f"{p}.self_attn") + _norm_names(f"{p}.self_attn_norm")
        names += _ff_names(f"{p}.ff") + _norm_names(f"{p}.ff_norm")
    return names


def _shape_of(name: str, mc: ModelConfig) -> Tuple[int, ...]:
    H = mc.hidden
    leaf = name.split(".")
    if name.endswith("embeddings.word"):
        return (mc.vocab_size, H)
    if name.endswith("embeddings.position"):
        return (mc.max_positions, H)
    if name.endswith("embeddings.segment"):
        return (2, H)
    if leaf[-2] == "in":
        return (H, mc.ff) if leaf[-1] == "weight" else (mc.ff,)
    if leaf[-2] == "out":
        return (mc.ff, H) if leaf[-1] == "weight" else (H,)
    if leaf[-1] == "weight":
        return (H, H)
    return (H,)


def _is_matrix(name: str) -> bool:
    return name.endswith("weight") or name.split(".")[-1] in ("word", "position", "segment")


def truncated_normal(rng: np.random.Generator, shape, std: float = 0.02) -> np.ndarray:
    """Normal(0, std) resampled outside two standard deviations."""
    z = rng.standard_normal(shape)
    bad = np.abs(z) > 2.0
    while bad.any():
        z[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(z) > 2.0
    return z * std


def _fresh(name: str, mc: ModelConfig, rng: np.random.Generator, dtype) -> np.ndarray:
    shape = _shape_of(name, mc)
    if _is_matrix(name):
        return truncated_normal(rng, shape).astype(dtype)
    if name.endswith("gain"):
        return np.ones(shape, dtype=dtype)
    return np.zeros(shape, dtype=dtype)


def _decays(name: str) -> bool:
    """Weight decay never touches biases or layer-norm parameters."""
    return _is_matrix(name)


# ---------------------------------------------------------------------------
# construction


def build_model(mc: ModelConfig, sc: SharingConfig, pretrained=None, seed: int = 0,
                dtype=np.float32) -> Tuple["Model", ParameterStore]:
    """Create parameters for ``mc`` wired according to ``sc``.

    ``pretrained`` may be a name -> array mapping or an object with a
    ``tensors`` mapping (a loaded checkpoint); it must provide every
    encoder-side name. Without it the encoder is randomly initialised and
    plays the role of the pretrained model for the decoder strategies.
    """
    rng = np.random.default_rng(seed)
    store = ParameterStore()

    source: Optional[Mapping[str, np.ndarray]] = None
    if pretrained is not None:
        source = getattr(pretrained, "tensors", pretrained)
        enc_names = encoder_parameter_names(mc)
        missing = [n for n in enc_names if n not in source]
        bad = [f"{n} {tuple(np.shape(source[n]))} != {_shape_of(n, mc)}"
               for n in enc_names if n in source and tuple(np.shape(source[n])) != _shape_of(n, mc)]
        if missing or bad:
            raise DimensionError(
                "pretrained checkpoint does not match the model: "
                + "; ".join([f"missing {n}" for n in missing] + bad)
            )

    def new(name: str, decay: bool) -> Tensor:
        data = np.asarray(source[name], dtype=dtype).copy() if source is not None else _fresh(name, mc, rng, dtype)
        return store.add(name, Tensor(data, requires_grad=True, dtype=dtype), decay=decay and _decays(name))

    def fresh(name: str) -> Tensor:
        return store.add(name, Tensor(_fresh(name, mc, rng, dtype), requires_grad=True, dtype=dtype))

    def copied(name: str, origin: str) -> Tensor:
        data = store[origin].data.copy()
        return store.add(name, Tensor(data, requires_grad=True, dtype=dtype), decay=_decays(name))

    for n in EMBEDDING_NAMES:
        new(f"encoder.embeddings.{n}", decay=True)
    for layer in range(mc.layers):
        p = f"encoder.layer{layer}"
        for name in (_attn_names(f"{p}.self_attn") + _norm_names(f"{p}.self_attn_norm")
                     + _ff_names(f"{p}.ff") + _norm_names(f"{p}.ff_norm")):
            new(name, decay=True)

    for n in EMBEDDING_NAMES:
        store.tie(f"decoder.embeddings.{n}", f"encoder.embeddings.{n}")
    store.tie("decoder.output.weight", "encoder.embeddings.word")

    bert = sc.decoder_init == "bert"
    for layer in range(mc.layers):
        enc, dec = f"encoder.layer{layer}", f"decoder.layer{layer}"

        for e_name, d_name in zip(_attn_names(f"{enc}.self_attn"), _attn_names(f"{dec}.self_attn")):
            if sc.tie_self_attn:
                store.tie(d_name, e_name)
            elif bert:
                copied(d_name, e_name)
            else:
                fresh(d_name)
        for e_name, d_name in zip(_norm_names(f"{enc}.self_attn_norm"), _norm_names(f"{dec}.self_attn_norm")):
            copied(d_name, e_name) if bert else fresh(d_name)

        # context attention draws its initial values from the decoder's own
        # self-attention, which is the corresponding pretrained block
        sa_names = _attn_names(f"{dec}.self_attn")
        for s_name, c_name in zip(sa_names, _attn_names(f"{dec}.context_attn")):
            if sc.tie_context_to_self:
                store.tie(c_name, store.canonical(s_name))
            elif sc.context_attn_init == "from_self_attn":
                copied(c_name, s_name)
            else:
                fresh(c_name)
        for s_name, c_name in zip(_norm_names(f"{dec}.self_attn_norm"), _norm_names(f"{dec}.context_attn_norm")):
            copied(c_name, s_name) if sc.context_attn_init == "from_self_attn" else fresh(c_name)

        for e_name, d_name in zip(_ff_names(f"{enc}.ff"), _ff_names(f"{dec}.ff")):
            if sc.tie_feed_forward:
                store.tie(d_name, e_name)
            elif bert:
                copied(d_name, e_name)
            else:
                fresh(d_name)
        for e_name, d_name in zip(_norm_names(f"{enc}.ff_norm"), _norm_names(f"{dec}.ff_norm")):
            copied(d_name, e_name) if bert else fresh(d_name)

    return Model(mc, sc, store), store


# ---------------------------------------------------------------------------
# forward passes


@dataclass
class DecoderState:
    """Key/value caches for incremental decoding of ``B`` hypotheses."""

    memory_kv: List[Tuple[np.ndarray, np.ndarray]]
    self_kv: List[Tuple[Optional[np.ndarray], Optional[np.ndarray]]]
    enc_pad: np.ndarray
    length: int = 0

    def select(self, rows: np.ndarray) -> "DecoderState":
        """Reorder/duplicate hypotheses (beam bookkeeping)."""
        return DecoderState(
            memory_kv=[(k[rows], v[rows]) for k, v in self.memory_kv],
            self_kv=[(None, None) if k is None else (k[rows], v[rows]) for k, v in self.self_kv],
            enc_pad=self.enc_pad[rows],
            length=self.length,
        )


def _batched(*arrays: np.ndarray) -> Tuple[bool, list]:
    squeeze = np.ndim(arrays[0]) == 1
    return squeeze, [np.atleast_2d(np.asarray(a)) for a in arrays]


class Model:
    def __init__(self, config: ModelConfig, sharing: SharingConfig, store: ParameterStore):
        self.config = config
        self.sharing = sharing
        self.store = store

    def with_store(self, store: ParameterStore) -> "Model":
        return Model(self.config, self.sharing, store)

    @property
    def dtype(self):
        return self.store["encoder.embeddings.word"].dtype

    # -- building blocks -------------------------------------------------
    def _linear(self, x: Tensor, prefix: str, exact: bool) -> Tensor:
        w, b = self.store[f"{prefix}.weight"], self.store[f"{prefix}.bias"]
        lead = x.shape[:-1]
        flat = x.reshape(-1, x.shape[-1])
        return (T.matmul(flat, w, rowwise=exact) + b).reshape(*lead, w.shape[1])

    def _norm(self, x: Tensor, prefix: str) -> Tensor:
        return T.layer_norm(x, self.store[f"{prefix}.gain"], self.store[f"{prefix}.bias"], self.config.eps)

    def _dropout(self, x: Tensor, training: bool, rng) -> Tensor:
        return T.dropout(x, self.config.dropout, training, rng)

    def _split_heads(self, x: Tensor) -> Tensor:
        B, L, _ = x.shape
        return x.reshape(B, L, self.config.heads, self.config.head_dim).transpose(0, 2, 1, 3)

    def _merge_heads(self, x: Tensor) -> Tensor:
        B, _, L, _ = x.shape
        return x.transpose(0, 2, 1, 3).reshape(B, L, self.config.hidden)

    def _attend(self, q: Tensor, k: Tensor, v: Tensor, blocked: Optional[np.ndarray],
                training: bool, rng, exact: bool, causal: bool = False) -> Tensor:
        if exact and causal:
            # Query row i only ever sees keys 0..i, so each row is computed
            # over exactly those keys. Masked zeros would otherwise change
            # the summation order and break bitwise agreement with the
            # incremental decoder, which never sees future keys at all.
            rows = []
            for i in range(q.shape[-2]):
                sub = None if blocked is None else blocked[..., i:i + 1, :i + 1]
                rows.append(self._attend(T.narrow(q, -2, i, i + 1), T.narrow(k, -2, 0, i + 1),
                                         T.narrow(v, -2, 0, i + 1), sub, training, rng, exact))
            return T.concat(rows, axis=-2)
        scores = T.matmul(q, T.swapaxes(k, -1, -2), rowwise=exact) * (1.0 / math.sqrt(self.config.head_dim))
        if blocked is not None:
            scores = T.masked_fill(scores, blocked, -np.inf)
        probs = self._dropout(T.softmax(scores, axis=-1), training, rng)
        return T.matmul(probs, v, rowwise=exact)

    def multi_head_attention(self, queries_in: Tensor, keys_values_in: Tensor,
                             blocked: Optional[np.ndarray], prefix: str,
                             training: bool = False, rng=None, causal: bool = False) -> Tensor:
        """Scaled dot-product attention with the projections stored under ``prefix``.

        ``blocked`` is a boolean mask broadcastable to (B, heads, Tq, Tk); True
        entries are excluded before the softmax. ``causal`` declares that
        ``blocked`` includes a causal mask over equal-length queries and keys.
        """
        exact = not training
        q = self._split_heads(self._linear(queries_in, f"{prefix}.q", exact))
        k = self._split_heads(self._linear(keys_values_in, f"{prefix}.k", exact))
        v = self._split_heads(self._linear(keys_values_in, f"{prefix}.v", exact))
        ctx = self._attend(q, k, v, blocked, training, rng, exact, causal)
        return self._linear(self._merge_heads(ctx), f"{prefix}.o", exact)

    def _feed_forward(self, x: Tensor, prefix: str, training: bool, rng) -> Tensor:
        exact = not training
        h = T.gelu(self._linear(x, f"{prefix}.in", exact))
        return self._linear(h, f"{prefix}.out", exact)

    def embed(self, ids, segments, positions, side: str = "encoder", training: bool = False, rng=None) -> Tensor:
        ids, segments, positions = (np.asarray(a) for a in (ids, segments, positions))
        if positions.size and positions.max() >= self.config.max_positions:
            raise LengthError(
                f"position {int(positions.max())} outside the table of {self.config.max_positions}"
            )
        p = f"{side}.embeddings"
        x = (T.take_rows(self.store[f"{p}.word"], ids)
             + T.take_rows(self.store[f"{p}.position"], positions)
             + T.take_rows(self.store[f"{p}.segment"], segments))
        x = T.layer_norm(x, self.store[f"{p}.norm.gain"], self.store[f"{p}.norm.bias"], self.config.eps)
        return self._dropout(x, training, rng)

    # -- encoder ---------------------------------------------------------
    def encode(self, ids, segments=None, positions=None, pad_mask=None,
               training: bool = False, rng=None) -> Tensor:
        """Memory of shape (B, S, H), or (S, H) for a single unbatched pair.

        Accepts an :class:`EncodedPair` in place of ``ids``.
        """
        if hasattr(ids, "segments"):
            ids, segments, positions = ids.ids, ids.segments, ids.positions
        squeeze, (ids, segments, positions) = _batched(ids, segments, positions)
        if pad_mask is None:
            pad_mask = np.zeros(ids.shape, dtype=bool)
        pad_mask = np.atleast_2d(pad_mask)
        blocked = pad_mask[:, None, None, :]
        x = self.embed(ids, segments, positions, "encoder", training, rng)
        for layer in range(self.config.layers):
            p = f"encoder.layer{layer}"
            a = self.multi_head_attention(x, x, blocked, f"{p}.self_attn", training, rng)
            x = self._norm(x + self._dropout(a, training, rng), f"{p}.self_attn_norm")
            f = self._feed_forward(x, f"{p}.ff", training, rng)
            x = self._norm(x + self._dropout(f, training, rng), f"{p}.ff_norm")
        return x.reshape(x.shape[1:]) if squeeze else x

    # -- decoder ---------------------------------------------------------
    def decode_train(self, memory: Tensor, ids, segments=None, positions=None,
                     enc_pad=None, dec_pad=None, training: bool = False, rng=None) -> Tensor:
        """Teacher-forced logits of shape (B, T, V), or (T, V) when unbatched.

        Accepts an :class:`EncodedTarget` in place of ``ids``.
        """
        if hasattr(ids, "gold"):
            ids, segments, positions = ids.ids, ids.segments, ids.positions
        squeeze, (ids, segments, positions) = _batched(ids, segments, positions)
        if memory.ndim == 2:
            memory = memory.reshape(1, *memory.shape)
        B, L = ids.shape
        if enc_pad is None:
            enc_pad = np.zeros(memory.shape[:2], dtype=bool)
        enc_blocked = np.atleast_2d(enc_pad)[:, None, None, :]
        causal = np.triu(np.ones((L, L), dtype=bool), k=1)
        self_blocked = causal[None, None]
        if dec_pad is not None:
            self_blocked = self_blocked | np.atleast_2d(dec_pad)[:, None, None, :]

        exact = not training
        x = self.embed(ids, segments, positions, "decoder", training, rng)
        for layer in range(self.config.layers):
            p = f"decoder.layer{layer}"
            a = self.multi_head_attention(x, x, self_blocked, f"{p}.self_attn", training, rng, causal=True)
            x = self._norm(x + self._dropout(a, training, rng), f"{p}.self_attn_norm")
            c = self.multi_head_attention(x, memory, enc_blocked, f"{p}.context_attn", training, rng)
            x = self._norm(x + self._dropout(c, training, rng), f"{p}.context_attn_norm")
            f = self._feed_forward(x, f"{p}.ff", training, rng)
            x = self._norm(x + self._dropout(f, training, rng), f"{p}.ff_norm")
        flat = x.reshape(B * L, self.config.hidden)
        logits = T.matmul(flat, self.store["decoder.output.weight"].T, rowwise=exact)
        logits = logits.reshape(B, L, self.config.vocab_size)
        return logits.reshape(logits.shape[1:]) if squeeze else logits

    def loss(self, batch, epsilon: float, training: bool = True, rng=None) -> Tensor:
        memory = self.encode(batch.enc_ids, batch.enc_segments, batch.enc_positions,
                             batch.enc_pad, training, rng)
        logits = self.decode_train(memory, batch.dec_ids, batch.dec_segments, batch.dec_positions,
                                   batch.enc_pad, batch.dec_pad, training, rng)
        B, L, V = logits.shape
        return T.cross_entropy_label_smoothed(logits.reshape(B * L, V), batch.gold.reshape(-1),
                                              epsilon, self.config.pad_id)

    # -- incremental decoding (eval only) -----------------------------------
    def start_decoding(self, memory: Tensor, enc_pad=None) -> DecoderState:
        if memory.ndim == 2:
            memory = memory.reshape(1, *memory.shape)
        if enc_pad is None:
            enc_pad = np.zeros(memory.shape[:2], dtype=bool)
        with T.no_grad():
            kv = []
            for layer in range(self.config.layers):
                p = f"decoder.layer{layer}.context_attn"
                k = self._split_heads(self._linear(memory, f"{p}.k", True)).data
                v = self._split_heads(self._linear(memory, f"{p}.v", True)).data
                kv.append((k, v))
        return DecoderState(kv, [(None, None)] * self.config.layers, np.atleast_2d(enc_pad))

    def decode_step(self, state: DecoderState, ids) -> Tuple[np.ndarray, DecoderState]:
        """Logits (B, V) for the next token after feeding ``ids`` (B,)."""
        ids = np.asarray(ids, dtype=np.int64).reshape(-1, 1)
        B = ids.shape[0]
        pos = np.full((B, 1), state.length, dtype=np.int64)
        seg = np.ones((B, 1), dtype=np.int64)
        enc_blocked = state.enc_pad[:, None, None, :]
        new_self = []
        with T.no_grad():
            x = self.embed(ids, seg, pos, "decoder")
            for layer in range(self.config.layers):
                p = f"decoder.layer{layer}"
                sa = f"{p}.self_attn"
                q = self._split_heads(self._linear(x, f"{sa}.q", True))
                k = self._split_heads(self._linear(x, f"{sa}.k", True)).data
                v = self._split_heads(self._linear(x, f"{sa}.v", True)).data
                k_prev, v_prev = state.self_kv[layer]
                if k_prev is not None:
                    k = np.concatenate([k_prev, k], axis=2)
                    v = np.concatenate([v_prev, v], axis=2)
                new_self.append((k, v))
                ctx = self._attend(q, Tensor(k), Tensor(v), None, False, None, True)
                a = self._linear(self._merge_heads(ctx), f"{sa}.o", True)
                x = self._norm(x + a, f"{p}.self_attn_norm")

                ca = f"{p}.context_attn"
                q = self._split_heads(self._linear(x, f"{ca}.q", True))
                mk, mv = state.memory_kv[layer]
                ctx = self._attend(q, Tensor(mk), Tensor(mv), enc_blocked, False, None, True)
                c = self._linear(self._merge_heads(ctx), f"{ca}.o", True)
                x = self._norm(x + c, f"{p}.context_attn_norm")
                f = self._feed_forward(x, f"{p}.ff", False, None)
                x = self._norm(x + f, f"{p}.ff_norm")
            flat = x.reshape(B, self.config.hidden)
            logits = T.matmul(flat, self.store["decoder.output.weight"].T, rowwise=True).data
        return logits, DecoderState(state.memory_kv, new_self, state.enc_pad, state.length + 1)
