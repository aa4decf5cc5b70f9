"""Optimisation: triangular LR, Adam with selective L2, EMA checkpoints."""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .checkpoint import checkpoint_from_store, model_metadata, save_checkpoint
from .data import Example, batch_by_tokens
from .errors import ConfigError, NumericError, ParameterError
from .model import Model, ParameterStore
from .tensor import no_grad

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    warmup_steps: int = 5000
    peak_lr: float = 5e-5
    max_steps: int = 30000
    weight_decay: float = 0.01
    dropout: float = 0.1
    label_smoothing: float = 0.1
    batch_tokens: int = 1024
    checkpoint_interval: int = 1000
    ema_decay: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    accumulation: int = 1
    seed: int = 0
    beam: int = 8
    max_decode_len: int = 100

    def __post_init__(self):
        if self.warmup_steps < 0 or self.warmup_steps >= self.max_steps:
            raise ConfigError(f"warmup_steps ({self.warmup_steps}) must be below max_steps ({self.max_steps})")
        if self.peak_lr <= 0 or self.batch_tokens <= 0 or self.checkpoint_interval <= 0:
            raise ConfigError("learning rate, batch budget and checkpoint interval must be positive")
        if not 0.0 <= self.ema_decay <= 1.0:
            raise ConfigError(f"ema_decay must be in [0, 1], got {self.ema_decay}")
        if self.accumulation < 1:
            raise ConfigError("accumulation must be >= 1")

    @classmethod
    def small_data(cls, **overrides) -> "TrainConfig":
        return cls(**overrides)

    @classmethod
    def large_data(cls, **overrides) -> "TrainConfig":
        base = dict(max_steps=300000, batch_tokens=2048, checkpoint_interval=10000)
        base.update(overrides)
        return cls(**base)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def lr_at(step: int, cfg: TrainConfig) -> float:
    """Linear warmup to ``peak_lr``, then linear decay reaching 0 at ``max_steps``."""
    if step <= cfg.warmup_steps:
        return cfg.peak_lr * step / cfg.warmup_steps if cfg.warmup_steps else cfg.peak_lr
    remaining = (cfg.max_steps - step) / (cfg.max_steps - cfg.warmup_steps)
    return cfg.peak_lr * max(0.0, remaining)


@dataclass
class AdamState:
    step: int = 0
    moments: Dict[str, tuple] = field(default_factory=dict)


def adam_step(store: ParameterStore, state: AdamState, lr: float, cfg: TrainConfig,
              grads: Optional[Dict[str, np.ndarray]] = None) -> None:
    """One in-place Adam update over unique storages.

    ``grads`` defaults to each tensor's accumulated ``.grad``. L2 decay is
    folded into the gradient for tensors flagged in the store.
    """
    state.step += 1
    t = state.step
    c1 = 1.0 - cfg.beta1 ** t
    c2 = 1.0 - cfg.beta2 ** t
    for name, param in store.unique():
        if not param.requires_grad:
            continue
        g = grads.get(name) if grads is not None else param.grad
        if g is None:
            continue
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for {name} at step {t}")
        if cfg.weight_decay and store.is_decayed(name):
            g = g + cfg.weight_decay * param.data
        m, v = state.moments.get(name, (None, None))
        if m is None:
            m = np.zeros_like(param.data)
            v = np.zeros_like(param.data)
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * (g * g)
        state.moments[name] = (m, v)
        update = lr * (m / c1) / (np.sqrt(v / c2) + cfg.adam_eps)
        param.data -= update.astype(param.data.dtype)


def ema_update(shadow: ParameterStore, store: ParameterStore, decay: float) -> ParameterStore:
    """shadow <- (1 - decay) * shadow + decay * param, in place."""
    for name, param in store.unique():
        s = shadow[name].data
        s *= 1.0 - decay
        s += decay * param.data
    return shadow


def make_shadow(store: ParameterStore) -> ParameterStore:
    shadow = store.copy()
    for _, t in shadow.unique():
        t.requires_grad = False
    return shadow


@dataclass
class CheckpointRecord:
    step: int
    path: Optional[Path] = None
    store: Optional[ParameterStore] = None
    dev_ter: Optional[float] = None
    dev_bleu: Optional[float] = None


@dataclass
class LogEntry:
    step: int
    loss: float
    lr: float
    dev_ter: Optional[float] = None
    dev_bleu: Optional[float] = None

    def line(self) -> str:
        fmt = lambda x: "nan" if x is None else repr(float(x))  # noqa: E731
        return f"{self.step}\t{self.loss!r}\t{self.lr!r}\t{fmt(self.dev_ter)}\t{fmt(self.dev_bleu)}"


@dataclass
class TrainResult:
    model: Model
    shadow: ParameterStore
    checkpoints: List[CheckpointRecord]
    log: List[LogEntry]
    losses: List[float]


def train(model: Model, store: ParameterStore, data: Sequence[Example], cfg: TrainConfig,
          evaluate: Optional[Callable[[Model], tuple]] = None,
          checkpoint_dir=None, log_path=None, keep_in_memory: bool = True) -> TrainResult:
    """Run ``cfg.max_steps`` optimizer steps over ``data``.

    Every ``checkpoint_interval`` steps the EMA shadow becomes a checkpoint
    (written to ``checkpoint_dir`` when given) and, if ``evaluate`` is
    provided, is scored with it: ``evaluate(shadow_model) -> (ter, bleu)``.
    """
    if not data:
        raise ParameterError("no training examples")
    model = Model(dataclasses.replace(model.config, dropout=cfg.dropout), model.sharing, store)
    rng = np.random.default_rng(cfg.seed)
    adam = AdamState()
    shadow = make_shadow(store)
    records: List[CheckpointRecord] = []
    log: List[LogEntry] = []
    losses: List[float] = []
    ckpt_dir = Path(checkpoint_dir) if checkpoint_dir is not None else None
    if ckpt_dir is not None:
        ckpt_dir.mkdir(parents=True, exist_ok=True)
    log_fh = open(log_path, "a", encoding="utf-8") if log_path is not None else None

    def persist(tag: str, step: int) -> Optional[Path]:
        if ckpt_dir is None:
            return None
        path = ckpt_dir / f"{tag}.ckpt"
        meta = model_metadata(model, step=step, train_config=cfg.to_dict())
        save_checkpoint(checkpoint_from_store(shadow, meta), path)
        return path

    def batches():
        epoch = 0
        while True:
            yield from batch_by_tokens(data, cfg.batch_tokens, seed=cfg.seed + epoch,
                                       pad_id=model.config.pad_id)
            epoch += 1

    stream = batches()
    window: List[float] = []
    try:
        for step in range(1, cfg.max_steps + 1):
            store.zero_grad()
            step_loss = 0.0
            for _ in range(cfg.accumulation):
                batch = next(stream)
                loss = model.loss(batch, cfg.label_smoothing, training=True, rng=rng)
                value = float(loss.data)
                if not math.isfinite(value):
                    path = persist("last_good", step - 1)
                    raise NumericError(f"loss became {value} at step {step}; last good checkpoint: {path}")
                (loss * (1.0 / cfg.accumulation)).backward()
                step_loss += value / cfg.accumulation
            lr = lr_at(step, cfg)
            try:
                adam_step(store, adam, lr, cfg)
            except NumericError:
                persist("last_good", step - 1)
                raise
            with no_grad():
                ema_update(shadow, store, cfg.ema_decay)
            losses.append(step_loss)
            window.append(step_loss)

            if step % cfg.checkpoint_interval == 0:
                snapshot = shadow.copy()
                record = CheckpointRecord(step, store=snapshot if keep_in_memory else None)
                record.path = persist(f"step{step:08d}", step)
                if evaluate is not None:
                    record.dev_ter, record.dev_bleu = evaluate(model.with_store(snapshot))
                records.append(record)
                entry = LogEntry(step, float(np.mean(window)), lr, record.dev_ter, record.dev_bleu)
                window = []
                log.append(entry)
                logger.info(entry.line())
                if log_fh is not None:
                    log_fh.write(entry.line() + "\n")
                    log_fh.flush()
    finally:
        if log_fh is not None:
            log_fh.close()
    return TrainResult(model, shadow, records, log, losses)


def select_best(checkpoints: Sequence[CheckpointRecord]) -> CheckpointRecord:
    """Lowest dev TER; on ties the later checkpoint wins."""
    if not checkpoints:
        raise ParameterError("no checkpoints to select from")
    missing = [c.step for c in checkpoints if c.dev_ter is None]
    if missing:
        raise ParameterError(f"checkpoints without dev TER: steps {missing}")
    return min(checkpoints, key=lambda c: (c.dev_ter, -c.step))
