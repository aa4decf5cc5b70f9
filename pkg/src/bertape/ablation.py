"""Train every decoder sharing preset under identical conditions."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from .data import Example
from .errors import ApeError
from .model import PRESET_LABELS, PRESETS, ModelConfig, build_model
from .training import TrainConfig, select_best, train

logger = logging.getLogger(__name__)

HEADER = "preset\tlabel\tdev_ter\tdev_bleu\tinitial_loss\tfinal_loss\tstatus"


@dataclass
class AblationRow:
    preset: str
    dev_ter: Optional[float] = None
    dev_bleu: Optional[float] = None
    initial_loss: Optional[float] = None
    final_loss: Optional[float] = None
    status: str = "OK"

    @property
    def label(self) -> str:
        return PRESET_LABELS[self.preset].strip()

    def line(self) -> str:
        fmt = lambda x, p: "nan" if x is None else f"{x:.{p}f}"  # noqa: E731
        return "\t".join([self.preset, self.label, fmt(self.dev_ter, 2), fmt(self.dev_bleu, 2),
                          fmt(self.initial_loss, 4), fmt(self.final_loss, 4), self.status])


def ablate(mc: ModelConfig, data: Sequence[Example], cfg: TrainConfig,
           evaluate: Optional[Callable] = None, pretrained=None, seed: int = 0,
           final_window: int = 10) -> List[AblationRow]:
    """One row per preset, in table order. Every preset starts from the same
    seed and sees the same batch order, so rows differ only in wiring.

    The final loss is the mean of the last ``final_window`` step losses.
    """
    rows = []
    for name, sc in PRESETS.items():
        row = AblationRow(name)
        try:
            model, store = build_model(mc, sc, pretrained=pretrained, seed=seed)
            result = train(model, store, data, cfg, evaluate=evaluate)
            row.initial_loss = result.losses[0]
            row.final_loss = float(np.mean(result.losses[-final_window:]))
            if evaluate is not None and result.checkpoints:
                best = select_best(result.checkpoints)
                row.dev_ter, row.dev_bleu = best.dev_ter, best.dev_bleu
        except (ApeError, FloatingPointError) as exc:
            logger.warning("preset %s failed: %s", name, exc)
            row.status = "FAILED"
        rows.append(row)
    return rows


def format_table(rows: Sequence[AblationRow]) -> str:
    return "\n".join([HEADER] + [r.line() for r in rows]) + "\n"
