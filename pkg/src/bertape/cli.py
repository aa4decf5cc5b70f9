"""Command line entry point: train, evaluate, translate, ablate, import-weights.

Options come from an optional JSON ``--config`` file and are overridden by
individual flags. Exit codes: 0 success, 1 usage/configuration error,
2 data error (missing or malformed files, dimension mismatch), 3 numeric
failure during training.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import shutil
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .ablation import ablate, format_table
from .checkpoint import (import_weights, load_checkpoint, model_from_checkpoint, read_name_mapping,
                         save_checkpoint)
from .data import encode_triplets, filter_by_length, oversample_mix, read_triplets
from .decoding import translate_corpus, write_outputs
from .errors import ApeError, ConfigError, NumericError
from .metrics import corpus_scores, score_corpus
from .model import PRESETS, ModelConfig, build_model, preset
from .tokenizer import load_vocab
from .training import TrainConfig, select_best, train

log = logging.getLogger("bertape")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

MODEL_KEYS = ("layers", "hidden", "heads", "ff", "max_positions", "eps")
TRAIN_KEYS = tuple(f.name for f in dataclasses.fields(TrainConfig))


@dataclasses.dataclass
class RunConfig:
    command: str
    train: Optional[str] = None
    valid: Optional[str] = None
    test: Optional[str] = None
    extra: Optional[str] = None
    oversample_factor: int = 35
    vocab: Optional[str] = None
    checkpoint_dir: Optional[str] = None
    checkpoint: Optional[str] = None
    pretrained: Optional[str] = None
    preset: str = "SHARED_SA"
    toy: bool = False
    model: dict = dataclasses.field(default_factory=dict)
    training: dict = dataclasses.field(default_factory=dict)
    beam: int = 8
    seed: int = 0
    output: Optional[str] = None
    hyp: Optional[str] = None
    ref: Optional[str] = None
    dump: Optional[str] = None
    mapping: Optional[str] = None
    log: Optional[str] = None

    def model_config(self, vocab) -> ModelConfig:
        extra = {k: v for k, v in self.model.items() if k in MODEL_KEYS or k == "dropout"}
        if self.toy:
            base = dict(layers=2, hidden=64, heads=4, ff=256, max_positions=64)
            base.update(extra)
            extra = base
        return ModelConfig.for_vocab(vocab, **extra)

    def train_config(self) -> TrainConfig:
        values = dict(self.training)
        values.setdefault("seed", self.seed)
        values.setdefault("beam", self.beam)
        unknown = set(values) - set(TRAIN_KEYS)
        if unknown:
            raise ConfigError(f"unknown training options: {', '.join(sorted(unknown))}")
        return TrainConfig(**values)

    def require(self, *names: str) -> None:
        missing = [n for n in names if getattr(self, n) is None]
        if missing:
            raise ConfigError(f"{self.command} needs --{', --'.join(n.replace('_', '-') for n in missing)}")
        for n in names:
            value = getattr(self, n)
            if n not in ("checkpoint_dir", "output", "log") and not Path(value).exists():
                raise FileNotFoundError(f"{n.replace('_', '-')}: {value} does not exist")
        if self.preset not in PRESETS:
            raise ConfigError(f"unknown preset {self.preset!r}; choose from {', '.join(PRESETS)}")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bertape", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=["train", "evaluate", "translate", "ablate", "import-weights"])
    parser.add_argument("--config", help="JSON file with default options")
    for flag in ("train", "valid", "test", "extra", "vocab", "checkpoint-dir", "checkpoint", "pretrained",
                 "output", "hyp", "ref", "dump", "mapping", "log"):
        parser.add_argument(f"--{flag}")
    parser.add_argument("--oversample-factor", type=int)
    parser.add_argument("--preset")
    parser.add_argument("--toy", action="store_true", default=None, help="L=2, H=64, A=4, F=256 model")
    parser.add_argument("--beam", type=int)
    parser.add_argument("--seed", type=int)
    for key in MODEL_KEYS:
        parser.add_argument(f"--{key.replace('_', '-')}", type=float if key == "eps" else int)
    for f in dataclasses.fields(TrainConfig):
        if f.name in ("seed", "beam"):
            continue
        parser.add_argument(f"--{f.name.replace('_', '-')}", type=type(f.default))
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def parse_config(argv: Optional[Sequence[str]] = None) -> RunConfig:
    args = build_parser().parse_args(argv)
    values: dict = {}
    if args.config:
        try:
            values = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: {exc}") from exc
    values = {k.replace("-", "_"): v for k, v in values.items()}
    model = dict(values.pop("model", {}))
    training = dict(values.pop("training", {}))
    for key, value in vars(args).items():
        if value is None or key in ("config", "verbose"):
            continue
        if key in MODEL_KEYS:
            model[key] = value
        elif key in TRAIN_KEYS and key not in ("seed", "beam"):
            training[key] = value
        else:
            values[key] = value
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown options: {', '.join(sorted(unknown))}")
    return RunConfig(model=model, training=training, **values)


# ---------------------------------------------------------------------------
# commands


def _training_examples(rc: RunConfig, vocab, mc: ModelConfig):
    triplets = filter_by_length(read_triplets(rc.train), vocab)
    if rc.extra:
        large = filter_by_length(read_triplets(rc.extra), vocab)
        triplets = oversample_mix(triplets, large, rc.oversample_factor, seed=rc.seed)
    if not triplets:
        raise ApeError("no training triplets left after length filtering")
    return encode_triplets(triplets, vocab, mc.max_positions)


def _dev_evaluator(rc: RunConfig, vocab, cfg: TrainConfig):
    if not rc.valid:
        return None
    dev = read_triplets(rc.valid)

    def evaluate(model):
        hyps = translate_corpus(model, dev, vocab, beam=cfg.beam, max_len=cfg.max_decode_len)
        score = corpus_scores(hyps, [t.pe for t in dev])
        return score.ter, score.bleu

    return evaluate


def cmd_train(rc: RunConfig) -> int:
    rc.require("train", "vocab", "checkpoint_dir")
    vocab = load_vocab(rc.vocab)
    mc = rc.model_config(vocab)
    cfg = rc.train_config()
    pretrained = load_checkpoint(rc.pretrained) if rc.pretrained else None
    model, store = build_model(mc, preset(rc.preset), pretrained=pretrained, seed=rc.seed)
    examples = _training_examples(rc, vocab, mc)
    ckpt_dir = Path(rc.checkpoint_dir)
    log_path = rc.log or ckpt_dir / "metrics.log"
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    result = train(model, store, examples, cfg, evaluate=_dev_evaluator(rc, vocab, cfg),
                   checkpoint_dir=ckpt_dir, log_path=log_path, keep_in_memory=False)
    if result.checkpoints and result.checkpoints[0].dev_ter is not None:
        best = select_best(result.checkpoints)
        shutil.copyfile(best.path, ckpt_dir / "best.ckpt")
        print(f"best checkpoint: step {best.step} (dev TER {best.dev_ter:.2f}, BLEU {best.dev_bleu:.2f})")
    print(f"trained {cfg.max_steps} steps, {len(result.checkpoints)} checkpoints in {ckpt_dir}")
    return EXIT_OK


def cmd_evaluate(rc: RunConfig) -> int:
    if rc.hyp or rc.ref:
        rc.require("hyp", "ref")
        print(score_corpus(rc.hyp, rc.ref).report(), end="")
        return EXIT_OK
    rc.require("checkpoint", "test", "vocab")
    vocab = load_vocab(rc.vocab)
    model = model_from_checkpoint(load_checkpoint(rc.checkpoint))
    test = read_triplets(rc.test)
    hyps = translate_corpus(model, test, vocab, beam=rc.beam)
    if rc.output:
        write_outputs(hyps, rc.output)
    print(corpus_scores(hyps, [t.pe for t in test]).report(), end="")
    return EXIT_OK


def cmd_translate(rc: RunConfig) -> int:
    rc.require("checkpoint", "test", "vocab", "output")
    vocab = load_vocab(rc.vocab)
    model = model_from_checkpoint(load_checkpoint(rc.checkpoint))
    write_outputs(translate_corpus(model, read_triplets(rc.test), vocab, beam=rc.beam), rc.output)
    return EXIT_OK


def cmd_ablate(rc: RunConfig) -> int:
    rc.require("train", "vocab")
    vocab = load_vocab(rc.vocab)
    mc = rc.model_config(vocab)
    cfg = rc.train_config()
    pretrained = load_checkpoint(rc.pretrained) if rc.pretrained else None
    rows = ablate(mc, _training_examples(rc, vocab, mc), cfg, evaluate=_dev_evaluator(rc, vocab, cfg),
                  pretrained=pretrained, seed=rc.seed)
    table = format_table(rows)
    if rc.output:
        Path(rc.output).write_text(table, encoding="utf-8")
    print(table, end="")
    return EXIT_OK


def cmd_import_weights(rc: RunConfig) -> int:
    rc.require("dump", "mapping", "vocab", "output")
    vocab = load_vocab(rc.vocab)
    mc = rc.model_config(vocab)
    with np.load(rc.dump) as dump:
        ckpt = import_weights(dict(dump), read_name_mapping(rc.mapping), mc)
    save_checkpoint(ckpt, rc.output)
    print(f"wrote {len(ckpt.tensors)} tensors to {rc.output}")
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "translate": cmd_translate,
    "ablate": cmd_ablate,
    "import-weights": cmd_import_weights,
}


def run(rc: RunConfig) -> int:
    try:
        return COMMANDS[rc.command](rc)
    except ConfigError as exc:
        print(f"bertape: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"bertape: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ApeError, OSError) as exc:
        print(f"bertape: {exc}", file=sys.stderr)
        return EXIT_DATA


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(level=logging.INFO if ("-v" in argv or "--verbose" in argv) else logging.WARNING,
                        format="%(message)s")
    try:
        rc = parse_config(argv)
    except ConfigError as exc:
        print(f"bertape: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"bertape: {exc}", file=sys.stderr)
        return EXIT_DATA
    return run(rc)


if __name__ == "__main__":
    sys.exit(main())
