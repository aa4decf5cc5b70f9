"""BERT encoder-decoder for automatic post-editing, on a small numpy autograd engine."""

from .checkpoint import Checkpoint, load_checkpoint, model_from_checkpoint, save_checkpoint
from .data import Triplet, batch_by_tokens, encode_triplets, filter_by_length, oversample_mix, read_triplets
from .decoding import beam_search, translate_corpus
from .errors import (ApeError, ConfigError, DimensionError, FormatError, LengthError, NumericError,
                     ParameterError)
from .metrics import bleu, corpus_scores, score_corpus, ter
from .model import PRESETS, Model, ModelConfig, ParameterStore, SharingConfig, build_model, count_parameters, preset
from .tensor import Tensor, no_grad
from .tokenizer import Vocab, detokenize, encode_pair, encode_target, load_vocab, wordpiece_tokenize
from .training import TrainConfig, lr_at, select_best, train

__version__ = "0.1.0"

__all__ = [
    "ApeError", "Checkpoint", "ConfigError", "DimensionError", "FormatError", "LengthError", "Model",
    "ModelConfig", "NumericError", "PRESETS", "ParameterError", "ParameterStore", "SharingConfig", "Tensor",
    "TrainConfig", "Triplet", "Vocab", "batch_by_tokens", "beam_search", "bleu", "build_model",
    "corpus_scores", "count_parameters", "detokenize", "encode_pair", "encode_target", "encode_triplets",
    "filter_by_length", "load_checkpoint", "load_vocab", "lr_at", "model_from_checkpoint", "no_grad",
    "oversample_mix", "preset", "read_triplets", "save_checkpoint", "score_corpus", "select_best", "ter",
    "train", "translate_corpus", "wordpiece_tokenize",
]
