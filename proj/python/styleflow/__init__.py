"""Flow-based text style transfer: Python bindings over the C++ core."""

from ._core import (
    Config,
    Model,
    NGramLM,
    StyleflowError,
    augment,
    bleu,
    config_keys,
    evaluate,
    synth,
    train,
    train_scorer,
    transfer,
)

__all__ = [
    "Config",
    "Model",
    "NGramLM",
    "StyleflowError",
    "augment",
    "bleu",
    "config_keys",
    "evaluate",
    "synth",
    "train",
    "train_scorer",
    "transfer",
]
