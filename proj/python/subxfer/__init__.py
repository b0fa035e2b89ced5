"""Sub-word embedding transfer from a parent NMT model to a low-resource child."""

from ._core import (
    WORD_MARKER,
    FormatError,
    ProjectionError,
    Tokenizer,
    ValidationError,
    align,
    annotate,
    decode,
    normalize,
    project,
    recovery_experiment,
    run_cli,
    transfer,
)

__all__ = [
    "WORD_MARKER",
    "FormatError",
    "ProjectionError",
    "Tokenizer",
    "ValidationError",
    "align",
    "annotate",
    "decode",
    "normalize",
    "project",
    "recovery_experiment",
    "run_cli",
    "transfer",
]
