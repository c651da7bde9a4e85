"""Python bindings for the clifs feature stack, models and CLI."""

from ._core import (
    ClifsError,
    ConfigError,
    FormatError,
    InferenceError,
    Scorer,
    UsageError,
    __version__,
    bootstrap_macro_f1,
    classify_vri,
    discretize,
    fusion_proximity,
    macro_f1,
    run_cli,
    spearman,
)

__all__ = [
    "ClifsError",
    "ConfigError",
    "FormatError",
    "InferenceError",
    "Scorer",
    "UsageError",
    "__version__",
    "bootstrap_macro_f1",
    "classify_vri",
    "discretize",
    "fusion_proximity",
    "macro_f1",
    "run_cli",
    "spearman",
]
