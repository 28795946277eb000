"""Fast monocular depth estimation toolkit: network graph, fold pass, losses, metrics."""

from .graph import (
    GraphModel,
    LiteDepthConfig,
    NormalizationParams,
    build_litedepth,
    fold_normalization,
    load_model,
    run,
    save_model,
)
from .ops import BACKEND

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "GraphModel",
    "LiteDepthConfig",
    "NormalizationParams",
    "build_litedepth",
    "fold_normalization",
    "load_model",
    "run",
    "save_model",
]
