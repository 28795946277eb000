from .architecture import LiteDepthConfig, build_litedepth, decoder_conv_count
from .fold import FoldError, find_first_conv, fold_normalization, fold_weights
from .ldw import LdwError, load_model, save_model
from .model import GraphError, GraphModel, Node, NormalizationParams, run

__all__ = [
    "FoldError",
    "GraphError",
    "GraphModel",
    "LdwError",
    "LiteDepthConfig",
    "Node",
    "NormalizationParams",
    "build_litedepth",
    "decoder_conv_count",
    "find_first_conv",
    "fold_normalization",
    "fold_weights",
    "load_model",
    "run",
    "save_model",
]
