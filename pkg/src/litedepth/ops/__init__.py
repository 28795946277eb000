from ._backend import BACKEND, available_backends, get_kernels
from .core import (
    ACTIVATIONS,
    ConvSpec,
    ShapeError,
    activation,
    add,
    as_tensor,
    concat_channels,
    conv2d,
    global_avg_pool,
    normalize_channels,
    resize_bilinear,
    scale_channels,
)

__all__ = [
    "ACTIVATIONS",
    "BACKEND",
    "ConvSpec",
    "ShapeError",
    "activation",
    "add",
    "as_tensor",
    "available_backends",
    "concat_channels",
    "conv2d",
    "get_kernels",
    "global_avg_pool",
    "normalize_channels",
    "resize_bilinear",
    "scale_channels",
]
