"""NCHW float32 tensor operators used by the depth network.

A tensor here is a plain 4-D ``numpy.ndarray`` of dtype float32 laid out as
(batch, channel, height, width). Every operator returns a fresh array and
raises :class:`ShapeError` instead of broadcasting, with one documented
exception: :func:`scale_channels` multiplies by a (n, c, 1, 1) gate.
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from . import _backend


class ShapeError(ValueError):
    """Operand shapes are incompatible with the requested operator."""


ACTIVATIONS = ("relu", "hardswish", "hardsigmoid")


def as_tensor(x, name="tensor"):
    """Return ``x`` as a C-contiguous float32 NCHW array."""
    arr = np.ascontiguousarray(x, dtype=np.float32)
    if arr.ndim != 4:
        raise ShapeError(f"{name} must be 4-D (n, c, h, w), got shape {arr.shape}")
    return arr


def _pair(v):
    if isinstance(v, (int, np.integer)):
        return (int(v), int(v))
    a, b = v
    return (int(a), int(b))


@dataclass(frozen=True)
class ConvSpec:
    """Geometry of a 2-D convolution.

    ``padding`` is explicit per side as (top, bottom, left, right). Padded
    cells are zero unless ``pad_value`` gives one fill value per input
    channel.
    """

    kernel: Tuple[int, int] = (1, 1)
    stride: Tuple[int, int] = (1, 1)
    padding: Tuple[int, int, int, int] = (0, 0, 0, 0)
    groups: int = 1
    has_bias: bool = True
    pad_value: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "kernel", _pair(self.kernel))
        object.__setattr__(self, "stride", _pair(self.stride))
        pad = self.padding
        if isinstance(pad, (int, np.integer)):
            pad = (pad,) * 4
        elif len(pad) == 2:
            pad = (pad[0], pad[0], pad[1], pad[1])
        object.__setattr__(self, "padding", tuple(int(p) for p in pad))
        if self.pad_value is not None:
            object.__setattr__(self, "pad_value", tuple(float(v) for v in self.pad_value))
        if min(self.kernel) < 1:
            raise ValueError(f"kernel dims must be >= 1, got {self.kernel}")
        if min(self.stride) < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        if min(self.padding) < 0:
            raise ValueError(f"padding must be non-negative, got {self.padding}")
        if self.groups < 1:
            raise ValueError(f"groups must be >= 1, got {self.groups}")

    @classmethod
    def same(cls, k, stride=1, groups=1, has_bias=True):
        """Symmetric ``k // 2`` padding, the layout used throughout the network."""
        p = k // 2
        return cls(kernel=(k, k), stride=(stride, stride), padding=(p, p, p, p),
                   groups=groups, has_bias=has_bias)

    def output_hw(self, h, w):
        kh, kw = self.kernel
        sh, sw = self.stride
        t, b, l, r = self.padding
        return (h + t + b - kh) // sh + 1, (w + l + r - kw) // sw + 1


def _pad(x, spec):
    t, b, l, r = spec.padding
    if t == b == l == r == 0:
        return x
    n, c, h, w = x.shape
    out = np.zeros((n, c, h + t + b, w + l + r), dtype=np.float32)
    if spec.pad_value is not None:
        if len(spec.pad_value) != c:
            raise ShapeError(f"pad_value has {len(spec.pad_value)} entries for {c} channels")
        out[...] = np.asarray(spec.pad_value, dtype=np.float32).reshape(1, c, 1, 1)
    out[:, :, t:t + h, l:l + w] = x
    return out


def conv2d(x, weights, bias=None, spec=None, accumulate="float32", backend=None):
    """Grouped 2-D cross-correlation (no kernel flip).

    ``accumulate="float64"`` keeps running sums in double precision; inputs,
    weights and the result stay float32.
    """
    x = as_tensor(x, "input")
    weights = as_tensor(weights, "weights")
    if spec is None:
        spec = ConvSpec(kernel=weights.shape[2:], has_bias=bias is not None)
    cout, cig, kh, kw = weights.shape
    cin = x.shape[1]
    if cin % spec.groups or cout % spec.groups:
        raise ShapeError(f"groups={spec.groups} does not divide c_in={cin} and c_out={cout}")
    if cig != cin // spec.groups:
        raise ShapeError(f"weights expect {cig * spec.groups} input channels, input has {cin}")
    if (kh, kw) != spec.kernel:
        raise ShapeError(f"weights kernel {(kh, kw)} does not match spec kernel {spec.kernel}")
    ho, wo = spec.output_hw(x.shape[2], x.shape[3])
    if ho < 1 or wo < 1:
        raise ShapeError(f"input {x.shape[2:]} too small for kernel {spec.kernel}")
    if bias is None:
        if spec.has_bias:
            raise ShapeError("spec declares a bias but none was given")
        bias = np.zeros(cout, dtype=np.float32)
    else:
        bias = np.ascontiguousarray(bias, dtype=np.float32).reshape(-1)
        if bias.shape[0] != cout:
            raise ShapeError(f"bias has {bias.shape[0]} entries for {cout} output channels")
    if accumulate not in ("float32", "float64"):
        raise ValueError(f"accumulate must be float32 or float64, got {accumulate!r}")
    kern = _backend.get_kernels(backend)
    return kern.conv2d_valid(_pad(x, spec), weights, bias, spec.stride[0], spec.stride[1],
                             spec.groups, accumulate == "float64")


def activation(x, kind):
    x = np.asarray(x, dtype=np.float32)
    if kind == "relu":
        return np.maximum(x, np.float32(0.0))
    if kind == "hardsigmoid":
        return np.clip(x / np.float32(6.0) + np.float32(0.5), 0.0, 1.0).astype(np.float32)
    if kind == "hardswish":
        return x * activation(x, "hardsigmoid")
    raise ValueError(f"unknown activation {kind!r}; expected one of {ACTIVATIONS}")


def resize_bilinear(x, out_h, out_w, align_corners=False, backend=None):
    """Bilinear resize; half-pixel centres unless ``align_corners``."""
    x = as_tensor(x, "input")
    out_h, out_w = int(out_h), int(out_w)
    if out_h < 1 or out_w < 1:
        raise ShapeError(f"resize target must be at least 1x1, got {out_h}x{out_w}")
    if (out_h, out_w) == x.shape[2:]:
        return x.copy()
    return _backend.get_kernels(backend).resize_bilinear(x, out_h, out_w, bool(align_corners))


def concat_channels(*tensors):
    if len(tensors) < 2:
        raise ShapeError("concat needs at least two tensors")
    ts = [as_tensor(t) for t in tensors]
    n, _, h, w = ts[0].shape
    for t in ts[1:]:
        if (t.shape[0], t.shape[2], t.shape[3]) != (n, h, w):
            raise ShapeError(f"concat mismatch: {ts[0].shape} vs {t.shape}")
    return np.concatenate(ts, axis=1)


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"add mismatch: {a.shape} vs {b.shape}")
    return a + b


def global_avg_pool(x):
    """Per-channel spatial mean, shape (n, c, 1, 1)."""
    x = as_tensor(x)
    return x.mean(axis=(2, 3), keepdims=True, dtype=np.float64).astype(np.float32)


def scale_channels(x, gate):
    """Multiply each channel of ``x`` by the matching entry of a (n, c, 1, 1) gate."""
    x, gate = as_tensor(x), as_tensor(gate, "gate")
    if gate.shape != (x.shape[0], x.shape[1], 1, 1):
        raise ShapeError(f"gate shape {gate.shape} does not match {x.shape[:2]} + (1, 1)")
    return x * gate


def normalize_channels(x, mean: Sequence[float], std: Sequence[float]):
    """Per-channel affine ``(x - mean) / std`` on an NCHW tensor."""
    x = as_tensor(x)
    m = np.asarray(mean, dtype=np.float32).reshape(1, -1, 1, 1)
    s = np.asarray(std, dtype=np.float32).reshape(1, -1, 1, 1)
    if m.shape[1] != x.shape[1] or s.shape[1] != x.shape[1]:
        raise ShapeError(f"normalization has {m.shape[1]} channels, input has {x.shape[1]}")
    return (x - m) / s
