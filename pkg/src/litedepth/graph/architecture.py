"""Builder for the lightweight encoder-decoder depth network.

Layout: bilinear resize of the 480x640 frame to 128x160, a MobileNet-v3
(small) feature trunk without its final 1x1 dimension-increasing conv, and
a five-conv decoder (1x1 fusions at strides 16/8/4, a 3x3 fusion at stride
2, a 1x1 depth projection + ReLU) followed by a resize back to full frame.
"""

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .model import GraphModel, Node, NormalizationParams

# (kernel, expanded, out, squeeze-excite, activation, stride)
MOBILENET_V3_SMALL = (
    (3, 16, 16, True, "relu", 2),
    (3, 72, 24, False, "relu", 2),
    (3, 88, 24, False, "relu", 1),
    (5, 96, 40, True, "hardswish", 2),
    (5, 240, 40, True, "hardswish", 1),
    (5, 240, 40, True, "hardswish", 1),
    (5, 120, 48, True, "hardswish", 1),
    (5, 144, 48, True, "hardswish", 1),
    (5, 288, 96, True, "hardswish", 2),
    (5, 576, 96, True, "hardswish", 1),
    (5, 576, 96, True, "hardswish", 1),
)

DECODER_CONVS = 5


def make_divisible(v, divisor=8):
    new_v = max(divisor, int(v + divisor / 2) // divisor * divisor)
    if new_v < 0.9 * v:
        new_v += divisor
    return new_v


@dataclass(frozen=True)
class LiteDepthConfig:
    width_mult: float = 0.5
    decoder_channels: Tuple[int, int, int, int] = (64, 32, 32, 24)
    input_resolution: Tuple[int, int] = (480, 640)
    encoder_resolution: Tuple[int, int] = (128, 160)
    normalization: Optional[NormalizationParams] = field(default_factory=NormalizationParams)
    blocks: Sequence[tuple] = MOBILENET_V3_SMALL
    seed: int = 0
    depth_bias: float = 2.0

    def __post_init__(self):
        if self.width_mult <= 0:
            raise ValueError(f"width_mult must be positive, got {self.width_mult}")
        if len(self.decoder_channels) != 4 or min(self.decoder_channels) < 1:
            raise ValueError(f"decoder_channels must be four positive ints, got {self.decoder_channels}")
        eh, ew = self.encoder_resolution
        if eh % 32 or ew % 32:
            raise ValueError(f"encoder_resolution {self.encoder_resolution} must be divisible by the trunk stride")
        if min(self.input_resolution) < 1:
            raise ValueError(f"bad input_resolution {self.input_resolution}")


class _Builder:
    def __init__(self, seed):
        self.rng = np.random.default_rng(seed)
        self.nodes = []
        self.weights = {}
        self.shapes = {}

    def add(self, node_id, op, inputs=(), shape=None, **params):
        self.nodes.append(Node(node_id, op, tuple(inputs), params))
        self.shapes[node_id] = shape if shape is not None else self.shapes[inputs[0]]
        return node_id

    def conv(self, node_id, src, cout, k, stride=1, groups=1, gain=2.0, bias_std=0.05, bias=None):
        cin, h, w = self.shapes[src]
        fan_in = (cin // groups) * k * k
        wt = self.rng.normal(0.0, np.sqrt(gain / fan_in), size=(cout, cin // groups, k, k))
        if bias is None:
            bias = self.rng.normal(0.0, bias_std, size=cout)
        self.weights[f"{node_id}.weight"] = wt.astype(np.float32)
        self.weights[f"{node_id}.bias"] = np.broadcast_to(bias, (cout,)).astype(np.float32)
        p = k // 2
        oh, ow = (h + 2 * p - k) // stride + 1, (w + 2 * p - k) // stride + 1
        return self.add(node_id, "conv", (src,), (cout, oh, ow), kernel=[k, k],
                        stride=[stride, stride], padding=[p, p, p, p], groups=groups,
                        weight=f"{node_id}.weight", bias=f"{node_id}.bias")

    def act(self, node_id, src, kind):
        return self.add(node_id, "activation", (src,), kind=kind)

    def resize(self, node_id, src, size):
        c = self.shapes[src][0]
        return self.add(node_id, "resize", (src,), (c, *size), size=list(size), align_corners=False)

    def squeeze_excite(self, prefix, src):
        c = self.shapes[src][0]
        squeeze = make_divisible(c // 4, 8)
        pooled = self.add(f"{prefix}.pool", "pool", (src,), (c, 1, 1))
        fc1 = self.act(f"{prefix}.fc1.act", self.conv(f"{prefix}.fc1", pooled, squeeze, 1), "relu")
        fc2 = self.conv(f"{prefix}.fc2", fc1, c, 1, gain=1.0)
        gate = self.act(f"{prefix}.gate", fc2, "hardsigmoid")
        return self.add(f"{prefix}.scale", "scale", (src, gate))

    def inverted_residual(self, prefix, src, k, exp, cout, se, act, stride):
        cin = self.shapes[src][0]
        x = src
        if exp != cin:
            x = self.act(f"{prefix}.expand.act", self.conv(f"{prefix}.expand", x, exp, 1), act)
        x = self.act(f"{prefix}.dw.act", self.conv(f"{prefix}.dw", x, exp, k, stride, groups=exp), act)
        if se:
            x = self.squeeze_excite(f"{prefix}.se", x)
        x = self.conv(f"{prefix}.project", x, cout, 1, gain=1.0)
        if stride == 1 and cin == cout:
            x = self.add(f"{prefix}.residual", "add", (x, src))
        return x


def build_litedepth(config=None):
    """Build a randomly initialised (fixed-seed) depth network graph."""
    cfg = config or LiteDepthConfig()
    b = _Builder(cfg.seed)
    h, w = cfg.input_resolution
    x = b.add("image", "input", (), (3, h, w))
    x = b.resize("encoder.resize", x, cfg.encoder_resolution)

    stem_c = make_divisible(16 * cfg.width_mult)
    x = b.act("encoder.stem.act", b.conv("encoder.stem", x, stem_c, 3, 2), "hardswish")
    taps = {2: x}
    stride = 2
    for i, (k, exp, out, se, act, s) in enumerate(cfg.blocks):
        x = b.inverted_residual(f"encoder.block{i + 1}", x, k,
                                make_divisible(exp * cfg.width_mult),
                                make_divisible(out * cfg.width_mult), se, act, s)
        stride *= s
        taps[stride] = x  # last block at each stride wins

    # decoder: fuse from the stride-32 bottleneck down to the stride-2 skip
    dec = taps[max(taps)]
    fusion = [(16, cfg.decoder_channels[0], 1, "defeat4"),
              (8, cfg.decoder_channels[1], 1, "defeat3"),
              (4, cfg.decoder_channels[2], 1, "defeat2"),
              (2, cfg.decoder_channels[3], 3, "defeat1")]
    feature_outputs = {}
    for skip_stride, ch, k, name in fusion:
        skip = taps[skip_stride]
        up = b.resize(f"decoder.{name}.up", dec, b.shapes[skip][1:])
        cat_c = b.shapes[up][0] + b.shapes[skip][0]
        cat = b.add(f"decoder.{name}.concat", "concat", (up, skip), (cat_c, *b.shapes[skip][1:]))
        dec = b.act(f"decoder.{name}.act", b.conv(f"decoder.{name}.conv", cat, ch, k), "relu")
        feature_outputs[name] = dec

    proj = b.conv("decoder.proj", dec, 1, 1, gain=1.0, bias=cfg.depth_bias)
    proj = b.act("decoder.proj.act", proj, "relu")
    depth = b.resize("decoder.output", proj, (h, w))

    outputs = {"depth": depth, **feature_outputs}
    return GraphModel(nodes=b.nodes, weights=b.weights, inputs={"image": "image"},
                      outputs=outputs, input_resolution=(h, w),
                      normalization=cfg.normalization)


def decoder_conv_count(model):
    return sum(1 for n in model.nodes if n.op == "conv" and n.id.startswith("decoder."))
