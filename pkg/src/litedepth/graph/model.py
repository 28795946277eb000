"""Graph representation and execution."""

from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from .. import ops


class GraphError(ValueError):
    """Structural problem in a graph, or a failure while executing a node."""


IMAGENET_MEAN = (123.675, 116.28, 103.53)
IMAGENET_STD = (58.395, 57.12, 57.375)

OP_KINDS = ("input", "conv", "activation", "resize", "concat", "add", "pool", "scale")


@dataclass(frozen=True)
class NormalizationParams:
    """Per-channel image normalization ``(x - mean) / std`` in raw pixel units."""

    mean: Tuple[float, float, float] = IMAGENET_MEAN
    std: Tuple[float, float, float] = IMAGENET_STD

    def __post_init__(self):
        object.__setattr__(self, "mean", tuple(float(v) for v in self.mean))
        object.__setattr__(self, "std", tuple(float(v) for v in self.std))
        if len(self.mean) != 3 or len(self.std) != 3:
            raise ValueError("normalization needs exactly 3 mean and 3 std entries")
        if not all(s > 0 for s in self.std):
            raise ValueError(f"normalization std must be strictly positive, got {self.std}")


@dataclass(frozen=True)
class Node:
    id: str
    op: str
    inputs: Tuple[str, ...] = ()
    params: dict = field(default_factory=dict)

    def conv_spec(self):
        p = self.params
        return ops.ConvSpec(kernel=tuple(p["kernel"]), stride=tuple(p["stride"]),
                            padding=tuple(p["padding"]), groups=p["groups"],
                            has_bias=p.get("bias") is not None, pad_value=p.get("pad_value"))


@dataclass
class GraphModel:
    """Topologically ordered node list plus a named float32 weight store.

    ``inputs`` and ``outputs`` map public names to node ids. The model is
    treated as immutable once built; rewrite passes return new instances.
    """

    nodes: List[Node]
    weights: Dict[str, np.ndarray]
    inputs: Dict[str, str]
    outputs: Dict[str, str]
    input_resolution: Tuple[int, int] = (480, 640)
    normalization: Optional[NormalizationParams] = None

    def __post_init__(self):
        self.validate()

    def node(self, node_id):
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def consumers(self, node_id):
        return [n for n in self.nodes if node_id in n.inputs]

    def validate(self):
        seen = set()
        for n in self.nodes:
            if n.op not in OP_KINDS:
                raise GraphError(f"node {n.id}: unknown op {n.op!r}")
            if n.id in seen:
                raise GraphError(f"duplicate node id {n.id!r}")
            for src in n.inputs:
                if src not in seen:
                    raise GraphError(f"node {n.id}: input {src!r} does not precede it")
            if n.op == "conv":
                self._check_conv(n)
            seen.add(n.id)
        for name, nid in {**self.inputs, **self.outputs}.items():
            if nid not in seen:
                raise GraphError(f"graph endpoint {name!r} refers to missing node {nid!r}")

    def _check_conv(self, n):
        p = n.params
        w = self.weights.get(p["weight"])
        if w is None:
            raise GraphError(f"node {n.id}: missing weight {p['weight']!r}")
        cout, cig, kh, kw = w.shape
        if (kh, kw) != tuple(p["kernel"]):
            raise GraphError(f"node {n.id}: weight kernel {(kh, kw)} != {tuple(p['kernel'])}")
        if cout % p["groups"]:
            raise GraphError(f"node {n.id}: groups {p['groups']} do not divide c_out {cout}")
        if p.get("bias") is not None:
            b = self.weights.get(p["bias"])
            if b is None:
                raise GraphError(f"node {n.id}: missing bias {p['bias']!r}")
            if b.shape != (cout,):
                raise GraphError(f"node {n.id}: bias shape {b.shape} != ({cout},)")

    def parameter_count(self):
        return int(sum(w.size for w in self.weights.values()))

    def parameter_bytes(self):
        return int(sum(w.nbytes for w in self.weights.values()))

    def copy(self, **changes):
        """Shallow structural copy with fresh weight dict (arrays shared)."""
        base = dict(nodes=list(self.nodes), weights=dict(self.weights), inputs=dict(self.inputs),
                    outputs=dict(self.outputs))
        base.update(changes)
        return replace(self, **base)


def _exec_node(model, node, env, accumulate, backend):
    args = [env[i] for i in node.inputs]
    p = node.params
    if node.op == "conv":
        w = model.weights[p["weight"]]
        b = model.weights[p["bias"]] if p.get("bias") is not None else None
        return ops.conv2d(args[0], w, b, node.conv_spec(), accumulate=accumulate, backend=backend)
    if node.op == "activation":
        return ops.activation(args[0], p["kind"])
    if node.op == "resize":
        oh, ow = p["size"]
        return ops.resize_bilinear(args[0], oh, ow, p.get("align_corners", False), backend=backend)
    if node.op == "concat":
        return ops.concat_channels(*args)
    if node.op == "add":
        return ops.add(*args)
    if node.op == "pool":
        return ops.global_avg_pool(args[0])
    if node.op == "scale":
        return ops.scale_channels(*args)
    raise GraphError(f"node {node.id}: cannot execute op {node.op!r}")


def run(model, image, apply_normalization=None, accumulate="float32", backend=None,
        return_all=False):
    """Execute the graph on an NCHW image batch.

    ``apply_normalization`` defaults to "whenever the model carries a
    normalization record". The image is normalized before the first node,
    exactly as the unfolded training-time pipeline does. Returns the
    ``depth`` output, or a dict of every named output when ``return_all``.
    """
    image = ops.as_tensor(image, "image")
    h, w = model.input_resolution
    if image.shape[1:] != (3, h, w):
        raise GraphError(f"image shape {image.shape[1:]} does not match model input (3, {h}, {w})")
    if apply_normalization is None:
        apply_normalization = model.normalization is not None
    if apply_normalization:
        if model.normalization is None:
            raise GraphError("apply_normalization requested but model has no normalization record")
        image = ops.normalize_channels(image, model.normalization.mean, model.normalization.std)

    needed_by = {}
    for n in model.nodes:
        for src in n.inputs:
            needed_by[src] = n.id
    keep = set(model.outputs.values())

    env = {}
    for n in model.nodes:
        if n.op == "input":
            env[n.id] = image
            continue
        try:
            env[n.id] = _exec_node(model, n, env, accumulate, backend)
        except (ops.ShapeError, ValueError, KeyError) as exc:
            raise GraphError(f"node {n.id} ({n.op}) failed: {exc}") from exc
        # drop intermediates once their last consumer has run
        for src in n.inputs:
            if needed_by.get(src) == n.id and src not in keep:
                env.pop(src, None)
    if return_all:
        return {name: env[nid] for name, nid in model.outputs.items()}
    return env[model.outputs["depth"]]
