"""Merge input normalization into the first convolution.

With ``x_n = (x - m) / s`` feeding ``W * x_n + b``, the equivalent raw-input
conv has ``W'[:, d] = W[:, d] / s[d]`` and
``b'[i] = b[i] - sum_d (m[d] / s[d]) * sum_j W[i, d, j]``.

Zero padding in normalized space corresponds to the value ``m`` in raw
space, so when the first conv pads its borders the folded node pads with
``m`` per channel instead of zero. Without that, border outputs would differ.
"""

import logging

import numpy as np

from .model import GraphError

logger = logging.getLogger(__name__)

# per-channel affine maps commute with these (weights of each output sample sum to 1)
_AFFINE_TRANSPARENT = ("resize",)


class FoldError(GraphError):
    """The graph does not have a foldable normalization/conv pair."""


def find_first_conv(model):
    """Follow the image input through affine-transparent nodes to its first conv."""
    current = model.inputs["image"]
    path = []
    while True:
        consumers = model.consumers(current)
        if len(consumers) != 1:
            raise FoldError(f"normalized image node {current!r} has {len(consumers)} consumers; "
                            "folding needs a single chain into the first conv")
        node = consumers[0]
        if node.op in _AFFINE_TRANSPARENT:
            path.append(node.id)
            current = node.id
            continue
        if node.op != "conv":
            raise FoldError(f"first consumer of the image is {node.id!r} ({node.op}), not a conv")
        if node.params["groups"] != 1:
            raise FoldError(f"first conv {node.id!r} is grouped (groups={node.params['groups']}); "
                            "only dense convs can absorb the normalization")
        return node, path


def fold_weights(weight, bias, mean, std):
    """Return folded (weight, bias) in float32, computed in float64."""
    w = np.asarray(weight, dtype=np.float64)
    b = np.zeros(w.shape[0]) if bias is None else np.asarray(bias, dtype=np.float64)
    m = np.asarray(mean, dtype=np.float64)
    s = np.asarray(std, dtype=np.float64)
    if w.shape[1] != m.size:
        raise FoldError(f"first conv has {w.shape[1]} input channels, normalization has {m.size}")
    w_folded = w / s[None, :, None, None]
    b_folded = b - ((m / s)[None, :] * w.sum(axis=(2, 3))).sum(axis=1)
    return w_folded.astype(np.float32), b_folded.astype(np.float32)


def fold_normalization(model, exact_borders=True):
    """Return a copy of ``model`` with its normalization record folded away.

    A model without a normalization record is returned unchanged (with a
    warning). ``exact_borders=False`` keeps zero padding, reproducing the
    bare weight/bias rewrite, which is only exact away from padded borders.
    """
    norm = model.normalization
    if norm is None:
        logger.warning("model has no normalization record; fold is a no-op")
        return model
    conv, _ = find_first_conv(model)
    p = conv.params
    if p.get("pad_value") is not None:
        raise FoldError(f"first conv {conv.id!r} already has a non-zero pad value")
    w_name, b_name = p["weight"], p.get("bias")
    weights = dict(model.weights)
    w_new, b_new = fold_weights(weights[w_name], weights[b_name] if b_name else None,
                                norm.mean, norm.std)
    weights[w_name] = w_new
    new_params = dict(p)
    if b_name is None:
        # the folded conv always needs a bias; keep the weight store layout stable
        b_name = f"{conv.id}.bias"
        if b_name in weights:
            raise FoldError(f"cannot add bias {b_name!r}: name already taken")
        new_params["bias"] = b_name
    weights[b_name] = b_new
    if exact_borders and any(p["padding"]):
        new_params["pad_value"] = list(norm.mean)
    nodes = [type(n)(n.id, n.op, n.inputs, new_params) if n.id == conv.id else n
             for n in model.nodes]
    return model.copy(nodes=nodes, weights=weights, normalization=None)
