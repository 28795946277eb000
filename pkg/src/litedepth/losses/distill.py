"""Structure-aware distillation through pairwise-affinity maps."""

import numpy as np

from .terms import LossError


def _flatten(features):
    f = np.asarray(features, dtype=np.float64)
    if f.ndim != 4 or f.shape[0] != 1:
        raise LossError(f"features must have shape (1, C, H, W), got {f.shape}")
    if f.shape[1] < 1:
        raise LossError("features need at least one channel")
    return f[0].reshape(f.shape[1], -1)


def _normalize(flat):
    norm = np.linalg.norm(flat, axis=0, keepdims=True)
    safe = np.where(norm > 0, norm, 1.0)
    return np.where(norm > 0, flat / safe, 0.0), norm


def affinity_map(features):
    """(H*W, H*W) cosine similarities between channel vectors at each position.

    Zero feature vectors normalize to zero, so their rows and columns
    (diagonal included) are zero.
    """
    unit, _ = _normalize(_flatten(features))
    return unit.T @ unit


def distill_level(student, teacher):
    """One level: sum |A_s - A_t| / (H * W), with gradient w.r.t. the student map."""
    s = np.asarray(student, dtype=np.float64)
    t = np.asarray(teacher, dtype=np.float64)
    if s.ndim != 4 or t.ndim != 4 or s.shape[2:] != t.shape[2:]:
        raise LossError(f"student/teacher spatial dims differ: {s.shape} vs {t.shape}")
    hw = s.shape[2] * s.shape[3]
    flat = _flatten(s)
    unit, norm = _normalize(flat)
    a_s = unit.T @ unit
    a_t = affinity_map(t)
    diff = a_s - a_t
    value = np.abs(diff).sum() / hw

    g_a = np.sign(diff) / hw
    g_unit = unit @ (g_a + g_a.T)
    safe = np.where(norm > 0, norm, 1.0)
    g_flat = np.where(norm > 0, (g_unit - unit * np.sum(unit * g_unit, axis=0, keepdims=True)) / safe, 0.0)
    return float(value), g_flat.reshape(s.shape)


def distill_loss(student_feats, teacher_feats):
    """Sum of per-level affinity losses; returns ``(value, [grad per level])``."""
    if len(student_feats) != len(teacher_feats):
        raise LossError(f"{len(student_feats)} student levels vs {len(teacher_feats)} teacher levels")
    if not student_feats:
        raise LossError("distillation needs at least one feature level")
    total = 0.0
    grads = []
    for s, t in zip(student_feats, teacher_feats):
        v, g = distill_level(s, t)
        total += v
        grads.append(g)
    return total, grads
