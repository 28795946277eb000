"""Weighted combination of the depth terms and the distillation term."""

from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from .terms import RobustParams, SilogParams, grad_loss, robust_loss, silog_loss
from .vnl import VnlSamplerConfig, vnl_loss

TERM_NAMES = ("silog", "grad", "vnl", "robust")


@dataclass(frozen=True)
class LossWeights:
    """Static term weights, or learnable log-variances when ``dynamic``.

    In dynamic mode the combined loss is ``sum_k exp(-s_k) * L_k + s_k``.
    The robust term enters shifted by its zero-error floor so every
    ``L_k`` is non-negative; otherwise its ``s_k`` would run off to minus
    infinity.
    """

    w: Tuple[float, float, float, float] = (1.0, 0.25, 2.5, 0.6)
    w_d: float = 10.0
    dynamic: bool = False
    log_vars: Tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "w", tuple(float(v) for v in self.w))
        object.__setattr__(self, "log_vars", tuple(float(v) for v in self.log_vars))
        if len(self.w) != 4 or len(self.log_vars) != 4:
            raise ValueError("LossWeights needs four weights and four log-variances")
        if min(self.w) < 0 or self.w_d < 0:
            raise ValueError(f"loss weights must be non-negative, got {self.w}, w_d={self.w_d}")


@dataclass
class LossReport:
    terms: Dict[str, float]
    grads: Dict[str, np.ndarray] = field(repr=False)
    combined: float
    combined_grad: np.ndarray = field(repr=False)
    effective_weights: Tuple[float, float, float, float]
    log_var_grads: Optional[Tuple[float, float, float, float]] = None

    def to_dict(self):
        out = {"terms": dict(self.terms), "combined": self.combined,
               "effective_weights": list(self.effective_weights)}
        if self.log_var_grads is not None:
            out["log_var_grads"] = list(self.log_var_grads)
        return out


def depth_loss(pred, gt, valid, silog=SilogParams(), robust=RobustParams(),
               weights=LossWeights(), intr=None, vnl_config=VnlSamplerConfig(), rng=0,
               triplets=None):
    """Evaluate all four depth terms and their weighted combination."""
    terms, grads = {}, {}
    terms["silog"], grads["silog"] = silog_loss(pred, gt, valid, silog)
    terms["grad"], grads["grad"] = grad_loss(pred, gt, valid)
    terms["vnl"], grads["vnl"], _ = vnl_loss(pred, gt, valid, intr, vnl_config, rng, triplets)
    terms["robust"], grads["robust"] = robust_loss(pred, gt, valid, robust)

    if weights.dynamic:
        s = np.asarray(weights.log_vars)
        shifted = np.array([terms["silog"], terms["grad"], terms["vnl"],
                            terms["robust"] - robust.floor])
        eff = np.exp(-s)
        combined = float(np.sum(eff * shifted + s))
        log_var_grads = tuple(float(v) for v in (1.0 - eff * shifted))
    else:
        eff = np.asarray(weights.w)
        combined = float(sum(wk * terms[n] for wk, n in zip(weights.w, TERM_NAMES)))
        log_var_grads = None
    combined_grad = sum(float(wk) * grads[n] for wk, n in zip(eff, TERM_NAMES))
    return LossReport(terms, grads, combined, combined_grad,
                      tuple(float(v) for v in eff), log_var_grads)


def total_loss(depth, distill_value, w_d=10.0):
    """Depth loss (a float or a :class:`LossReport`) plus ``w_d`` times the distillation loss."""
    base = depth.combined if isinstance(depth, LossReport) else float(depth)
    return base + w_d * float(distill_value)
