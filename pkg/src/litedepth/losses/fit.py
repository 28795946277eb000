"""Toy fitting loop: descend a free per-pixel depth map with the loss suite.

There is no network here. The prediction map itself is the parameter, which
makes the multi-term loss and the dynamic re-weighting observable end to end
on synthetic scenes.
"""

from dataclasses import dataclass, field
from typing import List

import numpy as np

from ..metrics import si_rmse
from .combine import LossWeights, depth_loss
from .terms import RobustParams, SilogParams
from .vnl import VnlSamplerConfig


class FitDivergedError(RuntimeError):
    def __init__(self, step, message):
        super().__init__(f"step {step}: {message}")
        self.step = step


@dataclass
class FitStep:
    step: int
    combined: float
    terms: dict
    si_rmse: float
    log_vars: tuple

    def to_dict(self):
        return {"step": self.step, "combined": self.combined, "terms": self.terms,
                "si_rmse": self.si_rmse, "log_vars": list(self.log_vars)}


@dataclass
class FitTrace:
    steps: List[FitStep] = field(default_factory=list)
    final_pred: np.ndarray = None
    final_si_rmse: float = float("nan")
    final_log_vars: tuple = ()

    @property
    def initial_si_rmse(self):
        return self.steps[0].si_rmse


class _Adam:
    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m = self.v = None
        self.t = 0

    def step(self, x, g):
        if self.m is None:
            self.m = np.zeros_like(g)
            self.v = np.zeros_like(g)
        self.t += 1
        self.m = self.b1 * self.m + (1 - self.b1) * g
        self.v = self.b2 * self.v + (1 - self.b2) * g * g
        m_hat = self.m / (1 - self.b1 ** self.t)
        v_hat = self.v / (1 - self.b2 ** self.t)
        return x - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def toy_problem(scene="slanted", height=32, width=32, noise=0.05, init_noise=0.2,
                invalid_fraction=0.1, seed=0):
    """Noisy target, clean reference, validity mask and log-normal initial map for a synthetic scene."""
    from ..data_io import scene_depth, synth_scene
    sample = synth_scene(scene, height, width, noise=noise, invalid_fraction=invalid_fraction, seed=seed)
    clean = scene_depth(scene, height, width)
    rng = np.random.default_rng(seed + 1)
    init = np.where(sample.valid, clean * np.exp(rng.normal(0.0, init_noise, clean.shape)), 0.0)
    return sample.depth, clean, sample.valid, init


def fit_toy(gt, valid, init_pred, steps=500, lr=0.01, weights=LossWeights(),
            silog=SilogParams(), robust=RobustParams(), intr=None,
            vnl_config=VnlSamplerConfig(), seed=0, log_var_lr=None, optimizer="adam",
            min_depth=1e-3, reference=None):
    """Run ``steps`` updates of the prediction map; returns a :class:`FitTrace`.

    ``gt`` is the (possibly noisy) supervision map. The recorded si-RMSE is
    measured against ``reference`` when given (e.g. the noise-free scene),
    otherwise against ``gt``. Each step records the state *before* its update. VNL triplets are
    re-sampled every step from a stream seeded by ``seed``. With
    ``weights.dynamic`` the log-variances are updated alongside the map.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if optimizer not in ("adam", "sgd"):
        raise ValueError(f"optimizer must be adam or sgd, got {optimizer!r}")
    gt = np.asarray(gt, dtype=np.float64)
    valid = np.asarray(valid, dtype=bool)
    pred = np.array(init_pred, dtype=np.float64)
    reference = gt if reference is None else np.asarray(reference, dtype=np.float64)
    log_vars = np.asarray(weights.log_vars, dtype=np.float64)
    rng = np.random.default_rng(seed)
    opt_pred = _Adam(lr) if optimizer == "adam" else None
    opt_s = _Adam(log_var_lr if log_var_lr is not None else lr) if optimizer == "adam" else None

    trace = FitTrace()
    for step in range(steps + 1):
        w = LossWeights(weights.w, weights.w_d, weights.dynamic, tuple(log_vars))
        report = depth_loss(pred, gt, valid, silog, robust, w, intr, vnl_config, rng)
        current = si_rmse(pred, reference, valid)
        if not np.isfinite(report.combined) or not np.all(np.isfinite(report.combined_grad)):
            raise FitDivergedError(step, f"non-finite loss {report.combined}")
        trace.steps.append(FitStep(step, report.combined, dict(report.terms), current,
                                   tuple(float(v) for v in log_vars)))
        if step == steps:
            break
        g = report.combined_grad
        if optimizer == "adam":
            pred = opt_pred.step(pred, g)
        else:
            pred = pred - lr * g
        pred = np.where(valid, np.maximum(pred, min_depth), pred)
        if weights.dynamic:
            gs = np.asarray(report.log_var_grads)
            log_vars = opt_s.step(log_vars, gs) if optimizer == "adam" else log_vars - lr * gs
    trace.final_pred = pred
    trace.final_si_rmse = trace.steps[-1].si_rmse
    trace.final_log_vars = tuple(float(v) for v in log_vars)
    return trace
