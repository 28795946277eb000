"""Per-pixel depth loss terms with analytic gradients.

Every term takes ``(pred, gt, valid)`` H x W maps and returns
``(value, grad)`` where ``grad`` is d(value)/d(pred), zero on invalid
pixels. Computation is carried out in float64 regardless of input dtype.
"""

from dataclasses import dataclass

import numpy as np

PRED_FLOOR = 1e-6


class LossError(ValueError):
    """A loss could not be evaluated on the given inputs."""


@dataclass(frozen=True)
class SilogParams:
    alpha: float = 10.0
    lam: float = 0.85

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"silog alpha must be positive, got {self.alpha}")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"silog lambda must lie in [0, 1], got {self.lam}")


@dataclass(frozen=True)
class RobustParams:
    alpha: float = 1.0
    c: float = 2.0

    def __post_init__(self):
        if self.alpha in (0.0, 2.0):
            raise ValueError("robust alpha must not be 0 or 2 (the general form is singular there)")
        if not self.c > 0:
            raise ValueError(f"robust c must be positive, got {self.c}")

    @property
    def floor(self):
        """Value of a single term at zero error."""
        return -abs(self.alpha - 2.0) / self.alpha


def check_pair(pred, gt, valid):
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    valid = np.asarray(valid, dtype=bool)
    if pred.ndim != 2 or pred.shape != gt.shape or pred.shape != valid.shape:
        raise LossError(f"pred/gt/valid must be equal 2-D shapes, got "
                        f"{pred.shape}, {gt.shape}, {valid.shape}")
    if not valid.any():
        raise LossError("valid mask is empty")
    return pred, gt, valid


def silog_loss(pred, gt, valid, params=SilogParams()):
    """alpha * sqrt(mean(e^2) - lam * mean(e)^2) with e = log pred - log gt."""
    pred, gt, valid = check_pair(pred, gt, valid)
    if np.any(gt[valid] <= 0):
        raise LossError("silog needs positive ground truth on valid pixels")
    p = pred[valid]
    clamped = p < PRED_FLOOR
    e = np.log(np.maximum(p, PRED_FLOOR)) - np.log(gt[valid])
    n = e.size
    mean_e = e.mean()
    radicand = np.mean(e * e) - params.lam * mean_e * mean_e
    if radicand < -1e-12:
        raise LossError(f"silog radicand is negative ({radicand})")
    radicand = max(radicand, 0.0)
    grad = np.zeros_like(pred)
    value = params.alpha * np.sqrt(radicand)
    if radicand > 0.0:
        de = params.alpha / (2.0 * np.sqrt(radicand)) * (2.0 * e - 2.0 * params.lam * mean_e) / n
        g = de / np.maximum(p, PRED_FLOOR)
        g[clamped] = 0.0
        grad[valid] = g
    return float(value), grad


def gradient_masks(gt, valid):
    """Forward-difference gt gradients with invalid pixels propagated as NaN.

    Returns ``(gx, gy, mx, my)``; ``mx``/``my`` mark finite entries, i.e.
    pairs whose two pixels are both valid.
    """
    marked = np.where(valid, gt, np.nan)
    with np.errstate(invalid="ignore"):
        gx = marked[:, 1:] - marked[:, :-1]
        gy = marked[1:, :] - marked[:-1, :]
    return gx, gy, np.isfinite(gx), np.isfinite(gy)


def grad_loss(pred, gt, valid):
    """Masked L1 distance between forward-difference gradients.

    Each direction is averaged over its own mask count; the two means are
    summed. A direction with no valid pairs contributes zero.
    """
    pred, gt, valid = check_pair(pred, gt, valid)
    gx, gy, mx, my = gradient_masks(gt, valid)
    nx, ny = int(mx.sum()), int(my.sum())
    if nx + ny == 0:
        raise LossError("no valid neighbouring pixel pairs for the gradient loss")
    px = pred[:, 1:] - pred[:, :-1]
    py = pred[1:, :] - pred[:-1, :]
    grad = np.zeros_like(pred)
    value = 0.0
    if nx:
        dx = np.where(mx, px - np.where(mx, gx, 0.0), 0.0)
        value += np.abs(dx[mx]).sum() / nx
        sx = np.sign(dx) / nx
        grad[:, 1:] += sx
        grad[:, :-1] -= sx
    if ny:
        dy = np.where(my, py - np.where(my, gy, 0.0), 0.0)
        value += np.abs(dy[my]).sum() / ny
        sy = np.sign(dy) / ny
        grad[1:, :] += sy
        grad[:-1, :] -= sy
    return float(value), grad


def robust_loss(pred, gt, valid, params=RobustParams()):
    """Mean of |a-2|/a * (((e/c)^2 / |a-2|)^(a/2) - 1) with e = pred - gt."""
    pred, gt, valid = check_pair(pred, gt, valid)
    a, c = params.alpha, params.c
    b = abs(a - 2.0)
    x = (pred[valid] - gt[valid]) / c
    terms = (b / a) * (np.power(x * x / b, a / 2.0) - 1.0)
    n = x.size
    # d/de = sign(x) |x|^(a-1) b^(1-a/2) / c, taken as 0 at x = 0
    ax = np.abs(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        g = np.where(ax > 0, np.sign(x) * np.power(ax, a - 1.0) * b ** (1.0 - a / 2.0) / c, 0.0)
    grad = np.zeros_like(pred)
    grad[valid] = g / n
    return float(terms.mean()), grad
