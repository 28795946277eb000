"""Virtual-normal loss on back-projected point triplets.

Triplets of valid pixels are drawn at random and kept only if they form a
well-conditioned triangle in the *predicted* point cloud. For each kept
triplet the unit normals of the predicted and ground-truth triangles are
compared with an L1 distance, averaged over triplets.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .terms import LossError, check_pair

_DEGENERATE = 1e-12


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")

    @classmethod
    def default_for(cls, height, width, focal=500.0):
        return cls(focal, focal, width / 2.0, height / 2.0)


@dataclass(frozen=True)
class VnlSamplerConfig:
    num_samples: Optional[int] = None  # None: min(5000, n_valid // 3)
    max_samples: int = 5000
    min_pixel_distance: float = 5.0
    min_angle_deg: float = 15.0
    max_angle_deg: float = 165.0
    min_accepted: int = 8

    def candidate_count(self, n_valid):
        if self.num_samples is not None:
            return int(self.num_samples)
        return min(self.max_samples, n_valid // 3)


def rays(shape, intr):
    """Per-pixel back-projection rays so that point = depth * ray."""
    h, w = shape
    v, u = np.mgrid[0:h, 0:w].astype(np.float64)
    return np.stack([(u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, np.ones_like(u)], axis=-1)


def backproject(depth, intr):
    """Pinhole point cloud, shape (H, W, 3)."""
    return np.asarray(depth, dtype=np.float64)[..., None] * rays(np.shape(depth), intr)


def _triangle_angles(pa, pb, pc):
    def angle(p, q, r):
        u, v = q - p, r - p
        nu = np.linalg.norm(u, axis=-1)
        nv = np.linalg.norm(v, axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            cos = np.sum(u * v, axis=-1) / (nu * nv)
        return np.degrees(np.arccos(np.clip(np.nan_to_num(cos, nan=1.0), -1.0, 1.0)))
    return np.stack([angle(pa, pb, pc), angle(pb, pc, pa), angle(pc, pa, pb)], axis=-1)


def sample_triplets(pred, gt, valid, intr, config=VnlSamplerConfig(), rng=None):
    """Draw candidate triplets and return the accepted ones as flat pixel indices, shape (K, 3)."""
    pred, gt, valid = check_pair(pred, gt, valid)
    rng = np.random.default_rng(rng)
    h, w = pred.shape
    flat_valid = np.flatnonzero(valid.ravel())
    k = config.candidate_count(flat_valid.size)
    if k < 1:
        raise LossError(f"only {flat_valid.size} valid pixels; cannot sample VNL triplets")
    idx = flat_valid[rng.integers(0, flat_valid.size, size=(k, 3))]

    rows, cols = np.divmod(idx, w)
    uv = np.stack([cols, rows], axis=-1).astype(np.float64)
    d01 = np.linalg.norm(uv[:, 0] - uv[:, 1], axis=-1)
    d12 = np.linalg.norm(uv[:, 1] - uv[:, 2], axis=-1)
    d20 = np.linalg.norm(uv[:, 2] - uv[:, 0], axis=-1)
    far_enough = np.minimum(np.minimum(d01, d12), d20) >= config.min_pixel_distance

    pts = backproject(pred, intr).reshape(-1, 3)[idx]
    ang = _triangle_angles(pts[:, 0], pts[:, 1], pts[:, 2])
    well_shaped = np.all((ang >= config.min_angle_deg) & (ang <= config.max_angle_deg), axis=-1)

    gpts = backproject(gt, intr).reshape(-1, 3)[idx]
    gt_normal = np.cross(gpts[:, 1] - gpts[:, 0], gpts[:, 2] - gpts[:, 0])
    gt_ok = np.linalg.norm(gt_normal, axis=-1) > _DEGENERATE

    accepted = idx[far_enough & well_shaped & gt_ok]
    if len(accepted) < config.min_accepted:
        raise LossError(f"only {len(accepted)} of {k} VNL triplets passed the constraints "
                        f"(need {config.min_accepted}); relax min_pixel_distance or the angle range")
    return accepted


def _unit_normals(points):
    c = np.cross(points[:, 1] - points[:, 0], points[:, 2] - points[:, 0])
    norm = np.linalg.norm(c, axis=-1, keepdims=True)
    return c / norm, c, norm


def vnl_from_triplets(pred, gt, triplets, intr):
    """Loss value and d/d(pred) for a fixed set of triplets."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    ray = rays(pred.shape, intr).reshape(-1, 3)[triplets]          # (K, 3, 3)
    p_pts = pred.ravel()[triplets][..., None] * ray
    g_pts = gt.ravel()[triplets][..., None] * ray
    n_hat, _, c_norm = _unit_normals(p_pts)
    n_gt, _, _ = _unit_normals(g_pts)
    if np.any(c_norm <= _DEGENERATE):
        raise LossError("degenerate predicted triangle among the VNL triplets")
    diff = n_hat - n_gt
    k = len(triplets)
    value = np.abs(diff).sum() / k

    g_n = np.sign(diff) / k
    g_c = (g_n - n_hat * np.sum(n_hat * g_n, axis=-1, keepdims=True)) / c_norm
    a = p_pts[:, 1] - p_pts[:, 0]
    b = p_pts[:, 2] - p_pts[:, 0]
    g_a = np.cross(b, g_c)
    g_b = np.cross(g_c, a)
    g_pts = np.stack([-g_a - g_b, g_a, g_b], axis=1)
    g_depth = np.sum(g_pts * ray, axis=-1)
    grad = np.zeros(pred.size)
    np.add.at(grad, triplets.ravel(), g_depth.ravel())
    return float(value), grad.reshape(pred.shape)


def vnl_loss(pred, gt, valid, intr=None, config=VnlSamplerConfig(), rng=0, triplets=None):
    """Virtual-normal loss; returns ``(value, grad, triplets)``.

    Pass ``triplets`` to reuse an earlier sample (e.g. for finite differences).
    """
    pred, gt, valid = check_pair(pred, gt, valid)
    if intr is None:
        intr = CameraIntrinsics.default_for(*pred.shape)
    if triplets is None:
        triplets = sample_triplets(pred, gt, valid, intr, config, rng)
    value, grad = vnl_from_triplets(pred, gt, triplets, intr)
    return value, grad, triplets
