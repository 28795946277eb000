import itertools

import numpy as np
import pytest

from litedepth.losses import (CameraIntrinsics, LossError, LossWeights, RobustParams, SilogParams,
                              VnlSamplerConfig, depth_loss, grad_loss, robust_loss, silog_loss,
                              total_loss, vnl_loss)
from litedepth.losses.terms import gradient_masks
from litedepth.data_io import scene_depth
from oracles import (central_difference, grad_check, grad_loss_pairs, random_pair, relative_error,
                     surface_pair, vnl_reference)

INTR24 = CameraIntrinsics.default_for(24, 24, focal=24.0)
SMALL_VNL = VnlSamplerConfig(num_samples=300, min_pixel_distance=2.0, min_accepted=8)


# silog

def test_silog_zero_at_gt():
    gt = np.random.default_rng(0).uniform(1, 5, (6, 7))
    value, grad = silog_loss(gt, gt, np.ones_like(gt, bool))
    assert value == 0.0
    assert not grad.any()


@pytest.mark.parametrize("k", [0.1, 2.0, 10.0])
def test_silog_full_variance_scale_invariant(k):
    pred, gt, valid = random_pair(np.random.default_rng(1))
    p = SilogParams(lam=1.0)
    assert silog_loss(k * gt, gt, valid, p)[0] == pytest.approx(0.0, abs=1e-6)
    assert silog_loss(k * pred, gt, valid, p)[0] == pytest.approx(silog_loss(pred, gt, valid, p)[0], rel=1e-9)


def test_silog_matches_formula():
    pred, gt, valid = random_pair(np.random.default_rng(2))
    e = np.log(pred[valid]) - np.log(gt[valid])
    expected = 10 * np.sqrt(np.mean(e ** 2) - 0.85 * np.mean(e) ** 2)
    assert silog_loss(pred, gt, valid)[0] == pytest.approx(expected, rel=1e-12)


def test_silog_fd_relative_step():
    pred, gt, valid = random_pair(np.random.default_rng(3))
    value, grad = silog_loss(pred, gt, valid)
    err, off = grad_check(lambda p: silog_loss(p, gt, valid)[0], grad, pred, valid, h=1e-3 * pred)
    assert err <= 1e-4 and off == 0.0


def test_silog_clamps_zero_prediction():
    pred, gt, valid = random_pair(np.random.default_rng(4))
    pred[0, 0] = 0.0
    valid[0, 0] = True
    value, grad = silog_loss(pred, gt, valid)
    assert np.isfinite(value)
    assert grad[0, 0] == 0.0


def test_param_validation():
    with pytest.raises(ValueError):
        SilogParams(alpha=0)
    with pytest.raises(ValueError):
        SilogParams(lam=1.5)
    for a in (0.0, 2.0):
        with pytest.raises(ValueError):
            RobustParams(alpha=a)
    with pytest.raises(ValueError):
        RobustParams(c=0)


def test_empty_mask_and_shape_errors():
    gt = np.ones((4, 4))
    for fn in (silog_loss, grad_loss, robust_loss):
        with pytest.raises(LossError, match="empty"):
            fn(gt, gt, np.zeros((4, 4), bool))
        with pytest.raises(LossError, match="shapes"):
            fn(gt, np.ones((4, 5)), np.ones((4, 4), bool))


# gradient loss

def test_grad_loss_constant_maps():
    assert grad_loss(np.full((5, 5), 3.0), np.full((5, 5), 2.0), np.ones((5, 5), bool))[0] == 0.0


def test_grad_loss_center_invalid():
    valid = np.ones((3, 3), bool)
    valid[1, 1] = False
    gt = np.arange(9.0).reshape(3, 3) ** 1.5
    gx, gy, mx, my = gradient_masks(gt, valid)
    assert (~mx).sum() == 2 and not mx[1, 0] and not mx[1, 1]
    assert (~my).sum() == 2 and not my[0, 1] and not my[1, 1]
    pred = np.random.default_rng(5).uniform(1, 3, (3, 3))
    value, _ = grad_loss(pred, gt, valid)
    expected, nx, ny = grad_loss_pairs(pred, gt, valid)
    assert (nx, ny) == (4, 4)
    assert value == pytest.approx(expected, abs=1e-12)


def test_grad_loss_all_512_patterns():
    r = np.random.default_rng(6)
    pred, gt = r.uniform(1, 5, (3, 3)), r.uniform(1, 5, (3, 3))
    checked = 0
    for bits in itertools.product([False, True], repeat=9):
        valid = np.array(bits).reshape(3, 3)
        oracle = grad_loss_pairs(pred, gt, valid)
        if oracle is None:
            with pytest.raises(LossError):
                grad_loss(pred, gt, valid)
            continue
        assert abs(grad_loss(pred, gt, valid)[0] - oracle[0]) <= 1e-7
        checked += 1
    assert checked > 400


def test_grad_loss_no_pairs():
    valid = np.zeros((3, 3), bool)
    valid[0, 0] = valid[2, 2] = True
    with pytest.raises(LossError, match="pairs"):
        grad_loss(np.ones((3, 3)), np.ones((3, 3)), valid)


# robust loss

def test_robust_trivial_values():
    gt = np.full((4, 4), 2.0)
    valid = np.ones((4, 4), bool)
    assert robust_loss(gt, gt, valid)[0] == -1.0
    assert robust_loss(np.array([[4.0]]), np.array([[2.0]]), np.ones((1, 1), bool))[0] == 0.0
    p = RobustParams(alpha=0.5, c=1.0)
    assert robust_loss(gt, gt, valid, p)[0] == pytest.approx(p.floor)


def test_robust_alpha_one_is_l1_like():
    e = np.linspace(-3, 3, 13)[None, :]
    value, _ = robust_loss(e, np.zeros_like(e), np.ones_like(e, bool))
    assert value == pytest.approx(np.mean(np.abs(e) / 2 - 1))


def test_robust_near_two_limit():
    e = np.array([[0.3, -1.2, 2.5, 4.0]])
    p = RobustParams(alpha=2 - 1e-6, c=2.0)
    terms = [robust_loss(e[:, i:i + 1], np.zeros((1, 1)), np.ones((1, 1), bool), p)[0] for i in range(4)]
    expected = 0.5 * (e[0] / 2.0) ** 2
    np.testing.assert_allclose(terms, expected, rtol=1e-3)


# gradient checks on random instances (float64)

@pytest.mark.parametrize("seed", range(20))
def test_fd_silog(seed):
    pred, gt, valid = random_pair(np.random.default_rng(100 + seed))
    _, grad = silog_loss(pred, gt, valid)
    err, off = grad_check(lambda p: silog_loss(p, gt, valid)[0], grad, pred, valid)
    assert err <= 1e-5 and off == 0.0


@pytest.mark.parametrize("seed", range(20))
def test_fd_grad_loss(seed):
    pred, gt, valid = random_pair(np.random.default_rng(200 + seed))
    _, grad = grad_loss(pred, gt, valid)
    err, off = grad_check(lambda p: grad_loss(p, gt, valid)[0], grad, pred, valid)
    assert err <= 1e-5 and off == 0.0


@pytest.mark.parametrize("seed", range(20))
def test_fd_robust(seed):
    pred, gt, valid = random_pair(np.random.default_rng(300 + seed))
    _, grad = robust_loss(pred, gt, valid)
    err, off = grad_check(lambda p: robust_loss(p, gt, valid)[0], grad, pred, valid)
    assert err <= 1e-5 and off == 0.0


@pytest.mark.parametrize("seed", range(20))
def test_fd_vnl(seed):
    pred, gt, valid = surface_pair(np.random.default_rng(400 + seed))
    intr = CameraIntrinsics.default_for(8, 8, focal=8.0)
    _, grad, trip = vnl_loss(pred, gt, valid, intr, SMALL_VNL, rng=seed)
    err, off = grad_check(lambda p: vnl_loss(p, gt, valid, intr, triplets=trip)[0], grad, pred, valid)
    assert err <= 1e-5 and off == 0.0


# virtual normal

def test_vnl_zero_when_equal():
    gt = scene_depth("slanted", 16, 16)
    valid = np.ones_like(gt, bool)
    value, grad, _ = vnl_loss(gt, gt, valid)
    assert value == pytest.approx(0.0, abs=1e-12)
    assert np.abs(grad).max() < 1e-6


def test_vnl_fronto_parallel_offset():
    gt = np.full((16, 16), 4.0)
    valid = np.ones_like(gt, bool)
    value, _, _ = vnl_loss(gt + 0.7, gt, valid)
    assert value == pytest.approx(0.0, abs=1e-12)


def test_vnl_matches_reimplementation():
    gt = scene_depth("slanted", 16, 16)
    pred = gt * np.exp(np.random.default_rng(7).normal(0, 0.05, gt.shape))
    valid = np.ones_like(gt, bool)
    valid[3, 4:9] = False
    intr = CameraIntrinsics.default_for(16, 16)
    cfg = VnlSamplerConfig()
    value, grad, trip = vnl_loss(pred, gt, valid, intr, cfg, rng=11)
    ref = vnl_reference(pred, gt, valid, intr.fx, intr.fy, intr.cx, intr.cy,
                        cfg.candidate_count(int(valid.sum())), cfg.min_pixel_distance,
                        cfg.min_angle_deg, cfg.max_angle_deg, cfg.min_accepted, 11)
    assert ref is not None
    assert abs(value - ref) <= 1e-6
    numeric = central_difference(lambda p: vnl_loss(p, gt, valid, intr, triplets=trip)[0], pred, 1e-6)
    assert relative_error(grad, numeric) <= 1e-3
    assert not grad[~valid].any()


def test_vnl_too_few_triplets():
    gt = np.full((6, 6), 2.0)
    with pytest.raises(LossError, match="relax"):
        vnl_loss(gt, gt, np.ones_like(gt, bool))


# combination

def test_depth_loss_planar_floor():
    gt = scene_depth("slanted", 24, 32)
    rep = depth_loss(gt, gt, np.ones_like(gt, bool))
    assert rep.terms["silog"] == 0.0 and rep.terms["grad"] == pytest.approx(0.0, abs=1e-12)
    assert rep.terms["vnl"] == pytest.approx(0.0, abs=1e-12)
    assert rep.combined == pytest.approx(-0.6)


def test_depth_loss_static_sum_and_linearity():
    pred, gt, valid = surface_pair(np.random.default_rng(8), 24, 24)
    rep = depth_loss(pred, gt, valid, intr=INTR24)
    t = rep.terms
    assert rep.combined == 1.0 * t["silog"] + 0.25 * t["grad"] + 2.5 * t["vnl"] + 0.6 * t["robust"]
    zero = depth_loss(pred, gt, valid, weights=LossWeights(w=(0, 0, 0, 0)), intr=INTR24)
    assert zero.combined == 0.0 and not zero.combined_grad.any()
    for i, name in enumerate(("silog", "grad", "vnl", "robust")):
        w = [0.0] * 4
        w[i] = 3.0
        single = depth_loss(pred, gt, valid, weights=LossWeights(w=tuple(w)), intr=INTR24)
        assert single.combined == pytest.approx(3.0 * t[name], rel=1e-12)


def test_depth_loss_dynamic_gradients():
    pred, gt, valid = surface_pair(np.random.default_rng(9), 24, 24)
    s = (0.3, -0.2, 0.1, 0.5)
    rep = depth_loss(pred, gt, valid, weights=LossWeights(dynamic=True, log_vars=s), intr=INTR24)

    def combined(sv):
        return depth_loss(pred, gt, valid, weights=LossWeights(dynamic=True, log_vars=tuple(sv)),
                          intr=INTR24).combined
    numeric = central_difference(combined, np.array(s), 1e-6)
    np.testing.assert_allclose(rep.log_var_grads, numeric, rtol=1e-6, atol=1e-9)
    np.testing.assert_allclose(rep.effective_weights, np.exp(-np.array(s)))


def test_total_loss():
    assert total_loss(1.0, 0.2) == 3.0
    assert total_loss(1.25, 0.0) == 1.25
    pred, gt, valid = surface_pair(np.random.default_rng(10), 24, 24)
    rep = depth_loss(pred, gt, valid, intr=INTR24)
    assert total_loss(rep, 0.37, w_d=4.0) == rep.combined + 4.0 * 0.37
    assert total_loss(rep, 0.0) == rep.combined
