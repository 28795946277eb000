import numpy as np
import pytest

from litedepth.data_io import synth_scene, scene_depth
from litedepth.losses import FitDivergedError, LossWeights, fit_toy


def _scene(seed=0):
    clean = scene_depth("slanted", 48, 64)
    noisy = clean + np.random.default_rng(seed).normal(0, 0.05, clean.shape)
    init = clean * np.exp(np.random.default_rng(seed + 1).normal(0, 0.1, clean.shape))
    return clean, noisy, np.ones_like(clean, bool), init


def test_init_at_gt_stays_at_floor():
    gt = scene_depth("slanted", 32, 32)
    valid = np.ones_like(gt, bool)
    trace = fit_toy(gt, valid, gt, steps=5)
    combined = [s.combined for s in trace.steps]
    assert combined == pytest.approx([-0.6] * 6, abs=1e-9)
    assert trace.final_si_rmse == pytest.approx(0.0, abs=1e-9)


def test_fit_reduces_error():
    clean, noisy, valid, init = _scene()
    trace = fit_toy(noisy, valid, init, steps=150, reference=clean)
    assert len(trace.steps) == 151
    assert trace.final_si_rmse < 0.5 * trace.initial_si_rmse


def test_dynamic_moves_log_vars():
    clean, noisy, valid, init = _scene()
    trace = fit_toy(noisy, valid, init, steps=50, weights=LossWeights(dynamic=True), reference=clean)
    assert trace.final_log_vars != (0.0, 0.0, 0.0, 0.0)
    assert trace.final_si_rmse < trace.initial_si_rmse


def test_deterministic():
    clean, noisy, valid, init = _scene()
    a = fit_toy(noisy, valid, init, steps=10, seed=3)
    b = fit_toy(noisy, valid, init, steps=10, seed=3)
    assert a.final_pred.tobytes() == b.final_pred.tobytes()


def test_divergence_reports_step():
    clean, noisy, valid, init = _scene()
    init = init.copy()
    init[5, 5] = np.nan
    with pytest.raises(FitDivergedError) as err:
        fit_toy(noisy, valid, init, steps=5)
    assert err.value.step == 0
    assert "step 0" in str(err.value)


def test_bad_arguments():
    clean, noisy, valid, init = _scene()
    with pytest.raises(ValueError):
        fit_toy(noisy, valid, init, steps=0)
    with pytest.raises(ValueError):
        fit_toy(noisy, valid, init, optimizer="lbfgs")


def test_synth_scene_fit_sgd_runs():
    sample = synth_scene("slanted", 24, 32, noise=0.0, invalid_fraction=0.1, seed=4)
    d, valid = sample.depth, sample.valid
    init = np.where(valid, d * 1.2, 0.0)
    trace = fit_toy(d, valid, init, steps=5, optimizer="sgd", lr=0.1)
    assert len(trace.steps) == 6
