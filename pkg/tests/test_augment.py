import numpy as np
import pytest

from litedepth.augment import (DEFAULT_CROP_SIZES, AugmentConfig, AugmentedSample, augment, color_jitter,
                               hflip, r2_crop, rotate, standard_augs)
from litedepth.data_io import synth_scene
from oracles import crop_statistics


@pytest.fixture(scope="module")
def frame():
    s = synth_scene("slanted", 480, 640, invalid_fraction=0.05, seed=2)
    return AugmentedSample(s.rgb, s.depth, s.valid)


def test_full_frame_crop_is_identity(frame):
    out = r2_crop(frame.image, frame.depth, frame.valid, [(480, 640)], rng=0)
    assert out.transforms == [{"op": "crop", "size": [480, 640], "top": 0, "left": 0}]
    np.testing.assert_array_equal(out.image, frame.image)
    np.testing.assert_array_equal(out.depth, frame.depth)


def test_crop_window_is_joint(frame):
    out = r2_crop(frame.image, frame.depth, frame.valid, [(240, 384)], rng=5)
    t = out.transforms[0]
    win = (slice(t["top"], t["top"] + 240), slice(t["left"], t["left"] + 384))
    np.testing.assert_array_equal(out.image, frame.image[win])
    np.testing.assert_array_equal(out.depth, frame.depth[win])
    np.testing.assert_array_equal(out.valid, frame.valid[win])


def test_crop_statistics():
    p_sizes, p_corners, oob = crop_statistics(DEFAULT_CROP_SIZES, 480, 640, 10_000, seed=0)
    assert oob == 0
    assert p_sizes > 0.01
    assert set(p_corners) == {(240, 384), (384, 512)}
    assert all(p > 0.01 for p in p_corners.values())


def test_bad_crop_sizes(frame):
    with pytest.raises(ValueError, match="does not fit"):
        r2_crop(frame.image, frame.depth, frame.valid, [(600, 640)])
    with pytest.raises(ValueError, match="empty"):
        r2_crop(frame.image, frame.depth, frame.valid, [])


def test_flip_twice_restores(frame):
    twice = hflip(hflip(frame))
    np.testing.assert_array_equal(twice.image, frame.image)
    np.testing.assert_array_equal(twice.depth, frame.depth)
    np.testing.assert_array_equal(twice.valid, frame.valid)
    once = hflip(frame)
    np.testing.assert_array_equal(once.depth[:, 0], frame.depth[:, -1])


def test_zero_config_is_identity(frame):
    cfg = AugmentConfig(rotation_deg=0, flip_prob=0, brightness=0, contrast=0)
    out = standard_augs(frame, cfg, rng=1)
    np.testing.assert_array_equal(out.image, frame.image)
    np.testing.assert_array_equal(out.depth, frame.depth)
    np.testing.assert_array_equal(out.valid, frame.valid)


def test_rotation_invalidates_corners():
    s = synth_scene("slanted", 120, 160, seed=0)
    sample = AugmentedSample(s.rgb, s.depth, s.valid)
    assert sample.valid.all()
    out = rotate(sample, 10.0)
    for corner in ((0, 0), (0, -1), (-1, 0), (-1, -1)):
        assert not out.valid[corner]
    assert out.valid.sum() < sample.valid.sum()
    assert not out.depth[~out.valid].any()


def test_rotation_never_fabricates_depth(frame):
    lo, hi = frame.depth[frame.valid].min(), frame.depth[frame.valid].max()
    src = set(np.unique(frame.depth[frame.valid]))
    out = rotate(frame, -2.3)
    d = out.depth[out.valid]
    assert d.min() >= lo and d.max() <= hi
    assert set(np.unique(d)) <= src


def test_pipeline_depth_bounds_and_reproducible(frame):
    lo, hi = frame.depth[frame.valid].min(), frame.depth[frame.valid].max()
    for seed in range(5):
        a = augment(frame.image, frame.depth, frame.valid, rng=seed)
        b = augment(frame.image, frame.depth, frame.valid, rng=seed)
        assert a.image.tobytes() == b.image.tobytes()
        assert a.depth.tobytes() == b.depth.tobytes()
        assert a.transforms == b.transforms
        assert [t["op"] for t in a.transforms][0] == "rotate"
        assert a.transforms[-1]["op"] == "color"
        d = a.depth[a.valid]
        assert d.min() >= lo and d.max() <= hi
        assert tuple(a.depth.shape) in DEFAULT_CROP_SIZES


def test_color_jitter_only_touches_image(frame):
    out = color_jitter(frame, 1.1, 0.9)
    assert not np.array_equal(out.image, frame.image)
    np.testing.assert_array_equal(out.depth, frame.depth)
    np.testing.assert_array_equal(out.valid, frame.valid)
