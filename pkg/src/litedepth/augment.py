"""Joint image/depth/mask augmentation with R-squared crop.

Pipeline order: rotation, horizontal flip, random-size random-location
crop, colour jitter. Geometric transforms hit image, depth and mask with
the same parameters; colour jitter only touches the image.
"""

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np
from scipy import ndimage

DEFAULT_CROP_SIZES = ((240, 384), (384, 512), (480, 640))


@dataclass
class AugmentedSample:
    image: np.ndarray   # (H, W, 3) uint8
    depth: np.ndarray   # (H, W) float meters
    valid: np.ndarray   # (H, W) bool
    transforms: List[dict] = field(default_factory=list)

    def __post_init__(self):
        if self.image.shape[:2] != self.depth.shape or self.depth.shape != self.valid.shape:
            raise ValueError(f"image/depth/valid dims differ: {self.image.shape[:2]}, "
                             f"{self.depth.shape}, {self.valid.shape}")


@dataclass(frozen=True)
class AugmentConfig:
    rotation_deg: float = 2.5
    flip_prob: float = 0.5
    brightness: float = 0.1
    contrast: float = 0.1
    crop_sizes: Tuple[Tuple[int, int], ...] = DEFAULT_CROP_SIZES


def check_crop_sizes(sizes, height, width):
    sizes = [tuple(int(v) for v in s) for s in sizes]
    if not sizes:
        raise ValueError("crop size list is empty")
    for h, w in sizes:
        if not (1 <= h <= height and 1 <= w <= width):
            raise ValueError(f"crop size {(h, w)} does not fit a {height}x{width} frame")
    return sizes


def draw_window(sizes, height, width, rng):
    """Size uniform over ``sizes``, then top-left corner uniform over in-bounds placements."""
    sizes = check_crop_sizes(sizes, height, width)
    ch, cw = sizes[rng.integers(len(sizes))]
    top = int(rng.integers(0, height - ch + 1))
    left = int(rng.integers(0, width - cw + 1))
    return ch, cw, top, left


def r2_crop(image, depth, valid, sizes: Sequence[Tuple[int, int]] = DEFAULT_CROP_SIZES, rng=None):
    """Crop with a size drawn uniformly from ``sizes`` and a uniform in-bounds corner."""
    rng = np.random.default_rng(rng)
    ch, cw, top, left = draw_window(sizes, *depth.shape, rng)
    win = (slice(top, top + ch), slice(left, left + cw))
    return AugmentedSample(image[win].copy(), depth[win].copy(), valid[win].copy(),
                           [{"op": "crop", "size": [ch, cw], "top": top, "left": left}])


def hflip(sample):
    return AugmentedSample(sample.image[:, ::-1].copy(), sample.depth[:, ::-1].copy(),
                           sample.valid[:, ::-1].copy(), sample.transforms + [{"op": "flip"}])


def rotate(sample, angle_deg):
    """Rotate about the frame centre; pixels sourced from outside the frame become invalid.

    Depth and mask use nearest-neighbour lookup, the image bilinear.
    """
    if angle_deg == 0:
        return AugmentedSample(sample.image.copy(), sample.depth.copy(), sample.valid.copy(),
                               sample.transforms + [{"op": "rotate", "angle": 0.0}])
    h, w = sample.depth.shape
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    t = np.deg2rad(angle_deg)
    # inverse map: output pixel -> source coordinate
    sy = cy + (yy - cy) * np.cos(t) - (xx - cx) * np.sin(t)
    sx = cx + (yy - cy) * np.sin(t) + (xx - cx) * np.cos(t)

    ny, nx = np.rint(sy).astype(np.intp), np.rint(sx).astype(np.intp)
    inside = (ny >= 0) & (ny < h) & (nx >= 0) & (nx < w)
    nyc, nxc = np.clip(ny, 0, h - 1), np.clip(nx, 0, w - 1)
    valid = inside & sample.valid[nyc, nxc]
    depth = np.where(valid, sample.depth[nyc, nxc], 0.0)

    img = np.empty(sample.image.shape, dtype=np.float64)
    for ch in range(sample.image.shape[2]):
        img[..., ch] = ndimage.map_coordinates(sample.image[..., ch].astype(np.float64), [sy, sx],
                                               order=1, mode="constant", cval=0.0)
    image = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    return AugmentedSample(image, depth, valid,
                           sample.transforms + [{"op": "rotate", "angle": float(angle_deg)}])


def color_jitter(sample, brightness_factor, contrast_factor):
    if brightness_factor == 1.0 and contrast_factor == 1.0:
        image = sample.image.copy()
    else:
        img = sample.image.astype(np.float64)
        mean = img.mean()
        img = ((img - mean) * contrast_factor + mean) * brightness_factor
        image = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    return AugmentedSample(image, sample.depth.copy(), sample.valid.copy(),
                           sample.transforms + [{"op": "color", "brightness": float(brightness_factor),
                                                 "contrast": float(contrast_factor)}])


def _uniform(rng, half_width):
    return float(rng.uniform(-half_width, half_width)) if half_width > 0 else 0.0


def standard_augs(sample, config=AugmentConfig(), rng=None):
    """Rotation, flip and colour jitter (no crop)."""
    rng = np.random.default_rng(rng)
    out = rotate(sample, _uniform(rng, config.rotation_deg))
    if rng.random() < config.flip_prob:
        out = hflip(out)
    return color_jitter(out, 1.0 + _uniform(rng, config.brightness),
                        1.0 + _uniform(rng, config.contrast))


def augment(image, depth, valid, config=AugmentConfig(), rng=None):
    """Full pipeline: rotation, flip, R-squared crop, colour jitter."""
    rng = np.random.default_rng(rng)
    sample = AugmentedSample(np.asarray(image), np.asarray(depth), np.asarray(valid, dtype=bool))
    sample = rotate(sample, _uniform(rng, config.rotation_deg))
    if rng.random() < config.flip_prob:
        sample = hflip(sample)
    cropped = r2_crop(sample.image, sample.depth, sample.valid, config.crop_sizes, rng)
    sample = AugmentedSample(cropped.image, cropped.depth, cropped.valid,
                             sample.transforms + cropped.transforms)
    return color_jitter(sample, 1.0 + _uniform(rng, config.brightness),
                        1.0 + _uniform(rng, config.contrast))
