"""Dataset files: 16-bit depth PNGs, RGB PNGs, synthetic scenes and splits.

Depth PNGs hold uint16 values at 1000 units per meter (0..40000 for
0..40 m). Raw 0 is the invalid sentinel.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

DEPTH_SCALE = 1000.0
MAX_DEPTH = 40.0
MAX_RAW = 40000
DEFAULT_N_VAL = 516
SCENE_KINDS = ("plane", "slanted", "stairs", "sphere")


class DataFormatError(ValueError):
    pass


@dataclass
class SamplePair:
    rgb: np.ndarray    # (H, W, 3) uint8
    depth: np.ndarray  # (H, W) float64 meters, 0 where invalid
    valid: np.ndarray  # (H, W) bool

    def __post_init__(self):
        if self.rgb.shape[:2] != self.depth.shape or self.depth.shape != self.valid.shape:
            raise DataFormatError(f"resolution mismatch: rgb {self.rgb.shape[:2]}, "
                                  f"depth {self.depth.shape}, valid {self.valid.shape}")


def encode_depth(depth, valid=None):
    """Meters to raw uint16; invalid pixels become 0. Out-of-range values raise."""
    depth = np.asarray(depth, dtype=np.float64)
    valid = depth > 0 if valid is None else np.asarray(valid, dtype=bool)
    d = depth[valid]
    if d.size and (not np.all(np.isfinite(d)) or d.min() < 0 or d.max() > MAX_DEPTH):
        raise DataFormatError(f"valid depths must lie in [0, {MAX_DEPTH}] m")
    raw = np.zeros(depth.shape, dtype=np.uint16)
    raw[valid] = np.rint(d * DEPTH_SCALE).astype(np.uint16)
    if np.any(raw[valid] == 0):
        raise DataFormatError("a valid depth rounds to the invalid sentinel (< 0.5 mm)")
    return raw


def decode_depth(raw):
    raw = np.asarray(raw)
    if raw.dtype != np.uint16:
        raise DataFormatError(f"raw depth must be uint16, got {raw.dtype}")
    return raw.astype(np.float64) / DEPTH_SCALE, raw != 0


def read_depth_raw(path):
    with Image.open(path) as im:
        if im.mode not in ("I;16", "I;16B", "I;16L"):
            raise DataFormatError(f"{path}: depth PNG must be 16-bit single-channel, got mode {im.mode}")
        return np.asarray(im, dtype=np.uint16).copy()


def write_depth_raw(path, raw):
    raw = np.asarray(raw)
    if raw.dtype != np.uint16 or raw.ndim != 2:
        raise DataFormatError("raw depth must be a 2-D uint16 array")
    Image.fromarray(raw).save(path, format="PNG")


def save_depth(path, depth, valid=None):
    write_depth_raw(path, encode_depth(depth, valid))


def read_rgb(path):
    with Image.open(path) as im:
        if im.mode not in ("RGB", "RGBA"):
            raise DataFormatError(f"{path}: expected an 8-bit RGB PNG, got mode {im.mode}")
        return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()


def write_rgb(path, rgb):
    rgb = np.asarray(rgb)
    if rgb.dtype != np.uint8 or rgb.ndim != 3 or rgb.shape[2] != 3:
        raise DataFormatError("rgb must be an (H, W, 3) uint8 array")
    Image.fromarray(rgb, mode="RGB").save(path, format="PNG")


def load_pair(rgb_path, depth_path):
    rgb = read_rgb(rgb_path)
    depth, valid = decode_depth(read_depth_raw(depth_path))
    if rgb.shape[:2] != depth.shape:
        raise DataFormatError(f"resolution mismatch: {rgb_path} is {rgb.shape[:2]}, "
                              f"{depth_path} is {depth.shape}")
    return SamplePair(rgb, depth, valid)


def image_to_tensor(rgb):
    """(H, W, 3) uint8 to a (1, 3, H, W) float32 tensor in raw 0..255 units."""
    return np.ascontiguousarray(np.asarray(rgb, dtype=np.float32).transpose(2, 0, 1)[None])


def list_pairs(root):
    """Ids ``<id>`` with both ``rgb/<id>.png`` and ``depth/<id>.png`` under ``root``, sorted."""
    root = Path(root)
    rgb_ids = {p.stem for p in (root / "rgb").glob("*.png")}
    depth_ids = {p.stem for p in (root / "depth").glob("*.png")}
    return sorted(rgb_ids & depth_ids)


def split(items, n_val=DEFAULT_N_VAL, seed=0):
    """Deterministic shuffled split into (train, val), preserving item identity."""
    items = list(items)
    if not 0 <= n_val < len(items):
        raise ValueError(f"n_val must be in [0, {len(items)}), got {n_val}")
    order = np.random.default_rng(seed).permutation(len(items))
    val = [items[i] for i in sorted(order[:n_val])]
    train = [items[i] for i in sorted(order[n_val:])]
    return train, val


def write_split_manifest(path, train, val):
    with open(path, "w", encoding="utf-8") as f:
        for name, ids in (("train", train), ("val", val)):
            for item in ids:
                f.write(f"{name} {item}\n")


def read_split_manifest(path):
    train, val = [], []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            tag, _, item = line.partition(" ")
            if tag not in ("train", "val") or not item:
                raise DataFormatError(f"{path}:{lineno}: expected 'train <id>' or 'val <id>'")
            (train if tag == "train" else val).append(item)
    return train, val


def _rays(height, width, focal):
    v, u = np.mgrid[0:height, 0:width].astype(np.float64)
    return (u - width / 2.0) / focal, (v - height / 2.0) / focal


def scene_depth(kind, height, width, depth=5.0, focal=500.0, tilt=(0.3, 0.5), steps=4,
                step_height=1.0):
    """Closed-form depth maps for the synthetic scene kinds."""
    rx, ry = _rays(height, width, focal)
    if kind == "plane":
        return np.full((height, width), float(depth))
    if kind == "slanted":
        # plane z + a*x + b*y = depth, with x = rx*z and y = ry*z
        a, b = tilt
        return depth / (1.0 + a * rx + b * ry)
    if kind == "stairs":
        v = np.arange(height)[:, None] * np.ones((1, width))
        return depth + step_height * np.floor(v * steps / height)
    if kind == "sphere":
        # sphere of radius 0.3*depth centred on the optical axis, backdrop at 2*depth
        r = 0.3 * depth
        dirs = np.stack([rx, ry, np.ones_like(rx)], axis=-1)
        dd = np.sum(dirs * dirs, axis=-1)
        bq = -2.0 * depth * dirs[..., 2]
        disc = bq * bq - 4.0 * dd * (depth * depth - r * r)
        t = np.where(disc >= 0, (-bq - np.sqrt(np.maximum(disc, 0.0))) / (2.0 * dd), np.inf)
        return np.minimum(t, 2.0 * depth)
    raise ValueError(f"unknown scene kind {kind!r}; expected one of {SCENE_KINDS}")


def synth_scene(kind="slanted", height=48, width=64, noise=0.0, invalid_fraction=0.0, seed=0,
                depth=5.0, focal=500.0):
    """Analytic depth scene with a procedural texture and random invalid holes.

    ``noise`` is the standard deviation (meters) of additive Gaussian depth
    noise; values are clipped into (0, 40] m.
    """
    if not 0.0 <= invalid_fraction < 1.0:
        raise ValueError(f"invalid_fraction must be in [0, 1), got {invalid_fraction}")
    rng = np.random.default_rng(seed)
    d = scene_depth(kind, height, width, depth, focal)
    if noise > 0:
        d = d + rng.normal(0.0, noise, size=d.shape)
    d = np.clip(d, 1e-3, MAX_DEPTH)
    valid = rng.random(d.shape) >= invalid_fraction
    d = np.where(valid, d, 0.0)

    v, u = np.mgrid[0:height, 0:width]
    checker = ((u // 8 + v // 8) % 2).astype(np.float64)
    shade = 1.0 / np.maximum(scene_depth(kind, height, width, depth, focal), 1e-3)
    base = 60.0 + 120.0 * shade / shade.max()
    rgb = np.stack([base + 50.0 * checker, base * 0.8 + 30.0 * (1.0 - checker), 0.6 * base + 40.0 * u / width],
                   axis=-1)
    rgb = rgb + rng.normal(0.0, 4.0, size=rgb.shape)
    return SamplePair(np.clip(np.rint(rgb), 0, 255).astype(np.uint8), d, valid)
