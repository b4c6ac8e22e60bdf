"""Randomized 2D affine augmentation of (radiograph, mask) pairs."""
from __future__ import annotations

import math
import zlib
from dataclasses import asdict, dataclass

import numpy as np

from ._interp import bilinear
from .exceptions import ConfigError, DimensionMismatch
from .labelproj import LabelMask


@dataclass(frozen=True)
class AugmentParams:
    """One draw of augmentation settings.

    ``translation`` is a fraction of (width, height); ``zoom`` is a scale
    factor (>1 enlarges the content).
    """

    rotation: float = 0.0
    translation: tuple = (0.0, 0.0)
    zoom: float = 1.0
    hflip: bool = False

    def __post_init__(self):
        object.__setattr__(self, "rotation", float(self.rotation))
        object.__setattr__(self, "translation", tuple(float(t) for t in self.translation))
        object.__setattr__(self, "zoom", float(self.zoom))
        object.__setattr__(self, "hflip", bool(self.hflip))
        if len(self.translation) != 2:
            raise ValueError("translation needs (tx, ty)")
        if not self.zoom > 0:
            raise ValueError(f"zoom must be positive, got {self.zoom}")

    def to_dict(self):
        d = asdict(self)
        d["translation"] = list(self.translation)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    @property
    def is_identity(self):
        return self == AugmentParams()


@dataclass(frozen=True)
class AugmentConfig:
    copies_per_image: int = 7
    rotation_range: tuple = (-40.0, 40.0)
    translation_range: tuple = (-0.2, 0.2)
    zoom_range: tuple = (0.8, 1.2)
    hflip_probability: float = 0.5

    def __post_init__(self):
        if int(self.copies_per_image) < 1:
            raise ConfigError(f"copies_per_image must be >= 1, got {self.copies_per_image}")
        object.__setattr__(self, "copies_per_image", int(self.copies_per_image))
        for name in ("rotation_range", "translation_range", "zoom_range"):
            lo, hi = (float(v) for v in getattr(self, name))
            if lo > hi:
                raise ConfigError(f"{name} must be (low, high) with low <= high")
            object.__setattr__(self, name, (lo, hi))
        if self.zoom_range[0] <= 0:
            raise ConfigError("zoom_range must be positive")
        if not 0 <= self.hflip_probability <= 1:
            raise ConfigError("hflip_probability must lie in [0, 1]")

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown augment option(s): {sorted(unknown)}")
        return cls(**d)

    def to_dict(self):
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}


def derive_seed(root_seed, item_id, view_index, copy_index):
    """Stable per-item seed from the root seed and the item's coordinates.

    Independent of process, platform and generation order.
    """
    key = zlib.crc32(str(item_id).encode("utf-8"))
    ss = np.random.SeedSequence(int(root_seed), spawn_key=(key, int(view_index), int(copy_index)))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def sample_params(seed, config=None):
    """Draw rotation, translation, zoom and flip uniformly and independently."""
    config = config or AugmentConfig()
    rng = np.random.default_rng(seed)
    rotation = rng.uniform(*config.rotation_range)
    tx = rng.uniform(*config.translation_range)
    ty = rng.uniform(*config.translation_range)
    zoom = rng.uniform(*config.zoom_range)
    hflip = bool(rng.random() < config.hflip_probability)
    return AugmentParams(rotation, (tx, ty), zoom, hflip)


def forward_matrix(params, shape):
    """3x3 homogeneous map from input to output pixel coordinates (x, y).

    Composition: horizontal flip, zoom about the center, rotation about the
    center (counter-clockwise as displayed), translation.
    """
    h, w = shape
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    to_center = np.array([[1, 0, -cx], [0, 1, -cy], [0, 0, 1]], dtype=float)
    from_center = np.array([[1, 0, cx], [0, 1, cy], [0, 0, 1]], dtype=float)
    flip = np.diag([-1.0 if params.hflip else 1.0, 1.0, 1.0])
    zoom = np.diag([params.zoom, params.zoom, 1.0])
    t = math.radians(params.rotation)
    c, s = math.cos(t), math.sin(t)
    # image rows grow downward, so this is counter-clockwise on screen
    rot = np.array([[c, s, 0], [-s, c, 0], [0, 0, 1]])
    tx, ty = params.translation
    shift = np.array([[1, 0, tx * w], [0, 1, ty * h], [0, 0, 1]])
    return shift @ from_center @ rot @ zoom @ flip @ to_center


def _source_coords(params, shape):
    h, w = shape
    ys, xs = np.meshgrid(np.arange(h, dtype=float), np.arange(w, dtype=float), indexing="ij")
    # exact paths so identity and pure flips reproduce their input bitwise
    if params.is_identity:
        return xs, ys
    if params == AugmentParams(hflip=True):
        return (w - 1) - xs, ys
    inv = np.linalg.inv(forward_matrix(params, shape))
    sx = inv[0, 0] * xs + inv[0, 1] * ys + inv[0, 2]
    sy = inv[1, 0] * xs + inv[1, 1] * ys + inv[1, 2]
    return sx, sy


def warp_image(data, params, eps=1e-9):
    h, w = data.shape
    sx, sy = _source_coords(params, data.shape)
    inside = (sx >= -eps) & (sx <= w - 1 + eps) & (sy >= -eps) & (sy <= h - 1 + eps)
    out = bilinear(np.asarray(data, dtype=float), sy, sx)
    out[~inside] = 0.0
    return out


def warp_mask(data, params):
    h, w = data.shape
    sx, sy = _source_coords(params, data.shape)
    ix = np.floor(sx + 0.5).astype(np.intp)
    iy = np.floor(sy + 0.5).astype(np.intp)
    inside = (ix >= 0) & (ix < w) & (iy >= 0) & (iy < h)
    out = np.asarray(data)[np.clip(iy, 0, h - 1), np.clip(ix, 0, w - 1)]
    out[~inside] = 0
    return out


def apply_augmentation(img, mask, params):
    """Apply one affine draw to a pixel-aligned (Radiograph, LabelMask) pair.

    The image is resampled bilinearly and the mask nearest-neighbour, both
    with 0 outside the source frame.
    """
    if img.data.shape != mask.data.shape:
        raise DimensionMismatch(f"image {img.data.shape} and mask {mask.data.shape} differ")
    out_img = img.evolve(warp_image(img.data, params), img.stage, meta={**img.meta, "augment": params.to_dict()})
    out_mask = LabelMask(warp_mask(mask.data, params), mask.aligned_to)
    return out_img, out_mask
