"""Orthographic Beer-Lambert projection and 2D radiograph post-processing."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ._interp import corner_aligned_positions, interp_axis
from .exceptions import ConfigError, DegenerateVolume, DimensionMismatch
from .labelproj import pad_to_square, project_labels, resize_mask
from .volume import (
    clamp_air,
    clamp_artifacts,
    nearest_rank_percentile,
    rotate_volume,
)

STAGES = ("raw_projection", "tissue_reduced", "normalized", "resized")
DEFAULT_VIEW_ANGLES = tuple(range(-70, 71, 10))


@dataclass(frozen=True)
class ProjectionConfig:
    """Knobs for the CT-to-radiograph pipeline.

    ``attenuation_scale=None`` selects the adaptive scale
    ``adaptive_constant / max(ray sum)`` per image.
    """

    attenuation_scale: float | None = None
    adaptive_constant: float = 4.0
    tissue_low_percentile: float = 20
    tissue_target_percentile: float = 10
    artifact_percentile: float = 99
    output_size: tuple = (256, 256)
    view_angles: tuple = DEFAULT_VIEW_ANGLES
    rotation_axis: str = "y"
    invert_for_tissue_reduction: bool = False
    resize_mode: str = "direct"
    scan_from_far: bool = False

    def __post_init__(self):
        object.__setattr__(self, "output_size", tuple(int(s) for s in self.output_size))
        object.__setattr__(self, "view_angles", tuple(float(a) for a in self.view_angles))
        for name in ("tissue_low_percentile", "tissue_target_percentile", "artifact_percentile"):
            q = getattr(self, name)
            if not 0 < q < 100:
                raise ConfigError(f"{name} must lie in (0, 100), got {q}")
        if not self.tissue_target_percentile < self.tissue_low_percentile:
            raise ConfigError("tissue_target_percentile must be below tissue_low_percentile")
        if len(self.output_size) != 2 or min(self.output_size) < 8:
            raise ConfigError(f"output_size components must be >= 8, got {self.output_size}")
        if not self.view_angles:
            raise ConfigError("view_angles must not be empty")
        if self.attenuation_scale is not None and not self.attenuation_scale >= 0:
            raise ConfigError("attenuation_scale must be non-negative")
        if not self.adaptive_constant > 0:
            raise ConfigError("adaptive_constant must be positive")
        if self.rotation_axis not in ("x", "y", "z"):
            raise ConfigError(f"rotation_axis must be x, y or z, got {self.rotation_axis!r}")
        if self.resize_mode not in ("direct", "pad"):
            raise ConfigError(f"resize_mode must be 'direct' or 'pad', got {self.resize_mode!r}")

    @classmethod
    def from_dict(cls, d):
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown projection option(s): {sorted(unknown)}")
        return cls(**d)

    def to_dict(self):
        out = asdict(self)
        out["output_size"] = list(self.output_size)
        out["view_angles"] = list(self.view_angles)
        return out

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class Radiograph:
    """2D image shaped (h, w); rows follow the volume y axis, columns x."""

    data: np.ndarray
    pixel_spacing: tuple = (1.0, 1.0)
    stage: str = "raw_projection"
    alpha: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"radiograph must be 2D, got shape {arr.shape}")
        if self.stage not in STAGES:
            raise ValueError(f"unknown stage {self.stage!r}")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "pixel_spacing", tuple(float(s) for s in self.pixel_spacing))

    @property
    def dims(self):
        h, w = self.data.shape
        return (w, h)

    def evolve(self, data, stage, **kw):
        return replace(self, data=data, stage=stage, **kw)


def ray_sums(vol):
    """Path-length-weighted sum of CT values along z, shaped (ny, nx)."""
    return (vol.spacing[2] * vol.data.sum(axis=2)).T


def project(vol, config=None):
    """Beer-Lambert line integral ``exp(-alpha * sz * sum_z vol)`` per pixel."""
    config = config or ProjectionConfig()
    if min(vol.dims) < 1:
        raise DegenerateVolume(f"cannot project a volume with dims {vol.dims}")
    if vol.data.size and vol.data.min() < 0:
        raise ValueError("project expects non-negative CT values; apply clamp_air first")
    S = ray_sums(vol)
    if config.attenuation_scale is not None:
        alpha = float(config.attenuation_scale)
    else:
        peak = float(S.max())
        alpha = config.adaptive_constant / peak if peak > 0 else 0.0
    return Radiograph(
        np.exp(-alpha * S),
        pixel_spacing=(vol.spacing[1], vol.spacing[0]),
        stage="raw_projection",
        alpha=alpha,
    )


def tissue_reduction(img, config=None):
    """Raise every pixel below the low percentile to the target percentile.

    Percentiles are nearest-rank over the whole image.  With
    ``invert_for_tissue_reduction`` the rule is evaluated on ``1 - I``.
    """
    config = config or ProjectionConfig()
    I = img.data
    if config.invert_for_tissue_reduction:
        J = 1.0 - I
        low = nearest_rank_percentile(J, config.tissue_low_percentile)
        target = nearest_rank_percentile(J, config.tissue_target_percentile)
        out = np.where(J < low, 1.0 - target, I)
    else:
        low = nearest_rank_percentile(I, config.tissue_low_percentile)
        target = nearest_rank_percentile(I, config.tissue_target_percentile)
        out = np.where(I < low, target, I)
    return img.evolve(out, "tissue_reduced")


def normalize_minmax(img):
    """Min-max rescale to [0, 1]; a constant image maps to all zeros."""
    I = img.data
    lo, hi = float(I.min()), float(I.max())
    if hi == lo:
        out = np.zeros_like(I)
    else:
        out = (I - lo) / (hi - lo)
    return img.evolve(out, "normalized")


def _linear_resize_axis(arr, axis, n_out):
    n_in = arr.shape[axis]
    if n_in == n_out:
        return arr
    return interp_axis(arr, axis, corner_aligned_positions(n_in, n_out))


def resize(img, size=(256, 256), mode="direct"):
    """Bilinear resize to ``size = (w, h)`` on a corner-aligned grid.

    ``mode="pad"`` first pads to a square with the image maximum (air in the
    attenuation polarity) so the aspect ratio survives.
    """
    w, h = (int(s) for s in size)
    if w < 1 or h < 1:
        raise ValueError(f"resize target must be >= 1 pixel, got {size}")
    data = img.data
    if mode == "pad":
        data = pad_to_square(data, data.max())
    elif mode != "direct":
        raise ValueError(f"unknown resize mode {mode!r}")
    in_h, in_w = data.shape
    out = _linear_resize_axis(_linear_resize_axis(data, 0, h), 1, w)
    sy, sx = img.pixel_spacing
    if mode == "pad":
        sy = sx = max(sy * img.data.shape[0], sx * img.data.shape[1]) / max(in_h, in_w)
    spacing = (sy * in_h / h, sx * in_w / w)
    return img.evolve(out, "resized", pixel_spacing=spacing)


def image_view(ct, angle, config=None):
    """CT half of the pipeline: artifact clamp, air clamp, rotation, projection,
    tissue reduction, min-max normalization, resize."""
    config = config or ProjectionConfig()
    vol = clamp_air(clamp_artifacts(ct, config.artifact_percentile))
    vol = rotate_volume(vol, angle, config.rotation_axis)
    img = project(vol, config)
    img = tissue_reduction(img, config)
    img = normalize_minmax(img)
    img = resize(img, config.output_size, config.resize_mode)
    return replace(img, meta={"angle": float(angle)})


def label_view(labels, angle, config=None):
    """Label half: nearest-neighbour rotation, depth-resolved projection, resize."""
    config = config or ProjectionConfig()
    lab = rotate_volume(labels, angle, config.rotation_axis)
    mask = project_labels(lab, from_far=config.scan_from_far, aligned_to=f"angle={float(angle):g}")
    return resize_mask(mask, config.output_size, config.resize_mode)


def simulate_view(ct, labels, angle, config=None):
    """Full pipeline for one view: returns a pixel-aligned (Radiograph, LabelMask)."""
    if ct.dims != labels.dims or ct.spacing != labels.spacing:
        raise DimensionMismatch(
            f"CT {ct.dims}/{ct.spacing} and labels {labels.dims}/{labels.spacing} are not co-registered"
        )
    return image_view(ct, angle, config), label_view(labels, angle, config)


def simulate_views(ct, labels, config=None):
    """One (Radiograph, LabelMask) pair per configured view angle."""
    config = config or ProjectionConfig()
    return [simulate_view(ct, labels, a, config) for a in config.view_angles]

