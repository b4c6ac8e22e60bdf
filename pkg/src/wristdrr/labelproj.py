"""Depth-resolved projection of 3D label volumes to 2D masks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._interp import corner_aligned_positions
from .volume import N_LABELS


@dataclass(frozen=True, eq=False)
class LabelMask:
    """2D class-ID mask, ``data`` shaped (h, w), rows along the volume y axis."""

    data: np.ndarray
    aligned_to: str = ""

    def __post_init__(self):
        raw = np.asarray(self.data)
        if raw.ndim != 2:
            raise ValueError(f"mask must be 2D, got shape {raw.shape}")
        if raw.size and (raw.min() < 0 or raw.max() > N_LABELS):
            raise ValueError(f"mask values must lie in 0..{N_LABELS}")
        arr = np.array(raw, dtype=np.uint8)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def dims(self):
        h, w = self.data.shape
        return (w, h)


def project_labels(labels, from_far=False, aligned_to=""):
    """First non-background label met along each z column.

    The scan starts at z = 0 (the side nearest the detector) unless
    ``from_far`` is set, in which case it starts at z = nz - 1.
    """
    data = labels.data
    if from_far:
        data = data[:, :, ::-1]
    hit = data != 0
    first = np.argmax(hit, axis=2)
    out = np.take_along_axis(data, first[..., None], axis=2)[..., 0]
    out = np.where(hit.any(axis=2), out, 0)
    return LabelMask(out.T, aligned_to)


def nearest_indices(n_in, n_out):
    """Source index for each output pixel, on the corner-aligned resize grid."""
    pos = corner_aligned_positions(n_in, n_out)
    return np.clip(np.floor(pos + 0.5).astype(np.intp), 0, n_in - 1)


def pad_to_square(arr, value):
    h, w = arr.shape
    n = max(h, w)
    top, left = (n - h) // 2, (n - w) // 2
    out = np.full((n, n), value, dtype=arr.dtype)
    out[top:top + h, left:left + w] = arr
    return out


def resize_mask(mask, size, mode="direct"):
    """Nearest-neighbour resize to ``size = (w, h)``.

    Uses the same corner-aligned sampling grid as the radiograph resize so
    image and mask stay pixel-aligned.
    """
    w, h = (int(s) for s in size)
    if w < 1 or h < 1:
        raise ValueError(f"resize target must be >= 1 pixel, got {size}")
    data = mask.data
    if mode == "pad":
        data = pad_to_square(data, 0)
    elif mode != "direct":
        raise ValueError(f"unknown resize mode {mode!r}")
    if data.shape == (h, w):
        return LabelMask(data, mask.aligned_to)
    rows = nearest_indices(data.shape[0], h)
    cols = nearest_indices(data.shape[1], w)
    return LabelMask(data[np.ix_(rows, cols)], mask.aligned_to)
