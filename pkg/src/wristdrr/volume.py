"""CT and label volumes plus the 3D operations applied before projection.

Arrays are indexed ``[x, y, z]`` with x radial-ulnar, y proximal-distal (the
forearm long axis) and z dorsal-volar.  Voxel ``i`` along an axis with spacing
``s`` occupies the physical interval ``[i*s, (i+1)*s)``, so its center sits at
``(i + 0.5) * s`` measured from the volume's origin corner.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ._interp import bilinear, interp_axis
from .exceptions import DegenerateVolume

N_LABELS = 10
BONE_NAMES = {
    1: "Ulna",
    2: "Radius",
    3: "Triquetrum",
    4: "Lunate",
    5: "Scaphoid",
    6: "Pisiform",
    7: "Hamate",
    8: "Capitate",
    9: "Trapezoid",
    10: "Trapezium",
}
AXES = {"x": 0, "y": 1, "z": 2}

# in-plane axes (u, v) for a rotation about each axis, right-handed
_PLANES = {0: (1, 2), 1: (2, 0), 2: (0, 1)}
_EDGE_EPS = 1e-9


def _check_grid(data, spacing):
    if data.ndim != 3:
        raise ValueError(f"volume data must be 3D, got shape {data.shape}")
    if min(data.shape) < 1:
        raise DegenerateVolume(f"volume dims must be >= 1, got {data.shape}")
    spacing = tuple(float(s) for s in spacing)
    if len(spacing) != 3 or not all(s > 0 and math.isfinite(s) for s in spacing):
        raise ValueError(f"spacing must be three positive numbers, got {spacing}")
    return spacing


@dataclass(frozen=True, eq=False)
class CtVolume:
    """3D intensity grid (CT numbers, linear scale) with voxel spacing in mm."""

    data: np.ndarray
    spacing: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64, order="C")
        object.__setattr__(self, "spacing", _check_grid(arr, self.spacing))
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def dims(self):
        return self.data.shape

    def with_data(self, data, spacing=None):
        return CtVolume(data, self.spacing if spacing is None else spacing)


@dataclass(frozen=True, eq=False)
class LabelVolume:
    """3D grid of bone class IDs (0 background, 1..10 bones)."""

    data: np.ndarray
    spacing: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        raw = np.asarray(self.data)
        if raw.size and (raw.min() < 0 or raw.max() > N_LABELS):
            raise ValueError(f"label values must lie in 0..{N_LABELS}")
        if raw.size and np.issubdtype(raw.dtype, np.floating) and not np.all(raw == np.round(raw)):
            raise ValueError("label values must be integers")
        arr = np.array(raw, dtype=np.uint8, order="C")
        object.__setattr__(self, "spacing", _check_grid(arr, self.spacing))
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def dims(self):
        return self.data.shape

    def with_data(self, data, spacing=None):
        return LabelVolume(data, self.spacing if spacing is None else spacing)


def nearest_rank_rank(q, n):
    """1-indexed nearest-rank position ``ceil(q/100 * n)`` clipped to ``[1, n]``."""
    k = math.ceil(Fraction(q).limit_denominator(10**9) * n / 100)
    return min(max(k, 1), n)


def nearest_rank_percentile(values, q):
    """Nearest-rank percentile: the ``ceil(q/100*n)``-th smallest value."""
    flat = np.asarray(values).ravel()
    if flat.size == 0:
        raise ValueError("percentile of an empty array")
    k = nearest_rank_rank(q, flat.size)
    return np.partition(flat, k - 1)[k - 1]


# ---------------------------------------------------------------- resampling


def _output_grid(dims, spacing, target):
    if not (target > 0 and math.isfinite(target)):
        raise ValueError(f"target spacing must be positive, got {target}")
    out_dims = []
    for n, s in zip(dims, spacing):
        out_dims.append(max(1, math.ceil(n * s / target - _EDGE_EPS)))
    return out_dims


def _source_positions(n_out, s, target):
    # output voxel center (j + 0.5) * target, expressed as a fractional input index
    return (np.arange(n_out) + 0.5) * target / s - 0.5


def resample_isotropic(vol, target=0.5):
    """Trilinear resample of ``vol`` onto an isotropic grid of ``target`` mm."""
    if min(vol.dims) < 2:
        raise DegenerateVolume(f"resampling needs >= 2 voxels per axis, got {vol.dims}")
    out_dims = _output_grid(vol.dims, vol.spacing, target)
    arr = vol.data
    # trilinear interpolation is separable into three 1D passes
    for axis in range(3):
        pos = _source_positions(out_dims[axis], vol.spacing[axis], target)
        arr = interp_axis(arr, axis, pos)
    return CtVolume(arr, (target, target, target))


def resample_labels(vol, target=0.5):
    """Nearest-neighbour resample of a label volume; never invents labels."""
    if min(vol.dims) < 2:
        raise DegenerateVolume(f"resampling needs >= 2 voxels per axis, got {vol.dims}")
    out_dims = _output_grid(vol.dims, vol.spacing, target)
    idx = []
    for axis in range(3):
        s = vol.spacing[axis]
        centers = (np.arange(out_dims[axis]) + 0.5) * target
        i = np.floor(centers / s + _EDGE_EPS).astype(np.intp)
        idx.append(np.clip(i, 0, vol.dims[axis] - 1))
    return LabelVolume(vol.data[np.ix_(*idx)], (target, target, target))


# ------------------------------------------------------------------ rotation


def _right_angle_turns(angle):
    turns = angle / 90.0
    if turns != math.floor(turns):
        return None
    return int(turns) % 4


def _quarter_turn(arr, u, v):
    # out[ju, jv] = in[jv, nv - 1 - ju] in the (u, v) plane, i.e. a +90 deg turn
    arr = np.swapaxes(arr, u, v)
    return np.flip(arr, axis=u)


def _sample_plane(plane, su, sv, cos_a, sin_a, nearest):
    """Rotate a stack of 2D (u, v) planes shaped ``(nu, nv, k)``."""
    nu, nv = plane.shape[:2]
    cu, cv = (nu - 1) / 2.0, (nv - 1) / 2.0
    uo = (np.arange(nu) - cu) * su
    vo = (np.arange(nv) - cv) * sv
    U, V = np.meshgrid(uo, vo, indexing="ij")
    # inverse rotation takes output coordinates back to the source
    us = (U * cos_a + V * sin_a) / su + cu
    vs = (-U * sin_a + V * cos_a) / sv + cv
    if nearest:
        iu = np.floor(us + 0.5).astype(np.intp)
        iv = np.floor(vs + 0.5).astype(np.intp)
        inside = (iu >= 0) & (iu < nu) & (iv >= 0) & (iv < nv)
        out = plane[np.clip(iu, 0, nu - 1), np.clip(iv, 0, nv - 1)]
        out[~inside] = 0
        return out
    inside = (
        (us >= -_EDGE_EPS) & (us <= nu - 1 + _EDGE_EPS)
        & (vs >= -_EDGE_EPS) & (vs <= nv - 1 + _EDGE_EPS)
    )
    out = bilinear(plane, us, vs)
    out[~inside] = 0.0
    return out


def _rotate_interp(data, spacing, angle, axis, nearest):
    u, v = _PLANES[axis]
    theta = math.radians(angle)
    moved = np.moveaxis(data, (u, v, axis), (0, 1, 2))
    out = _sample_plane(moved, spacing[u], spacing[v], math.cos(theta), math.sin(theta), nearest)
    return np.moveaxis(out, (0, 1, 2), (u, v, axis))


def rotate_volume(vol, angle, axis="y"):
    """Rotate ``vol`` by ``angle`` degrees about its center (right-hand rule).

    Multiples of 90 degrees are exact index permutations (the rotation plane
    dims and spacing swap for odd quarter turns).  Other angles resample on the
    input grid, trilinearly for CT and nearest-neighbour for labels, with 0
    filled where the source falls outside the volume.
    """
    if not math.isfinite(angle):
        raise ValueError(f"angle must be finite, got {angle}")
    ax = AXES[axis] if isinstance(axis, str) else int(axis)
    nearest = isinstance(vol, LabelVolume)
    turns = _right_angle_turns(angle)
    if turns is not None:
        u, v = _PLANES[ax]
        arr = vol.data
        spacing = list(vol.spacing)
        for _ in range(turns):
            arr = _quarter_turn(arr, u, v)
            spacing[u], spacing[v] = spacing[v], spacing[u]
        return vol.with_data(np.ascontiguousarray(arr), tuple(spacing))
    out = _rotate_interp(vol.data, vol.spacing, angle, ax, nearest)
    return vol.with_data(out)


# ---------------------------------------------------------- intensity clamps


def clamp_air(vol):
    """Set negative (air) CT numbers to 0."""
    return vol.with_data(np.maximum(vol.data, 0.0))


def clamp_artifacts(vol, percentile=99):
    """Cap every voxel at the volume's nearest-rank ``percentile`` value."""
    cap = nearest_rank_percentile(vol.data, percentile)
    return vol.with_data(np.minimum(vol.data, cap))
