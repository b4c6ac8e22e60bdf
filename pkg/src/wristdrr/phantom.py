"""Deterministic analytic phantoms standing in for clinical wrist CT."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .exceptions import SpecOutOfBounds
from .volume import AXES, N_LABELS, CtVolume, LabelVolume

SHAPES = ("box", "sphere", "cylinder")


@dataclass
class Primitive:
    """One solid. ``size_mm`` is (lx, ly, lz) for a box, the radius for a
    sphere, and (radius, length) for a cylinder whose axis is ``axis``."""

    shape: str
    center_mm: tuple
    size_mm: object
    intensity: float
    label: int = 0
    axis: str = "y"

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown primitive shape {self.shape!r}")
        if not 0 <= int(self.label) <= N_LABELS:
            raise ValueError(f"primitive label must be in 0..{N_LABELS}, got {self.label}")
        self.center_mm = tuple(float(c) for c in self.center_mm)
        size = np.atleast_1d(np.asarray(self.size_mm, dtype=float))
        expected = {"box": 3, "sphere": 1, "cylinder": 2}[self.shape]
        if size.size != expected or np.any(size <= 0):
            raise ValueError(f"{self.shape} needs {expected} positive size value(s), got {self.size_mm}")
        self.size_mm = tuple(size.tolist())

    def bounds(self):
        c = np.asarray(self.center_mm)
        if self.shape == "box":
            half = np.asarray(self.size_mm) / 2
        elif self.shape == "sphere":
            half = np.full(3, self.size_mm[0])
        else:
            r, length = self.size_mm
            half = np.full(3, r)
            half[AXES[self.axis]] = length / 2
        return c - half, c + half

    def contains(self, X, Y, Z):
        cx, cy, cz = self.center_mm
        dx, dy, dz = X - cx, Y - cy, Z - cz
        if self.shape == "box":
            lx, ly, lz = self.size_mm
            # half-open so abutting boxes never share a voxel
            return (
                (dx >= -lx / 2) & (dx < lx / 2)
                & (dy >= -ly / 2) & (dy < ly / 2)
                & (dz >= -lz / 2) & (dz < lz / 2)
            )
        if self.shape == "sphere":
            return dx * dx + dy * dy + dz * dz <= self.size_mm[0] ** 2
        r, length = self.size_mm
        d = [dx, dy, dz]
        along = d.pop(AXES[self.axis])
        return (d[0] ** 2 + d[1] ** 2 <= r * r) & (np.abs(along) <= length / 2)


@dataclass
class PhantomSpec:
    dims: tuple
    spacing: tuple = (1.0, 1.0, 1.0)
    primitives: list = field(default_factory=list)
    background: float = 0.0
    noise_std: float = 0.0

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        self.spacing = tuple(float(s) for s in self.spacing)
        if len(self.dims) != 3 or min(self.dims) < 1:
            raise ValueError(f"phantom dims must be three integers >= 1, got {self.dims}")
        self.primitives = [p if isinstance(p, Primitive) else Primitive(**p) for p in self.primitives]

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "spacing_mm" in d:
            d["spacing"] = d.pop("spacing_mm")
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        out = asdict(self)
        out["spacing_mm"] = out.pop("spacing")
        return out


def voxel_centers(dims, spacing):
    axes = [(np.arange(n) + 0.5) * s for n, s in zip(dims, spacing)]
    return np.meshgrid(*axes, indexing="ij")


def make_phantom(spec, seed=0):
    """Voxelize ``spec`` into a (CtVolume, LabelVolume) pair.

    Later primitives overwrite earlier ones.  ``noise_std`` adds Gaussian
    noise to the CT drawn from ``seed``.
    """
    extent = np.asarray(spec.dims) * np.asarray(spec.spacing)
    ct = np.full(spec.dims, float(spec.background))
    labels = np.zeros(spec.dims, dtype=np.uint8)
    X, Y, Z = voxel_centers(spec.dims, spec.spacing)
    for i, prim in enumerate(spec.primitives):
        lo, hi = prim.bounds()
        if np.any(hi <= 0) or np.any(lo >= extent):
            raise SpecOutOfBounds(f"primitive {i} ({prim.shape}) lies outside the volume")
        inside = prim.contains(X, Y, Z)
        ct[inside] = prim.intensity
        labels[inside] = prim.label
    if spec.noise_std > 0:
        rng = np.random.default_rng(seed)
        ct = ct + rng.normal(0.0, spec.noise_std, size=ct.shape)
    return CtVolume(ct, spec.spacing), LabelVolume(labels, spec.spacing)


# approximate layout of the ten bones as fractions of the volume extent:
# (label, shape, center, size) with the forearm running along +y
_WRIST_LAYOUT = [
    (1, "cylinder", (0.68, 0.22, 0.50), (0.07, 0.44)),
    (2, "cylinder", (0.36, 0.22, 0.50), (0.11, 0.44)),
    (3, "sphere", (0.70, 0.52, 0.44), (0.055,)),
    (4, "sphere", (0.55, 0.50, 0.52), (0.065,)),
    (5, "sphere", (0.36, 0.52, 0.52), (0.07,)),
    (6, "sphere", (0.72, 0.52, 0.62), (0.04,)),
    (7, "sphere", (0.64, 0.66, 0.50), (0.065,)),
    (8, "sphere", (0.50, 0.67, 0.50), (0.075,)),
    (9, "sphere", (0.38, 0.68, 0.48), (0.05,)),
    (10, "sphere", (0.27, 0.64, 0.54), (0.055,)),
]


def wrist_phantom_spec(seed=0, dims=(64, 64, 64), spacing=(0.5, 0.5, 0.5), metal=True):
    """A synthetic ten-bone wrist inside a soft-tissue cylinder.

    ``seed`` jitters bone positions, sizes and densities so that distinct
    seeds act like distinct scans.
    """
    rng = np.random.default_rng(seed)
    extent = np.asarray(dims) * np.asarray(spacing)
    scale = float(min(extent[0], extent[2]))
    prims = [
        Primitive("cylinder", tuple(extent / 2), (0.42 * scale, extent[1]), 40.0, 0)
    ]
    for label, shape, frac, size in _WRIST_LAYOUT:
        center = (np.asarray(frac) + rng.uniform(-0.02, 0.02, 3)) * extent
        jitter = rng.uniform(0.9, 1.1)
        if shape == "cylinder":
            sz = (size[0] * scale * jitter, size[1] * extent[1])
        else:
            sz = (size[0] * scale * jitter,)
        prims.append(Primitive(shape, tuple(center), sz, float(rng.uniform(700, 1300)), label))
    if metal:
        # small dense ring fragment outside the bones, exercises artifact clipping
        pos = (0.5 + 0.38 * np.cos(rng.uniform(0, 2 * np.pi)), 0.3, 0.5)
        prims.append(
            Primitive("sphere", tuple(np.asarray(pos) * extent), (0.02 * scale,), 8000.0, 0)
        )
    return PhantomSpec(dims, spacing, prims, background=-1000.0, noise_std=10.0)


def wrist_phantom(seed=0, dims=(64, 64, 64), spacing=(0.5, 0.5, 0.5), metal=True):
    return make_phantom(wrist_phantom_spec(seed, dims, spacing, metal), seed)
