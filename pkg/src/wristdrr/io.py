"""Volume and image file formats.

raw+json
    ``<name>.json`` holds ``{"dims", "spacing_mm", "dtype", "data_file",
    "order"}``; ``<name>.raw`` is the little-endian, x-fastest payload.
NIfTI-1
    read-only subset: uint8 / int16 / float32, axis-aligned orientation,
    ``.nii``, ``.nii.gz`` or ``.hdr``/``.img`` pairs.
PNG
    radiographs as 16-bit grayscale (``round(65535 * I)``), masks as 8-bit
    grayscale carrying raw class IDs.
"""
from __future__ import annotations

import gzip
import hashlib
import json
import os
import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .exceptions import IoFailure, MalformedHeader, UnsupportedDatatype, UnsupportedOrientation
from .volume import BONE_NAMES, CtVolume, LabelVolume

RAW_DTYPES = {"f32": "<f4", "i16": "<i2", "u8": "u1"}
NIFTI_DTYPES = {2: "u1", 4: "i2", 16: "f4"}


def _read_bytes(path):
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if str(path).endswith(".gz"):
        try:
            data = gzip.decompress(data)
        except (OSError, EOFError) as exc:
            raise IoFailure(f"cannot decompress {path}: {exc}") from exc
    return data


def _detect_format(path):
    name = str(path).lower()
    if name.endswith(".json"):
        return "raw+json"
    if name.endswith((".nii", ".nii.gz", ".hdr", ".hdr.gz")):
        return "nifti1"
    raise IoFailure(f"cannot infer volume format from {path}")


def _wrap(arr, spacing, labels):
    if labels:
        if arr.size and (arr.min() < 0 or arr.max() > 10):
            raise MalformedHeader("label volume holds values outside 0..10")
        return LabelVolume(arr, spacing)
    return CtVolume(arr, spacing)


def load_volume(path, format=None, labels=False):
    """Read a CT (or, with ``labels=True``, label) volume from disk."""
    fmt = format or _detect_format(path)
    if fmt == "raw+json":
        arr, spacing = _read_raw_json(path)
    elif fmt == "nifti1":
        arr, spacing = _read_nifti(path)
    else:
        raise ValueError(f"unknown volume format {fmt!r}")
    return _wrap(arr, spacing, labels)


def load_pair(ct_path, labels_path, format=None):
    ct = load_volume(ct_path, format)
    lab = load_volume(labels_path, format, labels=True)
    if ct.dims != lab.dims:
        raise MalformedHeader(f"CT dims {ct.dims} differ from label dims {lab.dims}")
    return ct, lab


# ------------------------------------------------------------------ raw+json


def _read_raw_json(path):
    path = Path(path)
    try:
        meta = json.loads(_read_bytes(path))
    except json.JSONDecodeError as exc:
        raise MalformedHeader(f"{path}: invalid JSON sidecar: {exc}") from exc
    try:
        dims = [int(d) for d in meta["dims"]]
        spacing = [float(s) for s in meta["spacing_mm"]]
        dtype = meta["dtype"]
        data_file = meta["data_file"]
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedHeader(f"{path}: missing or invalid sidecar field: {exc}") from exc
    if meta.get("order", "x-fastest") != "x-fastest":
        raise MalformedHeader(f"{path}: unsupported voxel order {meta['order']!r}")
    if len(dims) != 3 or len(spacing) != 3 or min(dims) < 1:
        raise MalformedHeader(f"{path}: dims and spacing_mm need three entries")
    if dtype not in RAW_DTYPES:
        raise UnsupportedDatatype(f"{path}: dtype {dtype!r} not in {sorted(RAW_DTYPES)}")
    np_dtype = np.dtype(RAW_DTYPES[dtype])
    payload = _read_bytes(path.parent / data_file)
    expected = int(np.prod(dims)) * np_dtype.itemsize
    if len(payload) != expected:
        raise MalformedHeader(
            f"{path}: payload holds {len(payload)} bytes, header declares {expected}"
        )
    arr = np.frombuffer(payload, dtype=np_dtype).reshape(dims, order="F")
    return arr, spacing


def save_raw_json(vol, path, dtype=None):
    """Write ``vol`` as ``<path>`` sidecar plus a ``.raw`` payload beside it."""
    path = Path(path)
    if dtype is None:
        dtype = "u8" if isinstance(vol, LabelVolume) else "f32"
    if dtype not in RAW_DTYPES:
        raise UnsupportedDatatype(f"dtype {dtype!r} not in {sorted(RAW_DTYPES)}")
    raw_name = path.with_suffix(".raw").name
    meta = {
        "dims": list(vol.dims),
        "spacing_mm": list(vol.spacing),
        "dtype": dtype,
        "data_file": raw_name,
        "order": "x-fastest",
    }
    payload = np.asarray(vol.data).astype(RAW_DTYPES[dtype]).tobytes(order="F")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        (path.parent / raw_name).write_bytes(payload)
        path.write_text(json.dumps(meta, indent=2) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return path


# -------------------------------------------------------------------- NIfTI-1


def _check_orientation(hdr, endian):
    sform_code = struct.unpack_from(endian + "h", hdr, 254)[0]
    qform_code = struct.unpack_from(endian + "h", hdr, 252)[0]
    if sform_code > 0:
        rot = np.array(struct.unpack_from(endian + "12f", hdr, 280)).reshape(3, 4)[:, :3]
    elif qform_code > 0:
        b, c, d = struct.unpack_from(endian + "3f", hdr, 256)
        a = np.sqrt(max(0.0, 1.0 - (b * b + c * c + d * d)))
        rot = np.array([
            [a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)],
            [2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b)],
            [2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - c * c - b * b],
        ])
    else:
        return
    # axis-aligned means each column has exactly one non-negligible entry
    mag = np.abs(rot)
    scale = mag.max(axis=0)
    if np.any(scale == 0):
        raise MalformedHeader("orientation matrix has a zero column")
    if np.any(np.sum(mag > 1e-4 * scale, axis=0) != 1):
        raise UnsupportedOrientation("oblique NIfTI orientation is not supported")


def _read_nifti(path):
    path = Path(path)
    data = _read_bytes(path)
    if len(data) < 348:
        raise MalformedHeader(f"{path}: file shorter than a NIfTI-1 header")
    for endian in "<>":
        if struct.unpack_from(endian + "i", data, 0)[0] == 348:
            break
    else:
        raise MalformedHeader(f"{path}: sizeof_hdr is not 348")
    magic = data[344:348]
    if magic not in (b"n+1\x00", b"ni1\x00"):
        raise MalformedHeader(f"{path}: bad NIfTI-1 magic {magic!r}")
    dim = struct.unpack_from(endian + "8h", data, 40)
    datatype = struct.unpack_from(endian + "h", data, 70)[0]
    pixdim = struct.unpack_from(endian + "8f", data, 76)
    vox_offset = int(struct.unpack_from(endian + "f", data, 108)[0])
    slope, inter = struct.unpack_from(endian + "2f", data, 112)

    ndim = dim[0]
    if not 1 <= ndim <= 7:
        raise MalformedHeader(f"{path}: dim[0]={ndim} out of range")
    dims = [dim[i] if i <= ndim else 1 for i in (1, 2, 3)]
    if any(d < 1 for d in dims) or any(dim[i] > 1 for i in range(4, ndim + 1)):
        raise MalformedHeader(f"{path}: only single 3D volumes are supported, dim={dim[:ndim + 1]}")
    if datatype not in NIFTI_DTYPES:
        raise UnsupportedDatatype(f"{path}: NIfTI datatype code {datatype} unsupported")
    _check_orientation(data, endian)
    spacing = [abs(pixdim[i]) if i <= ndim and pixdim[i] != 0 else 1.0 for i in (1, 2, 3)]

    np_dtype = np.dtype(NIFTI_DTYPES[datatype]).newbyteorder(endian)
    if magic == b"n+1\x00":
        payload = data[vox_offset:]
    else:
        name = str(path)
        img = name[: -len(".hdr.gz")] + ".img.gz" if name.endswith(".gz") else name[:-4] + ".img"
        payload = _read_bytes(img)[vox_offset:]
    n = int(np.prod(dims))
    if len(payload) < n * np_dtype.itemsize:
        raise MalformedHeader(
            f"{path}: payload holds {len(payload)} bytes, header declares {n * np_dtype.itemsize}"
        )
    arr = np.frombuffer(payload[: n * np_dtype.itemsize], dtype=np_dtype).reshape(dims, order="F")
    if slope != 0 and np.isfinite(slope) and (slope != 1 or inter != 0):
        arr = arr.astype(np.float64) * slope + inter
    return arr, spacing


# ------------------------------------------------------------------------ PNG


def encode_image(data):
    """Quantize a [0, 1] image to uint16 the way it is stored on disk."""
    return np.round(np.clip(data, 0.0, 1.0) * 65535).astype(np.uint16)


def save_image_png(data, path):
    _save_png(Image.fromarray(encode_image(np.asarray(data))), path)


def save_mask_png(data, path):
    _save_png(Image.fromarray(np.asarray(data, dtype=np.uint8)), path)


def _save_png(img, path):
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        img.save(path, format="PNG")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def load_image_png(path):
    """Read a 16-bit radiograph PNG back to floats in [0, 1]."""
    try:
        arr = np.array(Image.open(path))
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if arr.dtype == np.uint8:
        return arr.astype(np.float64) / 255.0
    return arr.astype(np.float64) / 65535.0


def load_mask_png(path):
    try:
        return np.array(Image.open(path), dtype=np.uint8)
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc


def legend():
    return {"0": "background", **{str(k): v for k, v in BONE_NAMES.items()}}


def write_legend(path):
    Path(path).write_text(json.dumps(legend(), indent=2) + "\n")


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def relpath(path, root):
    return os.path.relpath(path, root).replace(os.sep, "/")
