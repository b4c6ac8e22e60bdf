"""Input coercion helpers, in the spirit of ``sklearn.utils.check_array``."""
from __future__ import annotations

import numpy as np

from .exceptions import DimensionMismatch
from .labelproj import LabelMask
from .projection import Radiograph
from .volume import CtVolume, LabelVolume


def check_ct_volume(X, spacing=(1.0, 1.0, 1.0)):
    """Return ``X`` as a CtVolume; bare 3D arrays get ``spacing``."""
    if isinstance(X, CtVolume):
        return X
    if isinstance(X, LabelVolume):
        raise TypeError("expected a CT volume, got a LabelVolume")
    arr = np.asarray(X)
    if arr.ndim != 3:
        raise ValueError(f"expected a 3D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("CT volume contains NaN or infinite values")
    return CtVolume(arr, spacing)


def check_label_volume(Y, spacing=(1.0, 1.0, 1.0)):
    if isinstance(Y, LabelVolume):
        return Y
    arr = np.asarray(Y)
    if arr.ndim != 3:
        raise ValueError(f"expected a 3D array, got shape {arr.shape}")
    return LabelVolume(arr, spacing)


def check_volumes(X, spacing=(1.0, 1.0, 1.0)):
    """Coerce a volume or a sequence of volumes to a list of CtVolume."""
    if isinstance(X, CtVolume) or (isinstance(X, np.ndarray) and X.ndim == 3):
        return [check_ct_volume(X, spacing)]
    return [check_ct_volume(x, spacing) for x in X]


def check_label_volumes(Y, spacing=(1.0, 1.0, 1.0)):
    if isinstance(Y, LabelVolume) or (isinstance(Y, np.ndarray) and Y.ndim == 3):
        return [check_label_volume(Y, spacing)]
    return [check_label_volume(y, spacing) for y in Y]


def check_co_registered(ct, labels):
    if ct.dims != labels.dims:
        raise DimensionMismatch(f"CT dims {ct.dims} differ from label dims {labels.dims}")
    return ct, labels


def check_image(img):
    if isinstance(img, Radiograph):
        return img
    arr = np.asarray(img, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2D image, got shape {arr.shape}")
    return Radiograph(arr, stage="resized")


def check_mask(mask):
    if isinstance(mask, LabelMask):
        return mask
    return LabelMask(np.asarray(mask))


def check_image_stack(X):
    """Coerce to a list of Radiograph from a 2D image, a 3D stack or a sequence."""
    if isinstance(X, Radiograph):
        return [X]
    if isinstance(X, np.ndarray):
        if X.ndim == 2:
            return [check_image(X)]
        if X.ndim == 3:
            return [check_image(x) for x in X]
        raise ValueError(f"expected 2D or 3D image input, got shape {X.shape}")
    return [check_image(x) for x in X]


def check_mask_stack(Y):
    if isinstance(Y, LabelMask):
        return [Y]
    if isinstance(Y, np.ndarray):
        if Y.ndim == 2:
            return [check_mask(Y)]
        return [check_mask(y) for y in Y]
    return [check_mask(y) for y in Y]
