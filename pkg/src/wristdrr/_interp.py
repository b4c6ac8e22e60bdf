"""Shared linear-interpolation kernels.

``lerp`` is clipped to its endpoints so interpolated values never leave the
input range, and integer sample positions reproduce inputs bitwise.
"""
import numpy as np


def lerp(a, b, t):
    out = a + t * (b - a)
    return np.clip(out, np.minimum(a, b), np.maximum(a, b))


def linear_weights(pos, n):
    """Lower/upper neighbour indices and fractional offsets for positions
    clamped to ``[0, n-1]``."""
    pos = np.clip(pos, 0.0, n - 1)
    i0 = np.floor(pos).astype(np.intp)
    i1 = np.minimum(i0 + 1, n - 1)
    return i0, i1, pos - i0


def interp_axis(arr, axis, pos):
    """1D linear interpolation of ``arr`` along ``axis`` at ``pos``."""
    i0, i1, t = linear_weights(pos, arr.shape[axis])
    shape = [1] * arr.ndim
    shape[axis] = -1
    return lerp(np.take(arr, i0, axis=axis), np.take(arr, i1, axis=axis), t.reshape(shape))


def bilinear(plane, rows, cols):
    """Sample ``plane`` (shape (nr, nc, ...)) at fractional ``rows``/``cols``."""
    r0, r1, tr = linear_weights(rows, plane.shape[0])
    c0, c1, tc = linear_weights(cols, plane.shape[1])
    extra = (slice(None),) * rows.ndim + (None,) * (plane.ndim - 2)
    tr = tr[extra]
    tc = tc[extra]
    top = lerp(plane[r0, c0], plane[r0, c1], tc)
    bottom = lerp(plane[r1, c0], plane[r1, c1], tc)
    return lerp(top, bottom, tr)


def corner_aligned_positions(n_in, n_out):
    if n_out == 1:
        return np.array([(n_in - 1) / 2.0])
    return np.arange(n_out) * ((n_in - 1) / (n_out - 1))
