import struct

import numpy as np
import pytest

from wristdrr.phantom import PhantomSpec, Primitive, make_phantom

_CRITERIA = []


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    for name, value in report.user_properties:
        if name == "criterion":
            _CRITERIA.append((value, report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _CRITERIA:
        mark = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{mark}  {name}")


def write_nifti(path, data, pixdim=(1.0, 1.0, 1.0), datatype=16, slope=0.0, inter=0.0,
                sform=None, truncate=None):
    """Minimal single-file NIfTI-1 writer used to build reader fixtures."""
    dtypes = {2: "<u1", 4: "<i2", 16: "<f4", 64: "<f8"}
    arr = np.asarray(data)
    hdr = bytearray(352)
    struct.pack_into("<i", hdr, 0, 348)
    struct.pack_into("<8h", hdr, 40, 3, *arr.shape, 1, 1, 1, 1)
    struct.pack_into("<h", hdr, 70, datatype)
    struct.pack_into("<h", hdr, 72, np.dtype(dtypes[datatype]).itemsize * 8)
    struct.pack_into("<8f", hdr, 76, 1.0, *pixdim, 0, 0, 0, 0)
    struct.pack_into("<f", hdr, 108, 352.0)
    struct.pack_into("<2f", hdr, 112, slope, inter)
    if sform is not None:
        struct.pack_into("<h", hdr, 254, 1)
        struct.pack_into("<12f", hdr, 280, *np.asarray(sform, dtype=float).ravel())
    hdr[344:348] = b"n+1\x00"
    payload = arr.astype(dtypes[datatype]).tobytes(order="F")
    if truncate is not None:
        payload = payload[:truncate]
    with open(path, "wb") as fh:
        fh.write(bytes(hdr) + payload)
    return path


@pytest.fixture
def two_bone_phantom():
    """Label 8 box near z=0 partly covering a label 4 box deeper in the volume."""
    spec = PhantomSpec(
        dims=(24, 24, 24),
        spacing=(1.0, 1.0, 1.0),
        primitives=[
            Primitive("box", (11, 12, 8), (10, 8, 4), 900.0, 8),
            Primitive("box", (13, 12, 16), (10, 8, 4), 700.0, 4),
        ],
        background=-1000.0,
    )
    return make_phantom(spec)


def smooth_volume(n=48, seed=0):
    """Broad Gaussian blob, smooth on the voxel scale."""
    rng = np.random.default_rng(seed)
    c = (n - 1) / 2 + rng.uniform(-1, 1, 3)
    x, y, z = np.meshgrid(*(np.arange(n),) * 3, indexing="ij")
    r2 = (x - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2
    return 1000.0 * np.exp(-r2 / (2 * (n / 7) ** 2))
