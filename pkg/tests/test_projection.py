import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from wristdrr import (
    ConfigError,
    CtVolume,
    LabelVolume,
    PhantomSpec,
    Primitive,
    ProjectionConfig,
    Radiograph,
    clamp_air,
    clamp_artifacts,
    make_phantom,
    normalize_minmax,
    project,
    project_labels,
    resize,
    resize_mask,
    rotate_volume,
    simulate_view,
    tissue_reduction,
)
from wristdrr.projection import simulate_views


def column_sum_oracle(data, sz, alpha):
    nx, ny, nz = data.shape
    out = np.empty((ny, nx))
    for x in range(nx):
        for y in range(ny):
            s = 0.0
            for z in range(nz):
                s += data[x, y, z]
            out[y, x] = math.exp(-alpha * s * sz)
    return out


def test_zero_volume_projects_to_ones():
    img = project(CtVolume(np.zeros((4, 5, 6))), ProjectionConfig(attenuation_scale=0.01))
    assert img.stage == "raw_projection" and img.dims == (4, 5)
    assert np.all(img.data == 1.0)
    assert np.all(project(CtVolume(np.zeros((3, 3, 3)))).data == 1.0)


def test_single_voxel_beer_lambert():
    v, sz, alpha = 1234.5, 0.625, 3.1e-4
    img = project(CtVolume(np.full((1, 1, 1), v), (0.29, 0.29, sz)), ProjectionConfig(attenuation_scale=alpha))
    assert img.data[0, 0] == pytest.approx(math.exp(-alpha * v * sz), rel=4 * np.finfo(float).eps)


def test_projection_matches_column_sum_oracle():
    rng = np.random.default_rng(0)
    data = rng.uniform(0, 1000, (8, 8, 8))
    cfg = ProjectionConfig(attenuation_scale=2e-4)
    img = project(CtVolume(data, (1.0, 1.0, 0.5)), cfg)
    np.testing.assert_allclose(img.data, column_sum_oracle(data, 0.5, 2e-4), rtol=0, atol=1e-6)


def test_adaptive_scale_maps_peak_to_e_minus_4():
    rng = np.random.default_rng(1)
    img = project(CtVolume(rng.uniform(0, 500, (6, 6, 6))))
    assert img.data.min() == pytest.approx(math.exp(-4))
    assert img.data.max() <= 1.0


def test_project_rejects_negative_values():
    with pytest.raises(ValueError):
        project(CtVolume(np.full((2, 2, 2), -1.0)))


@settings(max_examples=40, deadline=None)
@given(
    arrays(np.float64, (4, 3, 5), elements=st.floats(0, 3000)),
    st.integers(0, 59),
    st.floats(0.1, 500),
)
def test_projection_range_and_monotone(data, flat_index, bump):
    cfg = ProjectionConfig(attenuation_scale=1e-3)
    base = project(CtVolume(data), cfg).data
    assert np.all(base > 0) and np.all(base <= 1)
    bumped = data.copy()
    bumped.flat[flat_index] += bump
    assert np.all(project(CtVolume(bumped), cfg).data <= base)


# ------------------------------------------------------------ tissue reduction


def test_tissue_reduction_1_to_100():
    img = Radiograph(np.arange(1, 101, dtype=float).reshape(10, 10))
    out = tissue_reduction(img).data.ravel()
    assert out.tolist() == [10.0] * 19 + list(range(20, 101))
    assert tissue_reduction(img).stage == "tissue_reduced"


def test_tissue_reduction_constant_unchanged():
    img = Radiograph(np.full((5, 5), 0.3))
    assert np.array_equal(tissue_reduction(img).data, img.data)


@given(arrays(np.float64, (7, 9), elements=st.floats(0, 1)))
def test_tissue_reduction_rule(data):
    from wristdrr import nearest_rank_percentile

    out = tissue_reduction(Radiograph(data)).data
    p20 = nearest_rank_percentile(data, 20)
    p10 = nearest_rank_percentile(data, 10)
    keep = data >= p20
    assert np.array_equal(out[keep], data[keep])
    assert np.all(out[~keep] == p10)
    assert out.min() >= min(p10, data[keep].min())


def test_tissue_reduction_inverted_polarity():
    data = np.arange(1, 101, dtype=float).reshape(10, 10) / 100.0
    cfg = ProjectionConfig(invert_for_tissue_reduction=True)
    out = tissue_reduction(Radiograph(data), cfg).data.ravel()
    # on 1 - I the smallest 19 values are the brightest 19 pixels (0.82 .. 1.00)
    j = 1.0 - data.ravel()
    target = np.sort(j)[9]
    changed = j < np.sort(j)[19]
    assert changed.sum() == 19
    np.testing.assert_array_equal(out[changed], 1.0 - target)
    np.testing.assert_array_equal(out[~changed], data.ravel()[~changed])


# ---------------------------------------------------------------- normalization


def test_normalize_example():
    out = normalize_minmax(Radiograph(np.array([[2.0, 4.0, 6.0]])))
    assert out.data.tolist() == [[0.0, 0.5, 1.0]] and out.stage == "normalized"


def test_normalize_constant_is_zero():
    assert np.all(normalize_minmax(Radiograph(np.full((3, 3), 5.0))).data == 0)


@given(arrays(np.float64, (5, 6), elements=st.floats(-1e3, 1e3), unique=True))
def test_normalize_range_and_idempotent(data):
    out = normalize_minmax(Radiograph(data))
    assert out.data.min() == 0 and out.data.max() == 1
    assert np.array_equal(normalize_minmax(out).data, out.data)


# ----------------------------------------------------------------------- resize


def test_resize_identity():
    rng = np.random.default_rng(2)
    img = Radiograph(rng.random((256, 256)))
    out = resize(img, (256, 256))
    assert np.array_equal(out.data, img.data) and out.stage == "resized"


def test_resize_constant():
    out = resize(Radiograph(np.full((37, 53), 0.25)), (256, 256))
    assert out.data.shape == (256, 256)
    assert np.all(out.data == 0.25)


def test_resize_ramp_downscale():
    ramp = np.tile(np.arange(256, dtype=float), (64, 1))
    out = resize(Radiograph(ramp), (128, 32)).data
    assert out.shape == (32, 128)
    expected = np.arange(128) * 255 / 127
    np.testing.assert_allclose(out, np.tile(expected, (32, 1)), atol=1e-5)
    assert out[0, 0] == 0 and out[0, -1] == 255


@given(arrays(np.float64, (6, 9), elements=st.floats(-5, 5)), st.integers(1, 40), st.integers(1, 40))
def test_resize_stays_in_range(data, w, h):
    out = resize(Radiograph(data), (w, h)).data
    assert out.shape == (h, w)
    assert out.min() >= data.min() and out.max() <= data.max()


def test_resize_pad_mode_keeps_aspect():
    data = np.zeros((10, 20))
    data[:, :] = 1.0
    data[4:6, 9:11] = 0.0
    out = resize(Radiograph(data), (20, 20), mode="pad").data
    # padded rows carry the image maximum
    assert np.all(out[0] == 1.0) and np.all(out[-1] == 1.0)
    assert out.min() == 0.0


# ---------------------------------------------------------------------- config


@pytest.mark.parametrize(
    "kw",
    [
        {"tissue_low_percentile": 10, "tissue_target_percentile": 20},
        {"artifact_percentile": 100},
        {"output_size": (4, 256)},
        {"view_angles": ()},
        {"rotation_axis": "w"},
    ],
)
def test_config_invariants(kw):
    with pytest.raises(ConfigError):
        ProjectionConfig(**kw)


def test_default_view_sweep():
    cfg = ProjectionConfig()
    assert cfg.view_angles == tuple(float(a) for a in range(-70, 71, 10))
    assert len(cfg.view_angles) == 15 and cfg.output_size == (256, 256)


# -------------------------------------------------------------- simulate_view


@pytest.fixture
def phantom():
    spec = PhantomSpec(
        (20, 24, 20),
        (0.5, 0.5, 0.5),
        [
            Primitive("cylinder", (5, 6, 5), (4, 12), 40, 0),
            Primitive("sphere", (4, 4, 5), 1.5, 900, 4),
            Primitive("box", (6, 8, 5), (2, 2, 2), 1200, 8),
            Primitive("sphere", (8.5, 10, 5), 0.5, 9000, 0),
        ],
        background=-1000,
        noise_std=5,
    )
    return make_phantom(spec, seed=3)


def test_simulate_view_equals_manual_chain(phantom):
    ct, labels = phantom
    cfg = ProjectionConfig(output_size=(64, 48))
    img, mask = simulate_view(ct, labels, 30, cfg)

    vol = clamp_air(clamp_artifacts(ct, 99))
    vol = rotate_volume(vol, 30, "y")
    ref = resize(normalize_minmax(tissue_reduction(project(vol, cfg), cfg)), (64, 48))
    ref_mask = resize_mask(project_labels(rotate_volume(labels, 30, "y")), (64, 48))
    assert img.data.tobytes() == ref.data.tobytes()
    assert mask.data.tobytes() == ref_mask.data.tobytes()
    assert img.stage == "resized" and img.data.shape == mask.data.shape == (48, 64)
    assert img.data.min() == 0.0 and img.data.max() == 1.0


def test_default_sweep_gives_15_distinct_pairs(phantom):
    ct, labels = phantom
    pairs = simulate_views(ct, labels, ProjectionConfig(output_size=(32, 32)))
    assert len(pairs) == 15
    digests = {img.data.tobytes() + mask.data.tobytes() for img, mask in pairs}
    assert len(digests) == 15


def test_box_footprint_at_zero_degrees():
    spec = PhantomSpec((16, 16, 16), primitives=[Primitive("box", (6, 9, 8), (4, 6, 10), 800, 4)])
    ct, labels = make_phantom(spec)
    _, mask = simulate_view(ct, labels, 0, ProjectionConfig(output_size=(16, 16)))
    expected = np.zeros((16, 16), dtype=np.uint8)
    expected[6:12, 4:8] = 4  # rows = y in [6, 12), cols = x in [4, 8)
    assert np.array_equal(mask.data, expected)


def test_right_angle_views_are_mirrors(phantom):
    ct, labels = phantom
    cfg = ProjectionConfig(output_size=(40, 40))
    a, ma = simulate_view(ct, labels, 90, cfg)
    b, mb = simulate_view(ct, labels, -90, cfg)
    np.testing.assert_allclose(a.data, b.data[:, ::-1], atol=1e-6)
    c, _ = simulate_view(ct, labels, 0, cfg)
    d, _ = simulate_view(ct, labels, 180, cfg)
    np.testing.assert_allclose(c.data, d.data[:, ::-1], atol=1e-6)


def test_simulate_view_is_deterministic(phantom):
    ct, labels = phantom
    cfg = ProjectionConfig(output_size=(32, 32))
    a = simulate_view(ct, labels, 20, cfg)
    b = simulate_view(ct, labels, 20, cfg)
    assert a[0].data.tobytes() == b[0].data.tobytes()
    assert a[1].data.tobytes() == b[1].data.tobytes()


def test_simulate_view_requires_coregistration():
    from wristdrr import DimensionMismatch

    with pytest.raises(DimensionMismatch):
        simulate_view(CtVolume(np.zeros((4, 4, 4))), LabelVolume(np.zeros((4, 4, 5))), 0)
