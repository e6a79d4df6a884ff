import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from chainvit.imager import (
    ImageSpec,
    ScalerParams,
    assemble,
    build_image,
    encode_value,
    fit_scaler,
    interpolate_reshape,
    load_images,
    resample,
    save_images,
    standardize,
)


def test_fit_scaler_population_std():
    p = fit_scaler([[0, 0], [2, 2]])
    np.testing.assert_array_equal(p.mean, [1, 1])
    np.testing.assert_array_equal(p.std, [1, 1])
    assert p.degenerate == ()


def test_fit_scaler_constant_column():
    with pytest.warns(UserWarning, match="zero-variance"):
        p = fit_scaler([[5, 1], [5, 3], [5, 9]])
    assert p.std[0] == 1.0 and p.degenerate == (0,)
    assert standardize(p, [5, 1])[0] == 0.0


def test_fit_scaler_needs_two_rows():
    with pytest.raises(ValueError):
        fit_scaler([[1, 2]])


def test_standardize():
    p = ScalerParams(np.array([1.0, 1.0]), np.array([1.0, 1.0]))
    np.testing.assert_array_equal(standardize(p, [3, 0]), [2, -1])
    np.testing.assert_array_equal(standardize(p, p.mean), [0, 0])
    np.testing.assert_array_equal(standardize(p, p.mean + p.std), [1, 1])


def test_assemble():
    np.testing.assert_array_equal(assemble([1, 2], [3]), [1, 2, 3])
    assert len(assemble([0, 0], np.zeros(140))) == 142
    with pytest.raises(ValueError):
        assemble([], [3])
    with pytest.raises(ValueError):
        assemble([1, np.nan], [3])


def test_resample_examples():
    np.testing.assert_allclose(resample(np.array([0.0, 1.0]), 3), [0, 0.5, 1])
    x = np.arange(12.0)
    np.testing.assert_array_equal(interpolate_reshape(x, ImageSpec(4, 4)), x.reshape(3, 4))
    np.testing.assert_array_equal(resample(np.full(7, 2.5), 50), np.full(50, 2.5))
    with pytest.raises(ValueError):
        resample(np.array([1.0]), 4)


def test_interpolate_is_row_major():
    img = interpolate_reshape(np.linspace(0, 1, 5), ImageSpec(4, 4))
    assert img.shape == (3, 4)
    assert img[0, 0] == 0.0 and img[-1, -1] == 1.0
    assert np.all(np.diff(img.reshape(-1)) >= 0)


finite = st.floats(-1e6, 1e6, allow_nan=False)


@given(arrays(np.float64, st.integers(2, 300), elements=finite), st.integers(2, 600))
def test_resample_invariants(x, n):
    r = resample(x, n)
    assert len(r) == n
    assert r[0] == x[0] and r[-1] == x[-1]
    assert r.min() >= x.min() and r.max() <= x.max()


@pytest.mark.parametrize(
    "v, a",
    [(10**18, 255.0), (1, 0.0), (0, 0.0), (10**19, 255.0), (10**9, 127.5), (10**100, 255.0)],
)
def test_encode_value(v, a):
    assert encode_value(v) == pytest.approx(a)


def test_encode_value_rejects_negative():
    with pytest.raises(ValueError):
        encode_value(-1)


@given(st.integers(0, 10**30), st.integers(0, 10**30))
def test_encode_value_monotone(a, b):
    lo, hi = sorted((a, b))
    assert encode_value(lo) <= encode_value(hi)


def test_build_image_shape_and_value_row():
    spec = ImageSpec(24, 24)
    img = build_image(np.random.default_rng(0).normal(size=142), 10**18, spec)
    assert img.shape == (24, 24)
    np.testing.assert_array_equal(img[-1], np.full(24, 255.0))
    img = build_image(np.full(142, 3.0), 12345, spec)
    np.testing.assert_array_equal(img[:-1], np.full((23, 24), 3.0))
    assert np.all(img[-1] == img[-1, 0])


def test_image_spec_validation():
    with pytest.raises(ValueError):
        ImageSpec(22, 24)
    s = ImageSpec()
    assert (s.height, s.width, s.body_rows, s.body_size) == (24, 24, 23, 552)


def test_image_batch_roundtrip(tmp_path):
    imgs = np.random.default_rng(1).normal(size=(5, 8, 12)).astype(np.float32)
    save_images(tmp_path / "a.bin", imgs, [0, 1, 2, 3, 6])
    px, lbl = load_images(tmp_path / "a.bin")
    assert px.tobytes() == imgs.tobytes()
    assert lbl.tolist() == [0, 1, 2, 3, 6]
    save_images(tmp_path / "b.bin", imgs)
    px, lbl = load_images(tmp_path / "b.bin")
    assert lbl is None and px.shape == (5, 8, 12)


def test_scaler_save_load(tmp_path):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        p = fit_scaler([[1, 7], [4, 7], [10, 7]])
    p.save(tmp_path / "s.bin")
    q = ScalerParams.load(tmp_path / "s.bin")
    assert q.mean.tobytes() == p.mean.tobytes() and q.std.tobytes() == p.std.tobytes()
    assert q.degenerate == (1,)
