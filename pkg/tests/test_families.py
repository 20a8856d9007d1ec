import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mfbench.disturbance import (
    CATEGORY,
    FAMILIES,
    DisturbanceContext,
    DisturbanceSpec,
    SplitMix64,
    apply_disturbance,
    sample_params,
)
from mfbench.disturbance.families import gaussian_kernel
from mfbench.errors import ConfigError, DimensionError


def _reflect101(i, n):
    if i < 0:
        return -i
    if i >= n:
        return 2 * n - 2 - i
    return i


def _direct_filter(img, kernel2d):
    """Straight 2-D correlation with reflect-101 borders, pixel by pixel."""
    h, w, _ = img.shape
    kh, kw = kernel2d.shape
    cy, cx = (kh - 1) // 2, (kw - 1) // 2
    out = np.zeros(img.shape)
    for y in range(h):
        for x in range(w):
            acc = np.zeros(3)
            for j in range(kh):
                for i in range(kw):
                    acc += kernel2d[j, i] * img[_reflect101(y + j - cy, h), _reflect101(x + i - cx, w)]
            out[y, x] = acc
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


def _image(seed, h=20, w=18):
    return np.random.default_rng(seed).integers(0, 256, (h, w, 3), dtype=np.uint8)


def _apply(img, family, seed=0, **params):
    return apply_disturbance(img, DisturbanceSpec(family, params), DisturbanceContext(),
                             SplitMix64(seed))


def test_opencv_sigma_rule():
    # zero sigma derives 0.3*((k-1)/2 - 1) + 0.8
    k = gaussian_kernel(11, 0)
    s = 0.3 * (5 - 1) + 0.8
    x = np.arange(11) - 5.0
    ref = np.exp(-x ** 2 / (2 * s * s))
    np.testing.assert_allclose(k, ref / ref.sum(), rtol=1e-14)


@pytest.mark.parametrize("sigma", [(5, 0), (0, 5)])
def test_blur_matches_direct_filter(sigma):
    img = _image(1)
    sx, sy = sigma
    sy = sy or sx
    k = np.outer(gaussian_kernel(11, sy), gaussian_kernel(11, sx))
    got = _apply(img, "blurring", ksize=(11, 11), sigma=sigma)
    ref = _direct_filter(img, k)
    # separable vs direct summation order can flip a .5 rounding
    assert np.abs(got.astype(int) - ref.astype(int)).max() <= 1
    assert np.mean(got == ref) > 0.99


@pytest.mark.parametrize("direction", ["H", "V", "D"])
def test_motion_blur_matches_direct_filter(direction):
    img = _image(2)
    size = 7
    if direction == "H":
        k = np.full((1, size), 1.0 / size)
    elif direction == "V":
        k = np.full((size, 1), 1.0 / size)
    else:
        k = np.eye(size) / size
    got = _apply(img, "jittering", direction=direction, size=size)
    ref = _direct_filter(img, k)
    assert np.abs(got.astype(int) - ref.astype(int)).max() <= 1


@pytest.mark.parametrize("family,params", [
    ("blurring", {"ksize": (29, 29), "sigma": (0, 5)}),
    ("jittering", {"direction": "D", "size": 50}),
])
def test_constant_image_is_fixed_point(family, params):
    img = np.full((64, 64, 3), 137, np.uint8)
    np.testing.assert_array_equal(_apply(img, family, **params), img)


def test_full_occlusion_is_black():
    out = _apply(_image(3, 64, 64), "full_occlusion")
    assert out.shape == (64, 64, 3) and not out.any()


def test_frame_dropping_replays_last_clean():
    ctx = DisturbanceContext()
    a, b = _image(4), _image(5)
    spec = DisturbanceSpec("frame_dropping")
    np.testing.assert_array_equal(apply_disturbance(a, spec, ctx, SplitMix64(0)), a)
    ctx.last_clean = b
    np.testing.assert_array_equal(apply_disturbance(a, spec, ctx, SplitMix64(0)), b)


def test_partial_occlusion_disk():
    img = np.full((64, 64, 3), 200, np.uint8)
    out = _apply(img, "partial_occlusion", center_x=0.25)
    assert not out[32, 16].any()
    assert (out[32, 60] == 200).all()
    black = (out == 0).all(axis=2).sum()
    assert abs(black - math.pi * 16 ** 2) < 40


def test_overexpose_brightens_toward_white():
    img = np.full((64, 64, 3), 100, np.uint8)
    out = _apply(img, "overexposing", intensity=1.0, center=(0.5, 0.5))
    assert (out[32, 32] >= 250).all()
    assert (out[0, 0] == 100).all()
    assert (out >= img).all()


@pytest.mark.parametrize("amount,salt", [(0.2, 0.0), (0.5, 0.5), (0.8, 1.0)])
def test_impulse_fractions_within_binomial_tolerance(amount, salt):
    img = np.full((64, 64, 3), 128, np.uint8)
    out = _apply(img, "impulse_noise", seed=11, amount=amount, salt_ratio=salt)
    n = 64 * 64
    hit = (out[..., 0] != 128)
    p_hat = hit.mean()
    assert abs(p_hat - amount) <= 4 * math.sqrt(amount * (1 - amount) / n)
    white = (out[..., 0] == 255)[hit].mean()
    hits = hit.sum()
    assert abs(white - salt) <= 4 * math.sqrt(max(salt * (1 - salt), 1e-12) / hits) + 1e-12
    # whole pixels are hit, never single channels
    assert ((out == out[..., :1]) | ~hit[..., None]).all()


def test_gaussian_noise_moments():
    img = np.full((64, 64, 3), 128, np.uint8)
    out = _apply(img, "gaussian_noise", seed=2, std=25)
    d = out.astype(float) - 128
    assert abs(d.mean()) < 1.5 and abs(d.std() - 25) < 1.5


@given(st.sampled_from(FAMILIES), st.integers(0, 2**64 - 1))
def test_shape_and_dtype_preserved(family, seed):
    spec = sample_params(family, SplitMix64(seed))
    assert spec.category == CATEGORY[family]
    assert DisturbanceSpec.from_dict(spec.to_dict()) == spec
    img = _image(seed % 1000, 64, 64)
    out = apply_disturbance(img, spec, DisturbanceContext(), SplitMix64(seed))
    assert out.shape == img.shape and out.dtype == np.uint8


def test_disturbance_is_pure_in_seed():
    img = _image(9, 64, 64)
    a = _apply(img, "impulse_noise", seed=3, amount=0.5, salt_ratio=0.5)
    b = _apply(img, "impulse_noise", seed=3, amount=0.5, salt_ratio=0.5)
    np.testing.assert_array_equal(a, b)


def test_errors():
    with pytest.raises(DimensionError):
        _apply(np.zeros((8, 8), np.uint8), "full_occlusion")
    with pytest.raises(DimensionError):
        _apply(np.zeros((8, 8, 3), np.float32), "full_occlusion")
    with pytest.raises(ConfigError):
        sample_params("fog", SplitMix64(0))
    with pytest.raises(ConfigError):
        _apply(_image(0), "jittering", direction="Q", size=5)
