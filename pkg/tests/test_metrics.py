import math

import numpy as np
import pytest

from chromacodec.errors import ImageTooSmall, ShapeMismatch
from chromacodec.metrics import PSNR_IDENTICAL_DB, chroma_mse, ms_ssim, rgb_psnr
from chromacodec.pixelio import RgbImage


def _img(data):
    arr = np.asarray(data, dtype=np.uint8)
    return RgbImage(width=arr.shape[1], height=arr.shape[0], data=arr)


def _const_img(h, w, value):
    return _img(np.full((h, w, 3), value, dtype=np.uint8))


def test_chroma_mse_identical_zero(rng):
    planes = rng.uniform(-0.5, 0.5, (2, 6, 6))
    assert chroma_mse(planes, planes) == 0.0


def test_chroma_mse_uniform_offset():
    a = np.zeros((2, 4, 4))
    b = np.full((2, 4, 4), 10.0 / 255.0)
    assert chroma_mse(a, b) == pytest.approx(100.0, rel=1e-12)


def test_chroma_mse_matches_double_loop(rng):
    a = rng.uniform(-0.5, 0.5, (2, 5, 7))
    b = rng.uniform(-0.5, 0.5, (2, 5, 7))
    total = 0.0
    for c in range(2):
        for y in range(5):
            for x in range(7):
                total += (a[c, y, x] - b[c, y, x]) ** 2
    expected = total / (2 * 5 * 7) * 255.0**2
    assert chroma_mse(a, b) == pytest.approx(expected, rel=1e-9)


def test_psnr_identical_sentinel():
    img = _const_img(4, 4, 50)
    assert rgb_psnr(img, img) == PSNR_IDENTICAL_DB


def test_psnr_mse_100():
    a = _const_img(4, 4, 0)
    b = _const_img(4, 4, 10)  # per-channel diff 10 -> MSE 100
    assert rgb_psnr(a, b) == pytest.approx(10 * math.log10(650.25), rel=1e-12)
    assert rgb_psnr(a, b) == pytest.approx(28.1308, abs=1e-4)


def test_psnr_maximal_error_zero_db():
    assert rgb_psnr(_const_img(2, 2, 255), _const_img(2, 2, 0)) == pytest.approx(0.0, abs=1e-12)


def test_psnr_consistency_with_mse(rng):
    a = _img(rng.integers(0, 256, (8, 8, 3), dtype=np.uint8))
    b = _img(rng.integers(0, 256, (8, 8, 3), dtype=np.uint8))
    diff = a.data.astype(float) - b.data.astype(float)
    mse = (diff**2).mean()
    assert rgb_psnr(a, b) == pytest.approx(10 * math.log10(255**2 / mse), abs=1e-9)


def test_ms_ssim_identical_exactly_one(rng):
    img = _img(rng.integers(0, 256, (64, 64, 3), dtype=np.uint8))
    assert ms_ssim(img, img) == 1.0


def test_ms_ssim_constant_images_closed_form():
    a = _const_img(64, 64, 100)
    b = _const_img(64, 64, 110)
    expected = (2 * 100 * 110 + 6.5025) / (100**2 + 110**2 + 6.5025)
    assert ms_ssim(a, b) == pytest.approx(expected, rel=1e-9)


def test_ms_ssim_symmetric(rng):
    a = _img(rng.integers(0, 256, (48, 48, 3), dtype=np.uint8))
    b = _img(rng.integers(0, 256, (48, 48, 3), dtype=np.uint8))
    assert ms_ssim(a, b) == pytest.approx(ms_ssim(b, a), rel=1e-12)


def test_ms_ssim_bounded_and_discriminative(rng):
    a = _img(rng.integers(0, 256, (64, 64, 3), dtype=np.uint8))
    noisy = a.data.astype(int) + rng.integers(-20, 21, a.data.shape)
    b = _img(np.clip(noisy, 0, 255).astype(np.uint8))
    score = ms_ssim(a, b)
    assert score < 1.0
    assert ms_ssim(a, a) == 1.0


def test_ms_ssim_too_small():
    with pytest.raises(ImageTooSmall):
        ms_ssim(_const_img(8, 8, 0), _const_img(8, 8, 0))


def test_ms_ssim_scale_count_adapts():
    # 32px supports two dyadic scales (32, 16); 64px supports three
    a32, b32 = _const_img(32, 32, 100), _const_img(32, 32, 110)
    a64, b64 = _const_img(64, 64, 100), _const_img(64, 64, 110)
    # constant images: renormalized weights always sum to 1, same value
    assert ms_ssim(a32, b32) == pytest.approx(ms_ssim(a64, b64), rel=1e-9)


def test_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        rgb_psnr(_const_img(4, 4, 0), _const_img(4, 5, 0))
    with pytest.raises(ShapeMismatch):
        chroma_mse(np.zeros((2, 3, 3)), np.zeros((2, 4, 4)))
