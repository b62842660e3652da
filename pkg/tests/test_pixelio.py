import numpy as np
import pytest
from PIL import Image

from chromacodec.errors import MalformedImage, UnsupportedBitDepth
from chromacodec.pixelio import (
    PlanarImage,
    RgbImage,
    fnv1a64,
    quantize_gray,
    read_gray,
    read_image,
    rgb_to_ycbcr,
    write_gray,
    write_image,
    ycbcr_to_rgb,
)


def _img(pixels):
    arr = np.array(pixels, dtype=np.uint8)
    return RgbImage(width=arr.shape[1], height=arr.shape[0], data=arr)


def test_smallest_ppm_roundtrip(tmp_path):
    path = tmp_path / "one.ppm"
    path.write_bytes(b"P6 1 1 255 "[:11] + bytes([255, 0, 0]))
    img = read_image(path)
    assert (img.width, img.height) == (1, 1)
    assert img.data.tolist() == [[[255, 0, 0]]]


def test_png_solid_gray(tmp_path):
    path = tmp_path / "gray.png"
    write_image(_img([[(128, 128, 128)] * 2] * 2), path)
    img = read_image(path)
    assert np.all(img.data == 128)


def test_truncated_ppm_header(tmp_path):
    path = tmp_path / "bad.ppm"
    path.write_bytes(b"P6 4 4")
    with pytest.raises(MalformedImage):
        read_image(path)


def test_truncated_ppm_payload(tmp_path):
    path = tmp_path / "bad.ppm"
    path.write_bytes(b"P6\n2 2\n255\n" + b"\x00" * 5)
    with pytest.raises(MalformedImage):
        read_image(path)


def test_missing_file_raises():
    with pytest.raises(FileNotFoundError):
        read_image("/does/not/exist.png")


def test_16bit_png_rejected(tmp_path):
    path = tmp_path / "deep.png"
    Image.fromarray(np.full((2, 2), 1000, dtype=np.uint16)).save(path)
    assert path.read_bytes()[24] == 16  # really a 16-bit file
    with pytest.raises(UnsupportedBitDepth):
        read_image(path)


def test_ppm_maxval_rejected(tmp_path):
    path = tmp_path / "deep.ppm"
    path.write_bytes(b"P6\n1 1\n65535\n\x00\x00\x00\x00\x00\x00")
    with pytest.raises(UnsupportedBitDepth):
        read_image(path)


def test_ppm_comments_allowed(tmp_path):
    path = tmp_path / "c.ppm"
    path.write_bytes(b"P6\n# a comment\n1 1\n# more\n255\n\x01\x02\x03")
    img = read_image(path)
    assert img.data.tolist() == [[[1, 2, 3]]]


@pytest.mark.parametrize("fmt", ["png", "ppm"])
def test_write_read_roundtrip(tmp_path, fmt, rng):
    data = rng.integers(0, 256, (9, 7, 3), dtype=np.uint8)
    img = _img(data)
    path = tmp_path / f"img.{fmt}"
    write_image(img, path)
    back = read_image(path)
    assert np.array_equal(back.data, img.data)


def test_unwritable_path():
    with pytest.raises(OSError):
        write_image(_img([[(0, 0, 0)]]), "/nonexistent-dir/x.png")


def test_white_black_neutral_chroma():
    planar = rgb_to_ycbcr(_img([[(255, 255, 255)], [(0, 0, 0)]]))
    assert planar.y[0, 0] == pytest.approx(1.0)
    assert planar.y[1, 0] == pytest.approx(0.0)
    assert planar.cb[0, 0] == 0.0 and planar.cr[0, 0] == 0.0
    assert planar.cb[1, 0] == 0.0 and planar.cr[1, 0] == 0.0


def test_pure_red_matrix_row():
    planar = rgb_to_ycbcr(_img([[(255, 0, 0)]]))
    assert planar.y[0, 0] == pytest.approx(0.299, abs=1e-12)
    assert planar.cb[0, 0] == pytest.approx(-0.168736, abs=1e-12)
    assert planar.cr[0, 0] == pytest.approx(0.5, abs=1e-12)


def test_gray_pixels_have_exactly_zero_chroma():
    levels = np.arange(256, dtype=np.uint8)
    img = _img(np.stack([levels] * 3, axis=-1)[None])
    planar = rgb_to_ycbcr(img)
    assert np.all(planar.cb == 0.0)
    assert np.all(planar.cr == 0.0)


def test_roundtrip_lattice_within_one():
    # exhaustive sweep over a 17^3 lattice of the RGB cube
    v = np.arange(0, 256, 15, dtype=np.uint8)
    r, g, b = np.meshgrid(v, v, v, indexing="ij")
    data = np.stack([r.ravel(), g.ravel(), b.ravel()], axis=-1).reshape(1, -1, 3)
    img = _img(data)
    back = ycbcr_to_rgb(rgb_to_ycbcr(img))
    diff = np.abs(back.data.astype(int) - img.data.astype(int))
    assert diff.max() <= 1


def test_inverse_of_white():
    planar = PlanarImage(width=1, height=1, y=[[1.0]], cb=[[0.0]], cr=[[0.0]])
    assert ycbcr_to_rgb(planar).data.tolist() == [[[255, 255, 255]]]


def test_out_of_gamut_clamps():
    planar = PlanarImage(width=1, height=1, y=[[0.0]], cb=[[0.5]], cr=[[0.5]])
    rgb = ycbcr_to_rgb(planar).data[0, 0]
    assert rgb.min() >= 0 and rgb.max() <= 255  # uint8 by construction
    # red channel pushed above zero by cr, blue by cb, green clamped at 0
    assert rgb[1] == 0


def test_gray_io_exact(tmp_path):
    y = quantize_gray(np.linspace(0, 1, 64).reshape(8, 8))
    path = tmp_path / "g.png"
    write_gray(y, path)
    assert np.array_equal(read_gray(path), y)


def test_fnv1a64_known_vectors():
    # reference values for the 64-bit FNV-1a test vectors
    assert fnv1a64(b"") == 0xCBF29CE484222325
    assert fnv1a64(b"a") == 0xAF63DC4C8601EC8C
    assert fnv1a64(b"foobar") == 0x85944171F73967E8


def test_fnv1a64_single_byte_sensitivity(rng):
    data = bytes(rng.integers(0, 256, 64, dtype=np.uint8))
    base = fnv1a64(data)
    for pos in range(0, 64, 7):
        corrupted = bytearray(data)
        corrupted[pos] ^= 0x40
        assert fnv1a64(bytes(corrupted)) != base
