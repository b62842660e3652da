"""Image I/O and color-space conversion.

The codec works internally on planar YCbCr with luma in [0, 1] and chroma
centered at zero in [-0.5, 0.5] (full-range BT.601, the JPEG convention).
PNG files are handled through Pillow, binary PPM/PGM (P6/P5, maxval 255) by
a local parser so the error paths are precise.
"""

import os
import struct
from dataclasses import dataclass

import numpy as np
from PIL import Image

from chromacodec.errors import MalformedImage, ShapeMismatch, UnsupportedBitDepth

# Full-range BT.601: rows map (r, g, b) in [0,1] to (y, cb, cr).
RGB_TO_YCBCR = np.array(
    [
        [0.299, 0.587, 0.114],
        [-0.168736, -0.331264, 0.5],
        [0.5, -0.418688, -0.081312],
    ]
)
YCBCR_TO_RGB = np.linalg.inv(RGB_TO_YCBCR)


@dataclass
class RgbImage:
    """8-bit RGB image; data is (height, width, 3) uint8, row-major."""

    width: int
    height: int
    data: np.ndarray

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ShapeMismatch("image dimensions must be at least 1x1")
        self.data = np.ascontiguousarray(self.data, dtype=np.uint8)
        if self.data.shape != (self.height, self.width, 3):
            raise ShapeMismatch(
                f"expected data shape {(self.height, self.width, 3)}, got {self.data.shape}"
            )


@dataclass
class PlanarImage:
    """Planar YCbCr image: y in [0,1], cb and cr in [-0.5, 0.5], float64 planes."""

    width: int
    height: int
    y: np.ndarray
    cb: np.ndarray
    cr: np.ndarray

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ShapeMismatch("image dimensions must be at least 1x1")
        for name in ("y", "cb", "cr"):
            plane = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            if plane.shape != (self.height, self.width):
                raise ShapeMismatch(
                    f"plane {name}: expected {(self.height, self.width)}, got {plane.shape}"
                )
            setattr(self, name, plane)

    @property
    def chroma(self):
        """Chroma planes stacked as (2, height, width): index 0 cb, 1 cr."""
        return np.stack([self.cb, self.cr])


def _format_for_path(path, format=None):
    if format is not None:
        return format
    ext = os.path.splitext(str(path))[1].lower()
    if ext == ".png":
        return "png"
    if ext in (".ppm", ".pgm"):
        return "ppm"
    raise MalformedImage(f"cannot infer image format from path {path!r}")


def _read_png(path):
    with open(path, "rb") as fh:
        header = fh.read(26)
    if len(header) < 26 or header[:8] != b"\x89PNG\r\n\x1a\n":
        raise MalformedImage(f"{path}: not a PNG file")
    bit_depth = header[24]
    color_type = header[25]
    if bit_depth != 8:
        raise UnsupportedBitDepth(f"{path}: PNG bit depth {bit_depth}, only 8 supported")
    if color_type not in (0, 2):
        raise MalformedImage(
            f"{path}: PNG color type {color_type}, only grayscale (0) and RGB (2) supported"
        )
    try:
        with Image.open(path) as img:
            img.load()
            arr = np.asarray(img, dtype=np.uint8)
    except UnsupportedBitDepth:
        raise
    except Exception as exc:
        raise MalformedImage(f"{path}: {exc}") from exc
    if arr.ndim == 2:
        arr = np.repeat(arr[:, :, None], 3, axis=2)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise MalformedImage(f"{path}: unexpected PNG layout {arr.shape}")
    return arr


def _read_pnm_token(fh, path):
    # Tokens are separated by whitespace; '#' starts a comment to end of line.
    token = b""
    while True:
        c = fh.read(1)
        if not c:
            if token:
                return token
            raise MalformedImage(f"{path}: truncated header")
        if c == b"#":
            while c and c != b"\n":
                c = fh.read(1)
            continue
        if c.isspace():
            if token:
                return token
            continue
        token += c


def _read_ppm(path):
    with open(path, "rb") as fh:
        magic = fh.read(2)
        if magic not in (b"P6", b"P5"):
            raise MalformedImage(f"{path}: not a binary PPM/PGM file")
        try:
            width = int(_read_pnm_token(fh, path))
            height = int(_read_pnm_token(fh, path))
            maxval = int(_read_pnm_token(fh, path))
        except ValueError as exc:
            raise MalformedImage(f"{path}: bad header field") from exc
        if width < 1 or height < 1:
            raise MalformedImage(f"{path}: bad dimensions {width}x{height}")
        if maxval != 255:
            raise UnsupportedBitDepth(f"{path}: maxval {maxval}, only 255 supported")
        channels = 3 if magic == b"P6" else 1
        expected = width * height * channels
        payload = fh.read(expected)
    if len(payload) != expected:
        raise MalformedImage(f"{path}: expected {expected} pixel bytes, got {len(payload)}")
    arr = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, channels)
    if channels == 1:
        arr = np.repeat(arr, 3, axis=2)
    return np.ascontiguousarray(arr)


def read_image(path, format=None):
    """Read an 8-bit PNG or binary PPM/PGM into an RgbImage (grayscale expands to RGB)."""
    fmt = _format_for_path(path, format)
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    if fmt == "png":
        arr = _read_png(path)
    elif fmt == "ppm":
        arr = _read_ppm(path)
    else:
        raise MalformedImage(f"unknown format {fmt!r}")
    return RgbImage(width=arr.shape[1], height=arr.shape[0], data=arr)


def write_image(img, path, format=None):
    """Write an RgbImage as PNG or binary PPM. Raises OSError on I/O failure."""
    fmt = _format_for_path(path, format)
    if fmt == "png":
        Image.fromarray(img.data, mode="RGB").save(path, format="PNG")
    elif fmt == "ppm":
        with open(path, "wb") as fh:
            fh.write(b"P6\n%d %d\n255\n" % (img.width, img.height))
            fh.write(img.data.tobytes())
    else:
        raise MalformedImage(f"unknown format {fmt!r}")


def rgb_to_ycbcr(img):
    """Full-range BT.601 conversion; gray pixels map to exactly zero chroma.

    The chroma rows of the matrix sum to zero, so they are evaluated in the
    equivalent difference form over (r-g) and (b-g); gray inputs then yield
    bit-exact zero chroma instead of a rounding residue.
    """
    rgb = img.data.astype(np.float64) / 255.0
    r, g, b = rgb[:, :, 0], rgb[:, :, 1], rgb[:, :, 2]
    y = np.clip(0.299 * r + 0.587 * g + 0.114 * b, 0.0, 1.0)
    cb = np.clip(-0.168736 * (r - g) + 0.5 * (b - g), -0.5, 0.5)
    cr = np.clip(0.5 * (r - g) - 0.081312 * (b - g), -0.5, 0.5)
    return PlanarImage(width=img.width, height=img.height, y=y, cb=cb, cr=cr)


def round_half_away(values):
    """Round half away from zero (fixed convention for reproducibility)."""
    return np.sign(values) * np.floor(np.abs(values) + 0.5)


def ycbcr_to_rgb(img):
    """Inverse BT.601, scaled to [0, 255], rounded half away from zero, clamped."""
    planes = np.stack([img.y, img.cb, img.cr])
    rgb = np.einsum("kc,chw->hwk", YCBCR_TO_RGB, planes)
    rgb = round_half_away(rgb * 255.0)
    rgb = np.clip(rgb, 0.0, 255.0).astype(np.uint8)
    return RgbImage(width=img.width, height=img.height, data=rgb)


def quantize_gray(y):
    """Snap a luma plane to the 8-bit grid (k/255 values).

    The decoder receives the grayscale plane as an 8-bit file, so the encoder
    must run the network on the identical quantized plane.
    """
    return round_half_away(np.clip(y, 0.0, 1.0) * 255.0) / 255.0


def read_gray(path, format=None):
    """Read a file as a luma plane on the 8-bit grid.

    Grayscale inputs are taken verbatim (value/255); RGB inputs are converted
    via BT.601 and re-quantized to the 8-bit grid.
    """
    img = read_image(path, format)
    arr = img.data
    if np.array_equal(arr[:, :, 0], arr[:, :, 1]) and np.array_equal(arr[:, :, 0], arr[:, :, 2]):
        return arr[:, :, 0].astype(np.float64) / 255.0
    return quantize_gray(rgb_to_ycbcr(img).y)


def write_gray(y, path, format=None):
    """Write a luma plane as an 8-bit grayscale PNG/PGM."""
    data = round_half_away(np.clip(y, 0.0, 1.0) * 255.0).astype(np.uint8)
    fmt = _format_for_path(path, format)
    if fmt == "png":
        Image.fromarray(data, mode="L").save(path, format="PNG")
    elif fmt == "ppm":
        with open(path, "wb") as fh:
            fh.write(b"P5\n%d %d\n255\n" % (data.shape[1], data.shape[0]))
            fh.write(data.tobytes())
    else:
        raise MalformedImage(f"unknown format {fmt!r}")


def fnv1a64(data):
    """FNV-1a 64-bit hash. Every byte feeds a bijective round, so any change
    to the input (including a single byte) changes the digest."""
    h = 0xCBF29CE484222325
    for b in data:
        h ^= b
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def pack_u64(value):
    return struct.pack("<Q", value)
