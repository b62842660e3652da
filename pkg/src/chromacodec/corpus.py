"""Synthetic multimodal-color corpus for desk-scale experiments.

Images are patchworks of axis-aligned rectangles. Every pixel belongs to a
shape class; each class has a fixed luma level (so class identity is
recoverable from the grayscale plane when there is more than one class) and
a palette of chroma modes sampled per shape. With several modes per class
the mapping gray -> chroma is genuinely ambiguous, which is exactly the
regime the multi-hypothesis network is built for.
"""

import json
import os
from dataclasses import dataclass, field

import numpy as np

from chromacodec.errors import InvalidSpec
from chromacodec.pixelio import (
    PlanarImage,
    read_image,
    rgb_to_ycbcr,
    quantize_gray,
    write_image,
    ycbcr_to_rgb,
)

MANIFEST_NAME = "manifest.tsv"

MIN_SHAPES = 3
MAX_SHAPES = 6


@dataclass(frozen=True)
class CorpusSpec:
    image_count: int
    width: int
    height: int
    shape_classes: int
    palette: tuple  # per class: tuple of (cb, cr, probability)
    noise_std: float
    seed: int

    def validate(self):
        if self.image_count < 1:
            raise InvalidSpec("image_count must be >= 1")
        if self.width < 4 or self.height < 4:
            raise InvalidSpec("images must be at least 4x4")
        if self.shape_classes < 1:
            raise InvalidSpec("shape_classes must be >= 1")
        if len(self.palette) != self.shape_classes:
            raise InvalidSpec("palette must list one mode set per class")
        for modes in self.palette:
            if not modes:
                raise InvalidSpec("every class needs at least one chroma mode")
            total = 0.0
            for cb, cr, prob in modes:
                if not (-0.5 <= cb <= 0.5 and -0.5 <= cr <= 0.5):
                    raise InvalidSpec(f"mode ({cb}, {cr}) outside chroma range")
                if prob < 0:
                    raise InvalidSpec("mode probabilities must be non-negative")
                total += prob
            if abs(total - 1.0) > 1e-9:
                raise InvalidSpec(f"mode probabilities sum to {total}, expected 1")
        if self.noise_std < 0:
            raise InvalidSpec("noise_std must be >= 0")

    def class_luma(self, cls):
        """Distinct 8-bit-exact luma level per class."""
        if self.shape_classes == 1:
            return 128.0 / 255.0
        span = 0.2 + 0.6 * cls / (self.shape_classes - 1)
        return round(span * 255.0) / 255.0

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            raw = json.load(fh)
        try:
            spec = cls(
                image_count=int(raw["image_count"]),
                width=int(raw["width"]),
                height=int(raw["height"]),
                shape_classes=int(raw["shape_classes"]),
                palette=tuple(
                    tuple((float(m[0]), float(m[1]), float(m[2])) for m in modes)
                    for modes in raw["palette"]
                ),
                noise_std=float(raw["noise_std"]),
                seed=int(raw["seed"]),
            )
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise InvalidSpec(f"{path}: {exc}") from exc
        spec.validate()
        return spec


@dataclass
class CorpusImage:
    """A training sample: 8-bit-grid luma plane plus float chroma planes."""

    gray: np.ndarray  # (H, W)
    chroma: np.ndarray  # (2, H, W)
    layout: list = field(default_factory=list)  # (class, mode, x0, y0, w, h)
    name: str = ""

    @property
    def planar(self):
        h, w = self.gray.shape
        return PlanarImage(width=w, height=h, y=self.gray, cb=self.chroma[0], cr=self.chroma[1])


def _image_rng(seed, index):
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))


def _pick_mode(rng, modes):
    probs = np.array([m[2] for m in modes])
    return int(rng.choice(len(modes), p=probs))


def generate_corpus(spec):
    """Render the corpus deterministically; same spec -> byte-identical images."""
    spec.validate()
    images = []
    for idx in range(spec.image_count):
        rng = _image_rng(spec.seed, idx)
        gray = np.empty((spec.height, spec.width))
        chroma = np.empty((2, spec.height, spec.width))
        layout = []

        def paint(cls, x0, y0, w, h):
            mode = _pick_mode(rng, spec.palette[cls])
            cb, cr, _ = spec.palette[cls][mode]
            gray[y0:y0 + h, x0:x0 + w] = spec.class_luma(cls)
            chroma[0, y0:y0 + h, x0:x0 + w] = cb
            chroma[1, y0:y0 + h, x0:x0 + w] = cr
            layout.append((cls, mode, x0, y0, w, h))

        paint(0, 0, 0, spec.width, spec.height)  # background is class 0
        n_shapes = int(rng.integers(MIN_SHAPES, MAX_SHAPES + 1))
        for _ in range(n_shapes):
            cls = int(rng.integers(0, spec.shape_classes))
            w = int(rng.integers(spec.width // 4, spec.width // 2 + 1))
            h = int(rng.integers(spec.height // 4, spec.height // 2 + 1))
            x0 = int(rng.integers(0, spec.width - w + 1))
            y0 = int(rng.integers(0, spec.height - h + 1))
            paint(cls, x0, y0, w, h)

        if spec.noise_std > 0:
            chroma += rng.normal(0.0, spec.noise_std, chroma.shape)
            np.clip(chroma, -0.5, 0.5, out=chroma)
        images.append(
            CorpusImage(gray=gray, chroma=chroma, layout=layout, name=f"img_{idx:05d}.png")
        )
    return images


def save_corpus(images, directory):
    """Write color PNGs plus a manifest (filename, seed tag, layout per line)."""
    os.makedirs(directory, exist_ok=True)
    lines = []
    for idx, img in enumerate(images):
        name = img.name or f"img_{idx:05d}.png"
        write_image(ycbcr_to_rgb(img.planar), os.path.join(directory, name))
        layout = json.dumps(img.layout, separators=(",", ":"))
        lines.append(f"{name}\t{idx}\t{layout}")
    with open(os.path.join(directory, MANIFEST_NAME), "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_corpus(directory):
    """Load a saved corpus; luma comes back on the exact 8-bit grid."""
    manifest = os.path.join(directory, MANIFEST_NAME)
    with open(manifest) as fh:
        rows = [line.split("\t") for line in fh.read().splitlines() if line]
    images = []
    for row in rows:
        name = row[0]
        planar = rgb_to_ycbcr(read_image(os.path.join(directory, name)))
        layout = json.loads(row[2]) if len(row) > 2 else []
        images.append(
            CorpusImage(
                gray=quantize_gray(planar.y),
                chroma=planar.chroma,
                layout=[tuple(item) for item in layout],
                name=name,
            )
        )
    return images
