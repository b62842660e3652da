"""Quality metrics (chroma MSE, RGB PSNR, MS-SSIM) and rate-distortion sweeps.

Chroma MSE is reported in 8-bit units squared (normalized squared error
times 255^2). PSNR of identical images is reported with a 100 dB sentinel.
MS-SSIM runs on the luma plane at up to three dyadic scales, with the
standard five-scale weights renormalized to the scales actually used; the
full per-scale SSIM (luminance and contrast-structure) enters the product at
every scale.
"""

import math
from dataclasses import dataclass

import numpy as np

from chromacodec.errors import ImageTooSmall, ShapeMismatch

PSNR_IDENTICAL_DB = 100.0

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = (0.01 * 255) ** 2
SSIM_C2 = (0.03 * 255) ** 2
MS_SSIM_BASE_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)
MS_SSIM_MAX_SCALES = 3


def chroma_mse(a, b):
    """Mean squared chroma error over both channels, in 8-bit units squared."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatch(f"{a.shape} vs {b.shape}")
    diff = a - b
    return float((diff * diff).mean() * 255.0**2)


def rgb_psnr(a, b):
    """10*log10(255^2 / MSE) over all three channels; identical -> 100 dB."""
    if a.data.shape != b.data.shape:
        raise ShapeMismatch(f"{a.data.shape} vs {b.data.shape}")
    diff = a.data.astype(np.float64) - b.data.astype(np.float64)
    mse = float((diff * diff).mean())
    if mse == 0.0:
        return PSNR_IDENTICAL_DB
    return 10.0 * math.log10(255.0**2 / mse)


def _gaussian_window(size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    half = (size - 1) / 2.0
    x = np.arange(size) - half
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def _filter_valid(plane, window):
    """Separable valid-mode filtering with the 1-d window along both axes."""
    size = len(window)
    rows = np.lib.stride_tricks.sliding_window_view(plane, size, axis=0) @ window
    return np.lib.stride_tricks.sliding_window_view(rows, size, axis=1) @ window


def _ssim_mean(a, b, window):
    mu_a = _filter_valid(a, window)
    mu_b = _filter_valid(b, window)
    var_a = _filter_valid(a * a, window) - mu_a * mu_a
    var_b = _filter_valid(b * b, window) - mu_b * mu_b
    cov = _filter_valid(a * b, window) - mu_a * mu_b
    num = (2 * mu_a * mu_b + SSIM_C1) * (2 * cov + SSIM_C2)
    den = (mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2)
    return float((num / den).mean())


def _downsample2(plane):
    h, w = plane.shape
    h2, w2 = h - h % 2, w - w % 2
    cropped = plane[:h2, :w2]
    return cropped.reshape(h2 // 2, 2, w2 // 2, 2).mean(axis=(1, 3))


def _luma_plane(img):
    rgb = img.data.astype(np.float64)
    return 0.299 * rgb[:, :, 0] + 0.587 * rgb[:, :, 1] + 0.114 * rgb[:, :, 2]


def ms_ssim(a, b, full_rgb=False):
    """Multi-scale SSIM on the luma plane (or averaged over RGB channels).

    Uses as many dyadic scales as the image supports, up to three; weights
    are the standard five-scale values renormalized to sum to one.
    """
    if a.data.shape != b.data.shape:
        raise ShapeMismatch(f"{a.data.shape} vs {b.data.shape}")
    min_dim = min(a.height, a.width)
    n_scales = 0
    while n_scales < MS_SSIM_MAX_SCALES and min_dim // (1 << n_scales) >= SSIM_WINDOW:
        n_scales += 1
    if n_scales == 0:
        raise ImageTooSmall(
            f"image {a.height}x{a.width} smaller than the {SSIM_WINDOW}px SSIM window"
        )
    weights = np.array(MS_SSIM_BASE_WEIGHTS[:n_scales])
    weights /= weights.sum()
    window = _gaussian_window()

    if full_rgb:
        channels = [
            (a.data[:, :, c].astype(np.float64), b.data[:, :, c].astype(np.float64))
            for c in range(3)
        ]
    else:
        channels = [(_luma_plane(a), _luma_plane(b))]

    scores = []
    for pa, pb in channels:
        value = 1.0
        for level in range(n_scales):
            value *= max(_ssim_mean(pa, pb, window), 0.0) ** weights[level]
            if level + 1 < n_scales:
                pa = _downsample2(pa)
                pb = _downsample2(pb)
        scores.append(value)
    return float(np.mean(scores))


@dataclass
class RdPoint:
    image_id: str
    budget_bytes: int
    actual_bytes: int
    method: str
    psnr_db: float
    chroma_mse: float
    ms_ssim: float


def rd_sweep(corpus, weights, budgets, include_zero_cost=None):
    """Encode every image at every budget and tabulate rate-distortion points.

    A budget of 0 means the zero-cost path (no container, predictor-selected
    branches). Candidate strategies are evaluated once per image and reused
    across budgets. Per-budget corpus means use the per-image PSNR average.
    """
    from chromacodec.codec import evaluate_candidates, select_candidate, zero_cost_colorize
    from chromacodec.pixelio import PlanarImage, rgb_to_ycbcr, ycbcr_to_rgb

    budgets = sorted(int(b) for b in budgets)
    points = []
    per_budget = {b: [] for b in budgets}
    for i, img in enumerate(corpus):
        image_id = img.name or f"img_{i:05d}"
        h, w = img.gray.shape
        reference = ycbcr_to_rgb(
            PlanarImage(width=w, height=h, y=img.gray, cb=img.chroma[0], cr=img.chroma[1])
        )
        reports = None
        for budget in budgets:
            if budget == 0:
                rgb = zero_cost_colorize(img.gray, weights)
                point = RdPoint(
                    image_id=image_id,
                    budget_bytes=0,
                    actual_bytes=0,
                    method="zero-cost",
                    psnr_db=rgb_psnr(rgb, reference),
                    chroma_mse=chroma_mse(rgb_to_ycbcr(rgb).chroma, img.chroma),
                    ms_ssim=ms_ssim(rgb, reference),
                )
            else:
                if reports is None:
                    reports = evaluate_candidates(
                        img.gray, img.chroma, weights, reference_rgb=reference
                    )
                sel = select_candidate(reports, budget_bytes=budget)
                rgb = ycbcr_to_rgb(
                    PlanarImage(
                        width=w,
                        height=h,
                        y=img.gray,
                        cb=sel.reconstruction[0],
                        cr=sel.reconstruction[1],
                    )
                )
                point = RdPoint(
                    image_id=image_id,
                    budget_bytes=budget,
                    actual_bytes=sel.size_bytes,
                    method=sel.label,
                    psnr_db=sel.psnr_db,
                    chroma_mse=sel.chroma_mse,
                    ms_ssim=ms_ssim(rgb, reference),
                )
            points.append(point)
            per_budget[budget].append(point)

    for budget in budgets:
        rows = per_budget[budget]
        points.append(
            RdPoint(
                image_id="mean",
                budget_bytes=budget,
                actual_bytes=int(round(np.mean([p.actual_bytes for p in rows]))),
                method="-",
                psnr_db=float(np.mean([p.psnr_db for p in rows])),
                chroma_mse=float(np.mean([p.chroma_mse for p in rows])),
                ms_ssim=float(np.mean([p.ms_ssim for p in rows])),
            )
        )
    return points


def write_rd_csv(points, path):
    lines = [
        "# corpus scores are per-image means (PSNR averaged per image, not pooled)",
        "image_id,budget_bytes,actual_bytes,method,psnr_db,chroma_mse,ms_ssim",
    ]
    for p in points:
        lines.append(
            f"{p.image_id},{p.budget_bytes},{p.actual_bytes},{p.method},"
            f"{p.psnr_db!r},{p.chroma_mse!r},{p.ms_ssim!r}"
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
