"""Branch selection against ground truth and the global chroma correction.

The "oracle" picks, per pixel or per region, the branch whose (cb, cr) pair
is jointly closest to the ground truth; its index map is what the codec
stores. The global correction is an independent per-channel least-squares
affine fit between the assembled reconstruction and the truth, stored as
four scalars.
"""

from dataclasses import dataclass

import numpy as np

from chromacodec.errors import EmptyRegion, IndexOutOfRange, ShapeMismatch

VARIANCE_GUARD = 1e-12


@dataclass
class BranchMap:
    """Per-pixel branch indices in [0, K)."""

    width: int
    height: int
    indices: np.ndarray  # (H, W) integer
    k: int

    def __post_init__(self):
        self.indices = np.ascontiguousarray(self.indices)
        if self.indices.shape != (self.height, self.width):
            raise ShapeMismatch(
                f"indices shape {self.indices.shape} != {(self.height, self.width)}"
            )
        if self.indices.size and (self.indices.min() < 0 or self.indices.max() >= self.k):
            raise IndexOutOfRange(f"branch indices must lie in [0, {self.k})")


@dataclass(frozen=True)
class CorrectionParams:
    scale_cb: float
    offset_cb: float
    scale_cr: float
    offset_cr: float

    @classmethod
    def identity(cls):
        return cls(1.0, 0.0, 1.0, 0.0)


def _check_chroma(planes, name="chroma"):
    planes = np.asarray(planes, dtype=np.float64)
    if planes.ndim != 3 or planes.shape[0] != 2:
        raise ShapeMismatch(f"{name} must be shaped (2, H, W), got {planes.shape}")
    return planes


def _joint_sq_error(hyp, truth):
    """(K, H, W) joint squared chroma error of each branch."""
    truth = _check_chroma(truth)
    if hyp.chroma.shape[1:] != truth.shape:
        raise ShapeMismatch(
            f"hypotheses {hyp.chroma.shape[1:]} vs truth {truth.shape}"
        )
    err = hyp.chroma - truth[None]
    return err[:, 0] ** 2 + err[:, 1] ** 2


def pixel_oracle(hyp, truth):
    """Best branch per pixel, joint over (cb, cr); ties go to the lowest index."""
    sq = _joint_sq_error(hyp, truth)
    idx = np.argmin(sq, axis=0).astype(np.int32)
    h, w = idx.shape
    return BranchMap(width=w, height=h, indices=idx, k=hyp.k)


def region_oracle(hyp, truth, regions):
    """Best branch per region (lowest total joint squared error).

    Returns (per-region index array of length R, materialized BranchMap).
    """
    sq = _joint_sq_error(hyp, truth)
    if regions.labels.shape != sq.shape[1:]:
        raise ShapeMismatch(
            f"region map {regions.labels.shape} vs image {sq.shape[1:]}"
        )
    labels = regions.labels.ravel()
    r = regions.region_count
    counts = np.bincount(labels, minlength=r)
    if np.any(counts == 0):
        raise EmptyRegion("region map contains a label with no pixels")
    totals = np.stack(
        [np.bincount(labels, weights=sq[j].ravel(), minlength=r) for j in range(hyp.k)]
    )
    region_idx = np.argmin(totals, axis=0).astype(np.int32)
    dense = region_idx[regions.labels]
    h, w = dense.shape
    return region_idx, BranchMap(width=w, height=h, indices=dense, k=hyp.k)


def assemble_chroma(hyp, bmap):
    """Select each pixel's chroma pair from the branch named by the map."""
    if bmap.indices.shape != hyp.chroma.shape[2:]:
        raise ShapeMismatch(
            f"branch map {bmap.indices.shape} vs hypotheses {hyp.chroma.shape[2:]}"
        )
    if bmap.indices.size and bmap.indices.max() >= hyp.k:
        raise IndexOutOfRange("branch map index exceeds hypothesis count")
    sel = bmap.indices[None, None].astype(np.intp)
    return np.take_along_axis(hyp.chroma, sel, axis=0)[0]


def _fit_channel(pred, truth):
    mp = pred.mean()
    mt = truth.mean()
    var = (pred * pred).mean() - mp * mp
    if var < VARIANCE_GUARD:
        return 1.0, mt - mp
    cov = (pred * truth).mean() - mp * mt
    scale = cov / var
    return scale, mt - scale * mp


def fit_correction(pred, truth):
    """Per-channel least squares of truth ~ scale*pred + offset.

    Degenerate (near-constant) predictions fall back to scale 1 with a pure
    mean shift, keeping the transform bounded.
    """
    pred = _check_chroma(pred, "pred")
    truth = _check_chroma(truth, "truth")
    if pred.shape != truth.shape:
        raise ShapeMismatch(f"pred {pred.shape} vs truth {truth.shape}")
    scale_cb, offset_cb = _fit_channel(pred[0], truth[0])
    scale_cr, offset_cr = _fit_channel(pred[1], truth[1])
    return CorrectionParams(scale_cb, offset_cb, scale_cr, offset_cr)


def apply_correction(pred, params):
    """scale*value + offset per channel, clamped to the chroma range."""
    pred = _check_chroma(pred, "pred")
    cb = np.clip(params.scale_cb * pred[0] + params.offset_cb, -0.5, 0.5)
    cr = np.clip(params.scale_cr * pred[1] + params.offset_cr, -0.5, 0.5)
    return np.stack([cb, cr])
