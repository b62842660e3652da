"""Deterministic partitioning of the grayscale plane into regions.

The decoder re-derives the region map from the shared grayscale image, so
every operation here must be bit-reproducible: iteration counts are fixed,
all ties are broken explicitly, and floating-point accumulation follows a
fixed order.
"""

from collections import deque
from dataclasses import dataclass

import numpy as np

from chromacodec.errors import ImageTooSmall, InvalidParams, ShapeMismatch

SLIC_ITERATIONS = 10
SLIC_INTENSITY_SCALE = 100.0  # LAB-style lightness range
QUICKSHIFT_INTENSITY_SCALE = 255.0


@dataclass
class RegionMap:
    """Dense labels 0..R-1 in first-occurrence raster order."""

    width: int
    height: int
    labels: np.ndarray  # (H, W) int32
    region_count: int

    def __post_init__(self):
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int32)
        if self.labels.shape != (self.height, self.width):
            raise ShapeMismatch(
                f"labels shape {self.labels.shape} != {(self.height, self.width)}"
            )


@dataclass(frozen=True)
class GridParams:
    cell_size: int


@dataclass(frozen=True)
class SlicParams:
    region_size: int
    compactness: float
    iterations: int = SLIC_ITERATIONS


@dataclass(frozen=True)
class QuickShiftParams:
    ratio: float
    kernel_size: float
    max_dist: float


def canonicalize_labels(raw):
    """Relabel to first-occurrence raster order and compact to 0..R-1."""
    raw = np.asarray(raw)
    flat = raw.ravel()
    uniques, first_pos, inverse = np.unique(flat, return_index=True, return_inverse=True)
    rank = np.empty(len(uniques), dtype=np.int32)
    rank[np.argsort(first_pos, kind="stable")] = np.arange(len(uniques), dtype=np.int32)
    labels = rank[inverse].reshape(raw.shape)
    h, w = raw.shape
    return RegionMap(width=w, height=h, labels=labels, region_count=len(uniques))


def grid_partition(width, height, params):
    """Fixed-size square cells anchored at (0, 0); ragged edge cells allowed."""
    cell = params.cell_size
    if cell < 1:
        raise InvalidParams("cell_size must be >= 1")
    if cell > max(width, height):
        raise InvalidParams(f"cell_size {cell} exceeds image extent {max(width, height)}")
    nx = (width + cell - 1) // cell
    ys, xs = np.indices((height, width))
    labels = (ys // cell) * nx + (xs // cell)
    return RegionMap(width=width, height=height, labels=labels.astype(np.int32),
                     region_count=int(labels.max()) + 1)


def _validate_gray(gray):
    gray = np.asarray(gray, dtype=np.float64)
    if gray.ndim != 2:
        raise ShapeMismatch(f"gray plane must be 2-d, got {gray.shape}")
    return gray


def slic_segment(gray, params):
    """Grayscale SLIC with fixed iteration count and explicit tie rules.

    Feature per pixel is (intensity scaled to [0,100], x, y); the distance is
    sqrt(dI^2 + (m/S)^2 (dx^2 + dy^2)). Centers start on an S-spaced grid,
    run exactly `iterations` assign/update rounds with a (2S+1)^2 search
    window, then components smaller than S^2/4 merge into the 4-adjacent
    region with the nearest mean intensity.
    """
    gray = _validate_gray(gray)
    h, w = gray.shape
    s = params.region_size
    if s < 2:
        raise InvalidParams("region_size must be >= 2")
    if params.compactness <= 0:
        raise InvalidParams("compactness must be > 0")
    if h < s or w < s:
        raise ImageTooSmall(f"image {h}x{w} smaller than region size {s}")

    intensity = gray * SLIC_INTENSITY_SCALE
    cys = np.arange(s // 2, h, s)
    cxs = np.arange(s // 2, w, s)
    centers_y, centers_x = [], []
    for cy in cys:
        for cx in cxs:
            centers_y.append(float(cy))
            centers_x.append(float(cx))
    cy = np.array(centers_y)
    cx = np.array(centers_x)
    ci = intensity[cy.astype(int), cx.astype(int)].astype(np.float64)
    n_centers = len(cy)
    spatial_w = (params.compactness / s) ** 2

    labels = np.full((h, w), -1, dtype=np.int32)
    ys_full, xs_full = np.indices((h, w))
    for _ in range(params.iterations):
        best = np.full((h, w), np.inf)
        for c in range(n_centers):
            y0 = max(0, int(np.ceil(cy[c] - s)))
            y1 = min(h, int(np.floor(cy[c] + s)) + 1)
            x0 = max(0, int(np.ceil(cx[c] - s)))
            x1 = min(w, int(np.floor(cx[c] + s)) + 1)
            if y0 >= y1 or x0 >= x1:
                continue
            di = intensity[y0:y1, x0:x1] - ci[c]
            dy = ys_full[y0:y1, x0:x1] - cy[c]
            dx = xs_full[y0:y1, x0:x1] - cx[c]
            d = np.sqrt(di * di + spatial_w * (dy * dy + dx * dx))
            win_best = best[y0:y1, x0:x1]
            win_lab = labels[y0:y1, x0:x1]
            upd = d < win_best  # strict: earlier (lower-index) center wins ties
            win_best[upd] = d[upd]
            win_lab[upd] = c
        flat = labels.ravel()
        counts = np.bincount(flat, minlength=n_centers)
        sums_i = np.bincount(flat, weights=intensity.ravel(), minlength=n_centers)
        sums_y = np.bincount(flat, weights=ys_full.ravel(), minlength=n_centers)
        sums_x = np.bincount(flat, weights=xs_full.ravel(), minlength=n_centers)
        nonzero = counts > 0
        ci[nonzero] = sums_i[nonzero] / counts[nonzero]
        cy[nonzero] = sums_y[nonzero] / counts[nonzero]
        cx[nonzero] = sums_x[nonzero] / counts[nonzero]

    merged = _merge_small_components(labels, intensity, (s * s) / 4.0)
    return canonicalize_labels(merged)


def _connected_components(labels):
    """4-connected components, ids assigned in raster order of first pixel."""
    h, w = labels.shape
    comp = np.full((h, w), -1, dtype=np.int32)
    n = 0
    for sy in range(h):
        for sx in range(w):
            if comp[sy, sx] >= 0:
                continue
            val = labels[sy, sx]
            queue = deque([(sy, sx)])
            comp[sy, sx] = n
            while queue:
                y, x = queue.popleft()
                for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
                    if 0 <= ny < h and 0 <= nx < w and comp[ny, nx] < 0 and labels[ny, nx] == val:
                        comp[ny, nx] = n
                        queue.append((ny, nx))
            n += 1
    return comp, n


def _merge_small_components(labels, intensity, min_size):
    """Merge 4-connected components below min_size into the adjacent component
    with the nearest mean intensity (ties toward the lowest component id)."""
    comp, n = _connected_components(labels)
    flat = comp.ravel()
    sizes = np.bincount(flat, minlength=n).astype(np.int64)
    sums = np.bincount(flat, weights=intensity.ravel(), minlength=n)
    alive = [True] * n

    def neighbors_of(cid):
        mask = comp == cid
        neigh = set()
        up = np.zeros_like(mask)
        up[1:] = mask[:-1]
        down = np.zeros_like(mask)
        down[:-1] = mask[1:]
        left = np.zeros_like(mask)
        left[:, 1:] = mask[:, :-1]
        right = np.zeros_like(mask)
        right[:, :-1] = mask[:, 1:]
        ring = (up | down | left | right) & ~mask
        neigh.update(int(v) for v in np.unique(comp[ring]))
        return sorted(neigh)

    while True:
        target = None
        for cid in range(n):
            if alive[cid] and sizes[cid] < min_size:
                neigh = neighbors_of(cid)
                if neigh:
                    target = (cid, neigh)
                    break
        if target is None:
            break
        cid, neigh = target
        mean = sums[cid] / sizes[cid]
        best = None
        for other in neigh:
            gap = abs(sums[other] / sizes[other] - mean)
            if best is None or gap < best[0]:
                best = (gap, other)
        dest = best[1]
        comp[comp == cid] = dest
        sizes[dest] += sizes[cid]
        sums[dest] += sums[cid]
        sizes[cid] = 0
        alive[cid] = False
    return comp


def quickshift_segment(gray, params):
    """Mode-seeking segmentation on (ratio*intensity, x, y) features.

    Density is a Gaussian kernel sum (bandwidth kernel_size) over a window of
    radius ceil(3*kernel_size). Each pixel links to its feature-space nearest
    neighbor with strictly higher density within max_dist; density ties order
    by raster position (earlier counts as higher), distance ties pick the
    lower raster index. Tree roots define the regions.
    """
    gray = _validate_gray(gray)
    if params.ratio <= 0 or params.ratio > 1:
        raise InvalidParams("ratio must be in (0, 1]")
    if params.kernel_size <= 0:
        raise InvalidParams("kernel_size must be > 0")
    if params.max_dist <= 0:
        raise InvalidParams("max_dist must be > 0")
    h, w = gray.shape
    feat = params.ratio * gray * QUICKSHIFT_INTENSITY_SCALE

    inv_two_sq = 1.0 / (2.0 * params.kernel_size * params.kernel_size)
    r_density = int(np.ceil(3.0 * params.kernel_size))
    density = np.zeros((h, w))
    for dy in range(-r_density, r_density + 1):
        for dx in range(-r_density, r_density + 1):
            sy0, sy1 = max(0, dy), min(h, h + dy)
            sx0, sx1 = max(0, dx), min(w, w + dx)
            if sy0 >= sy1 or sx0 >= sx1:
                continue
            df = feat[sy0:sy1, sx0:sx1] - feat[sy0 - dy:sy1 - dy, sx0 - dx:sx1 - dx]
            dist_sq = df * df + float(dy * dy + dx * dx)
            density[sy0:sy1, sx0:sx1] += np.exp(-dist_sq * inv_two_sq)

    # A link to (y+dy, x+dx) needs feature distance <= max_dist, and the
    # spatial part alone bounds it, so the search radius is ceil(max_dist).
    r_link = int(np.ceil(params.max_dist))
    best = np.full((h, w), np.inf)
    parent = np.full(h * w, -1, dtype=np.int64)
    parent2d = parent.reshape(h, w)
    lin = np.arange(h * w, dtype=np.int64).reshape(h, w)
    for dy in range(-r_link, r_link + 1):
        for dx in range(-r_link, r_link + 1):
            if dy == 0 and dx == 0:
                continue
            sy0, sy1 = max(0, -dy), min(h, h - dy)
            sx0, sx1 = max(0, -dx), min(w, w - dx)
            if sy0 >= sy1 or sx0 >= sx1:
                continue
            here = (slice(sy0, sy1), slice(sx0, sx1))
            there = (slice(sy0 + dy, sy1 + dy), slice(sx0 + dx, sx1 + dx))
            df = feat[here] - feat[there]
            d = np.sqrt(df * df + float(dy * dy + dx * dx))
            earlier = dy < 0 or (dy == 0 and dx < 0)  # q before p in raster order
            if earlier:
                higher = density[there] >= density[here]
            else:
                higher = density[there] > density[here]
            # offsets iterate in raster order of q, so strict < keeps the
            # lowest-raster candidate on distance ties
            upd = higher & (d <= params.max_dist) & (d < best[here])
            best[here][upd] = d[upd]
            parent2d[here][upd] = lin[there][upd]

    labels = _resolve_roots(parent).reshape(h, w)
    return canonicalize_labels(labels)


def _resolve_roots(parent):
    """Label every node by the root of its parent chain."""
    n = len(parent)
    root = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        if root[i] >= 0:
            continue
        chain = [i]
        j = i
        while parent[j] >= 0 and root[j] < 0:
            j = parent[j]
            chain.append(j)
        final = root[j] if root[j] >= 0 else j
        for node in chain:
            root[node] = final
    return root
