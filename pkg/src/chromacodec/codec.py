"""Encode/decode pipelines with strategy search over region methods.

The encoder runs the network once, then scores every candidate strategy
(per-pixel oracle plus grids of region methods): segment, pick the best
branch per region, assemble, fit + quantize the global correction, and
serialize. Selection selects the highest-PSNR candidate within the byte
budget (or the smallest candidate meeting a PSNR target). The decoder
re-derives the same region map from the shared grayscale plane, so its
reconstruction is bit-identical to the one the encoder scored.
"""

import math
from dataclasses import dataclass

import numpy as np

from chromacodec import container as cont
from chromacodec import entropy
from chromacodec.errors import (
    DimensionMismatch,
    ImageTooSmall,
    InvalidParams,
    MalformedBitstream,
    ModelMismatch,
    NoFeasibleCandidate,
    ShapeMismatch,
)
from chromacodec.metrics import chroma_mse, rgb_psnr
from chromacodec.net import forward_hypotheses, forward_predictor
from chromacodec.oracle import (
    BranchMap,
    apply_correction,
    assemble_chroma,
    fit_correction,
    pixel_oracle,
    region_oracle,
)
from chromacodec.pixelio import PlanarImage, ycbcr_to_rgb
from chromacodec.regions import (
    GridParams,
    QuickShiftParams,
    SlicParams,
    grid_partition,
    quickshift_segment,
    slic_segment,
)

# Default strategy grids for the candidate search.
GRID_CELL_SIZES = (4, 8, 16, 32)
SLIC_SETTINGS = tuple(
    (s, m) for s in (8, 16, 32) for m in (1.0, 10.0)
)
QUICKSHIFT_SETTINGS = ((0.5, 2.0, 4.0), (0.5, 4.0, 8.0), (1.0, 4.0, 16.0))


@dataclass
class CandidateReport:
    label: str
    method: int
    params: object
    region_count: int
    payload_bits: int
    size_bytes: int
    psnr_db: float
    chroma_mse: float
    container: bytes
    reconstruction: np.ndarray  # corrected chroma planes (2, H, W)


@dataclass
class EncodeResult:
    container: bytes
    selected: CandidateReport
    candidates: list

    @property
    def psnr_db(self):
        return self.selected.psnr_db


def default_candidates():
    """(label, method, params) in fixed enumeration order; ties in the
    selection break toward the earlier entry."""
    out = [("per-pixel", cont.METHOD_PER_PIXEL, None)]
    for cell in GRID_CELL_SIZES:
        out.append((f"grid[cell={cell}]", cont.METHOD_GRID, GridParams(cell_size=cell)))
    for s, m in SLIC_SETTINGS:
        out.append(
            (f"slic[S={s},m={m:g}]", cont.METHOD_SLIC, SlicParams(region_size=s, compactness=m))
        )
    for ratio, kernel, dist in QUICKSHIFT_SETTINGS:
        out.append(
            (
                f"quickshift[ratio={ratio:g},kernel={kernel:g},max_dist={dist:g}]",
                cont.METHOD_QUICKSHIFT,
                QuickShiftParams(ratio=ratio, kernel_size=kernel, max_dist=dist),
            )
        )
    return out


def segment_for_method(gray, method, params):
    if method == cont.METHOD_GRID:
        h, w = gray.shape
        return grid_partition(w, h, params)
    if method == cont.METHOD_SLIC:
        return slic_segment(gray, params)
    if method == cont.METHOD_QUICKSHIFT:
        return quickshift_segment(gray, params)
    raise InvalidParams(f"method {method} does not define regions")


def _pack_symbols(symbols, k):
    """Pick the smaller of raw fixed-width packing and DPCM+Huffman.

    Returns (packing, huffman_lengths, payload, payload_bits). The huffman
    route is chosen only when strictly smaller, so the payload never exceeds
    the raw ceil(log2 K)-bit bound.
    """
    raw_bits_per = max(0, math.ceil(math.log2(k))) if k > 1 else 0
    raw_payload, raw_bits = entropy.pack_fixed(symbols, raw_bits_per)
    raw_cost = 8 * len(raw_payload)

    mapped = entropy.zigzag(entropy.dpcm_transform(symbols, "forward"))
    freqs = np.bincount(mapped.astype(np.int64))
    table = entropy.build_huffman(freqs)
    huff_payload, huff_bits = entropy.huffman_encode(table, mapped)
    # table costs 1 byte alphabet size + 1 byte per symbol length
    huff_cost = 8 * (1 + table.alphabet_size + len(huff_payload))

    if huff_cost < raw_cost:
        return cont.PACKING_HUFFMAN, table.lengths, huff_payload, huff_bits
    return cont.PACKING_RAW, (), raw_payload, raw_bits


def _reference_rgb(gray, truth):
    h, w = gray.shape
    return ycbcr_to_rgb(PlanarImage(width=w, height=h, y=gray, cb=truth[0], cr=truth[1]))


def _check_planes(gray, truth):
    gray = np.asarray(gray, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if gray.ndim != 2:
        raise ShapeMismatch(f"gray plane must be 2-d, got {gray.shape}")
    if truth.shape != (2,) + gray.shape:
        raise ShapeMismatch(f"truth {truth.shape} vs gray {gray.shape}")
    return gray, truth


def evaluate_candidates(gray, truth, weights, reference_rgb=None, candidates=None):
    """Score every strategy candidate once (the expensive part of encoding)."""
    gray, truth = _check_planes(gray, truth)
    h, w = gray.shape
    hyp = forward_hypotheses(weights, gray)
    model_hash = weights.content_hash()
    if reference_rgb is None:
        reference_rgb = _reference_rgb(gray, truth)
    reports = []
    for label, method, params in candidates or default_candidates():
        try:
            canonical = cont.canonical_method_params(method, params)
            if method == cont.METHOD_PER_PIXEL:
                bmap = pixel_oracle(hyp, truth)
                symbols = bmap.indices.ravel().astype(np.int64)
                region_count = h * w
            else:
                regions = segment_for_method(gray, method, canonical)
                region_idx, bmap = region_oracle(hyp, truth, regions)
                symbols = region_idx.astype(np.int64)
                region_count = regions.region_count
        except (ImageTooSmall, InvalidParams):
            continue
        raw = assemble_chroma(hyp, bmap)
        corr_q = cont.quantize_correction(fit_correction(raw, truth))
        rec = apply_correction(raw, corr_q.dequantize())
        packing, lengths, payload, payload_bits = _pack_symbols(symbols, hyp.k)
        blob = cont.build_container(
            width=w,
            height=h,
            k=hyp.k,
            model_hash=model_hash,
            method=method,
            params=canonical,
            correction_q=corr_q,
            packing=packing,
            symbol_count=len(symbols),
            huffman_lengths=lengths,
            payload=payload,
            payload_bit_length=payload_bits,
        )
        rgb = ycbcr_to_rgb(PlanarImage(width=w, height=h, y=gray, cb=rec[0], cr=rec[1]))
        reports.append(
            CandidateReport(
                label=label,
                method=method,
                params=canonical,
                region_count=region_count,
                payload_bits=payload_bits,
                size_bytes=len(blob),
                psnr_db=rgb_psnr(rgb, reference_rgb),
                chroma_mse=chroma_mse(rec, truth),
                container=blob,
                reconstruction=rec,
            )
        )
    return reports


def select_candidate(reports, budget_bytes=None, min_psnr=None):
    """Highest PSNR within the budget, or smallest size meeting the target."""
    feasible = [
        r
        for r in reports
        if (budget_bytes is None or r.size_bytes <= budget_bytes)
        and (min_psnr is None or r.psnr_db >= min_psnr)
    ]
    if not feasible:
        raise NoFeasibleCandidate(
            f"no candidate satisfies budget={budget_bytes} min_psnr={min_psnr}"
        )
    if budget_bytes is None and min_psnr is not None:
        return min(feasible, key=lambda r: r.size_bytes)  # stable: first on ties
    return max(feasible, key=lambda r: r.psnr_db)  # stable: first on ties


def encode_color(gray, truth, weights, budget_bytes=None, min_psnr=None,
                 reference_rgb=None, candidates=None):
    """Full encode: strategy search + selection. Returns an EncodeResult."""
    reports = evaluate_candidates(
        gray, truth, weights, reference_rgb=reference_rgb, candidates=candidates
    )
    selected = select_candidate(reports, budget_bytes=budget_bytes, min_psnr=min_psnr)
    return EncodeResult(container=selected.container, selected=selected, candidates=reports)


def _decode_symbols(parsed):
    if parsed.packing == cont.PACKING_HUFFMAN:
        table = entropy.HuffmanTable(lengths=parsed.huffman_lengths)
        mapped = entropy.huffman_decode(
            table, parsed.payload, parsed.payload_bit_length, parsed.symbol_count
        )
        return entropy.dpcm_transform(entropy.unzigzag(mapped), "inverse")
    bits = max(0, math.ceil(math.log2(parsed.k))) if parsed.k > 1 else 0
    return entropy.unpack_fixed(
        parsed.payload, bits, parsed.symbol_count, parsed.payload_bit_length
    )


def decode_reconstruction(data, gray, weights):
    """Shared decode path; returns corrected chroma planes (2, H, W)."""
    parsed = cont.parse_container(data)
    if parsed.model_hash != weights.content_hash():
        raise ModelMismatch("container was encoded with different model weights")
    gray = np.asarray(gray, dtype=np.float64)
    if gray.shape != (parsed.height, parsed.width):
        raise DimensionMismatch(
            f"gray plane {gray.shape} vs container {(parsed.height, parsed.width)}"
        )
    if parsed.k != weights.config.k_branches:
        raise ModelMismatch(
            f"container K={parsed.k}, model K={weights.config.k_branches}"
        )
    hyp = forward_hypotheses(weights, gray)
    symbols = _decode_symbols(parsed)
    if symbols.size and (symbols.min() < 0 or symbols.max() >= parsed.k):
        raise MalformedBitstream("decoded branch index out of range")
    if parsed.method == cont.METHOD_PER_PIXEL:
        if parsed.symbol_count != parsed.width * parsed.height:
            raise MalformedBitstream("per-pixel symbol count disagrees with dimensions")
        indices = symbols.reshape(parsed.height, parsed.width).astype(np.int32)
    else:
        regions = segment_for_method(gray, parsed.method, parsed.params)
        if regions.region_count != parsed.symbol_count:
            raise MalformedBitstream(
                f"container stores {parsed.symbol_count} regions, "
                f"segmentation produced {regions.region_count}"
            )
        indices = symbols[regions.labels].astype(np.int32)
    bmap = BranchMap(width=parsed.width, height=parsed.height, indices=indices, k=parsed.k)
    raw = assemble_chroma(hyp, bmap)
    return apply_correction(raw, parsed.correction.dequantize())


def decode_color(data, gray, weights):
    """Decode a container back to an RGB image."""
    rec = decode_reconstruction(data, gray, weights)
    gray = np.asarray(gray, dtype=np.float64)
    h, w = gray.shape
    return ycbcr_to_rgb(PlanarImage(width=w, height=h, y=gray, cb=rec[0], cr=rec[1]))


def zero_cost_colorize(gray, weights):
    """Colorize with no side information: the predictor picks the branch."""
    gray = np.asarray(gray, dtype=np.float64)
    hyp = forward_hypotheses(weights, gray)
    probs = forward_predictor(weights, hyp)
    indices = np.argmax(probs, axis=0).astype(np.int32)  # ties -> lowest index
    h, w = gray.shape
    bmap = BranchMap(width=w, height=h, indices=indices, k=hyp.k)
    rec = assemble_chroma(hyp, bmap)
    return ycbcr_to_rgb(PlanarImage(width=w, height=h, y=gray, cb=rec[0], cr=rec[1]))
