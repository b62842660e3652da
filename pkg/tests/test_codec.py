import math

import numpy as np
import pytest

from chromacodec import codec
from chromacodec import container as cont
from chromacodec.errors import (
    DimensionMismatch,
    ModelMismatch,
    NoFeasibleCandidate,
)
from chromacodec.net import NetworkConfig, forward_hypotheses, forward_predictor, init_model
from chromacodec.oracle import BranchMap, assemble_chroma, pixel_oracle
from chromacodec.pixelio import quantize_gray


@pytest.fixture(scope="module")
def model():
    return init_model(
        NetworkConfig(k_branches=3, trunk_channels=4, trunk_depth=1, branch_hidden=3,
                      predictor_hidden=4, seed=21)
    )


@pytest.fixture(scope="module")
def sample(rng):
    gray = quantize_gray(np.random.default_rng(40).random((32, 32)))
    truth = np.random.default_rng(41).uniform(-0.3, 0.3, (2, 32, 32))
    return gray, truth


def test_encode_decode_reconstruction_identical(model, sample):
    gray, truth = sample
    result = codec.encode_color(gray, truth, model)
    rec_dec = codec.decode_reconstruction(result.container, gray, model)
    assert np.array_equal(rec_dec, result.selected.reconstruction)


def test_all_candidates_decode_bit_exact(model, sample):
    gray, truth = sample
    reports = codec.evaluate_candidates(gray, truth, model)
    assert len(reports) >= 10
    for report in reports:
        rec = codec.decode_reconstruction(report.container, gray, model)
        assert np.array_equal(rec, report.reconstruction), report.label


def test_decoded_psnr_equals_encoder_psnr(model, sample):
    from chromacodec.metrics import rgb_psnr
    from chromacodec.pixelio import PlanarImage, ycbcr_to_rgb

    gray, truth = sample
    h, w = gray.shape
    reference = ycbcr_to_rgb(PlanarImage(width=w, height=h, y=gray, cb=truth[0], cr=truth[1]))
    result = codec.encode_color(gray, truth, model, reference_rgb=reference)
    rgb = codec.decode_color(result.container, gray, model)
    assert rgb_psnr(rgb, reference) == result.selected.psnr_db


def test_wrong_weights_rejected_before_decode(model, sample):
    gray, truth = sample
    other = init_model(
        NetworkConfig(k_branches=3, trunk_channels=4, trunk_depth=1, branch_hidden=3,
                      predictor_hidden=4, seed=99)
    )
    blob = codec.encode_color(gray, truth, model).container
    with pytest.raises(ModelMismatch):
        codec.decode_color(blob, gray, other)


def test_dimension_mismatch(model, sample):
    gray, truth = sample
    blob = codec.encode_color(gray, truth, model).container
    with pytest.raises(DimensionMismatch):
        codec.decode_color(blob, np.zeros((64, 64)), model)


def test_budget_too_small(model, sample):
    gray, truth = sample
    with pytest.raises(NoFeasibleCandidate):
        codec.encode_color(gray, truth, model, budget_bytes=10)


def test_k1_container_is_header_sized(sample):
    gray, truth = sample
    k1 = init_model(
        NetworkConfig(k_branches=1, trunk_channels=4, trunk_depth=1, branch_hidden=3,
                      predictor_hidden=4, seed=5)
    )
    reports = codec.evaluate_candidates(gray, truth, k1)
    per_pixel = next(r for r in reports if r.label == "per-pixel")
    assert per_pixel.payload_bits == 0
    assert per_pixel.size_bytes < 60


def test_monotone_budget(model, sample):
    gray, truth = sample
    reports = codec.evaluate_candidates(gray, truth, model)
    sizes = sorted(r.size_bytes for r in reports)
    last_psnr = -1.0
    for budget in sizes:
        sel = codec.select_candidate(reports, budget_bytes=budget)
        assert sel.psnr_db >= last_psnr
        last_psnr = sel.psnr_db


def test_min_psnr_selection(model, sample):
    gray, truth = sample
    reports = codec.evaluate_candidates(gray, truth, model)
    target = float(np.median([r.psnr_db for r in reports]))
    sel = codec.select_candidate(reports, min_psnr=target)
    assert sel.psnr_db >= target
    for r in reports:
        if r.psnr_db >= target:
            assert sel.size_bytes <= r.size_bytes


def test_payload_never_exceeds_raw_bound(model, sample):
    gray, truth = sample
    k = model.config.k_branches
    raw_bits = math.ceil(math.log2(k))
    for report in codec.evaluate_candidates(gray, truth, model):
        parsed = cont.parse_container(report.container)
        n = parsed.symbol_count
        budget_bits = n * raw_bits
        assert parsed.payload_bit_length <= ((budget_bits + 7) // 8) * 8
        if parsed.packing == cont.PACKING_HUFFMAN:
            table_bits = 8 * (1 + len(parsed.huffman_lengths))
            raw_payload_bits = 8 * ((budget_bits + 7) // 8)
            assert table_bits + 8 * len(parsed.payload) < raw_payload_bits


def test_per_pixel_beats_region_candidates_pre_correction(model, sample):
    gray, truth = sample
    hyp = forward_hypotheses(model, gray)
    pix_rec = assemble_chroma(hyp, pixel_oracle(hyp, truth))
    pix_mse = ((pix_rec - truth) ** 2).sum(axis=0).mean()
    for label, method, params in codec.default_candidates():
        if method == cont.METHOD_PER_PIXEL:
            continue
        try:
            canonical = cont.canonical_method_params(method, params)
            regions = codec.segment_for_method(gray, method, canonical)
        except Exception:
            continue
        from chromacodec.oracle import region_oracle

        _, bmap = region_oracle(hyp, truth, regions)
        rec = assemble_chroma(hyp, bmap)
        mse = ((rec - truth) ** 2).sum(axis=0).mean()
        assert pix_mse <= mse, label


def test_zero_cost_deterministic(model, sample):
    gray, _ = sample
    a = codec.zero_cost_colorize(gray, model)
    b = codec.zero_cost_colorize(gray, model)
    assert np.array_equal(a.data, b.data)


def test_zero_cost_never_beats_oracle(model, sample):
    gray, truth = sample
    hyp = forward_hypotheses(model, gray)
    oracle_rec = assemble_chroma(hyp, pixel_oracle(hyp, truth))
    probs = forward_predictor(model, hyp)
    guess = BranchMap(width=32, height=32, indices=np.argmax(probs, axis=0).astype(np.int32), k=hyp.k)
    zc_rec = assemble_chroma(hyp, guess)
    oracle_mse = ((oracle_rec - truth) ** 2).sum(axis=0).mean()
    zc_mse = ((zc_rec - truth) ** 2).sum(axis=0).mean()
    assert zc_mse >= oracle_mse


def test_k1_zero_cost_is_branch_zero(sample):
    gray, _ = sample
    k1 = init_model(
        NetworkConfig(k_branches=1, trunk_channels=4, trunk_depth=1, branch_hidden=3,
                      predictor_hidden=4, seed=5)
    )
    from chromacodec.pixelio import PlanarImage, ycbcr_to_rgb

    hyp = forward_hypotheses(k1, gray)
    h, w = gray.shape
    direct = ycbcr_to_rgb(
        PlanarImage(width=w, height=h, y=gray, cb=hyp.chroma[0, 0], cr=hyp.chroma[0, 1])
    )
    assert np.array_equal(codec.zero_cost_colorize(gray, k1).data, direct.data)


def test_rd_sweep_shape_and_monotonicity(model, sample):
    from chromacodec.corpus import CorpusImage
    from chromacodec.metrics import rd_sweep, write_rd_csv

    gray, truth = sample
    corpus = [CorpusImage(gray=gray, chroma=truth, name="one.png")]
    budgets = [0, 64, 256, 2048]
    points = rd_sweep(corpus, model, budgets)
    # one row per image x budget plus one mean row per budget
    assert len(points) == len(budgets) * 2
    means = {p.budget_bytes: p for p in points if p.image_id == "mean"}
    assert means[0].method == "-" and means[0].actual_bytes == 0
    zero_row = next(p for p in points if p.image_id == "one.png" and p.budget_bytes == 0)
    assert zero_row.method == "zero-cost" and zero_row.actual_bytes == 0
    positive = [means[b].psnr_db for b in (64, 256, 2048)]
    assert positive == sorted(positive)


def test_rd_csv_format(model, sample, tmp_path):
    from chromacodec.corpus import CorpusImage
    from chromacodec.metrics import rd_sweep, write_rd_csv

    gray, truth = sample
    points = rd_sweep([CorpusImage(gray=gray, chroma=truth, name="x.png")], model, [128])
    path = tmp_path / "rd.csv"
    write_rd_csv(points, path)
    lines = path.read_text().splitlines()
    assert lines[1] == "image_id,budget_bytes,actual_bytes,method,psnr_db,chroma_mse,ms_ssim"
    assert lines[2].startswith("x.png,128,")
