"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 runtime error. Output files are
written atomically (temp file + rename) so a failing run leaves no partial
artifacts. All randomness flows from explicit --seed flags; the default is
printed so runs are reproducible.
"""

import argparse
import os
import sys
import tempfile

from chromacodec import codec, metrics
from chromacodec.corpus import CorpusSpec, generate_corpus, load_corpus, save_corpus
from chromacodec.errors import CodecError
from chromacodec.net import NetworkConfig, load_weights, save_weights
from chromacodec.pixelio import (
    quantize_gray,
    read_gray,
    read_image,
    rgb_to_ycbcr,
    write_gray,
    write_image,
)
from chromacodec.train import TrainConfig, train_colorizer, train_predictor, write_loss_log

DEFAULT_SEED = 0


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _atomic_write(path, writer):
    """Run writer(tmp_path), then rename tmp_path over path."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_bytes(path, data):
    with open(path, "wb") as fh:
        fh.write(data)


def _train_config(args):
    return TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.lr,
        seed=args.seed,
    )


def _cmd_gen_corpus(args):
    spec = CorpusSpec.from_json(args.spec)
    images = generate_corpus(spec)
    save_corpus(images, args.out)
    print(f"wrote {len(images)} images to {args.out} (seed {spec.seed})")
    return 0


def _cmd_train(args):
    print(f"seed {args.seed}")
    corpus = load_corpus(args.corpus)
    config = NetworkConfig(
        k_branches=args.k,
        trunk_channels=args.trunk_channels,
        trunk_depth=args.trunk_depth,
        branch_hidden=args.branch_hidden,
        predictor_hidden=args.predictor_hidden,
        seed=args.seed,
    )
    result = train_colorizer(corpus, config, _train_config(args))
    _atomic_write(args.out, lambda tmp: save_weights(result.weights, tmp))
    log_path = args.log or args.out + ".log.csv"
    _atomic_write(log_path, lambda tmp: write_loss_log(result.history, tmp))
    print(f"final loss {result.final_loss:.6g}; weights -> {args.out}; log -> {log_path}")
    return 0


def _cmd_train_predictor(args):
    print(f"seed {args.seed}")
    corpus = load_corpus(args.corpus)
    weights = load_weights(args.weights)
    result = train_predictor(corpus, weights, _train_config(args))
    _atomic_write(args.out, lambda tmp: save_weights(result.weights, tmp))
    log_path = args.log or args.out + ".log.csv"
    _atomic_write(log_path, lambda tmp: write_loss_log(result.history, tmp))
    print(
        f"final loss {result.final_loss:.6g}, branch prediction accuracy "
        f"{result.final_accuracy:.4f}; weights -> {args.out}"
    )
    return 0


def _load_encode_planes(args):
    color = read_image(args.color)
    planar = rgb_to_ycbcr(color)
    if args.gray:
        gray = read_gray(args.gray)
        if gray.shape != planar.y.shape:
            raise CodecError(
                f"gray plane {gray.shape} does not match color image {planar.y.shape}"
            )
    else:
        gray = quantize_gray(planar.y)
    return gray, planar.chroma, color


def _cmd_encode(args):
    weights = load_weights(args.weights)
    gray, truth, color = _load_encode_planes(args)
    result = codec.encode_color(
        gray,
        truth,
        weights,
        budget_bytes=args.budget,
        min_psnr=args.min_psnr,
        reference_rgb=color,
    )
    _atomic_write(args.out, lambda tmp: _write_bytes(tmp, result.container))
    if args.gray_out:
        _atomic_write(args.gray_out, lambda tmp: write_gray(gray, tmp, format="png"))
    sel = result.selected
    print(
        f"selected {sel.label}: {sel.size_bytes} bytes, {sel.psnr_db:.4f} dB, "
        f"chroma MSE {sel.chroma_mse:.4f}"
    )
    return 0


def _cmd_decode(args):
    weights = load_weights(args.weights)
    gray = read_gray(args.gray)
    with open(args.chc, "rb") as fh:
        data = fh.read()
    rgb = codec.decode_color(data, gray, weights)
    _atomic_write(args.out, lambda tmp: write_image(rgb, tmp, format="png"))
    print(f"decoded {args.chc} -> {args.out}")
    return 0


def _cmd_colorize(args):
    weights = load_weights(args.weights)
    gray = read_gray(args.gray)
    rgb = codec.zero_cost_colorize(gray, weights)
    _atomic_write(args.out, lambda tmp: write_image(rgb, tmp, format="png"))
    print(f"colorized {args.gray} -> {args.out}")
    return 0


def _cmd_eval(args):
    a = read_image(args.a)
    b = read_image(args.b)
    psnr = metrics.rgb_psnr(a, b)
    cmse = metrics.chroma_mse(rgb_to_ycbcr(a).chroma, rgb_to_ycbcr(b).chroma)
    ssim = metrics.ms_ssim(a, b, full_rgb=args.full_rgb)
    print(f"psnr_db {psnr:.4f}")
    print(f"chroma_mse {cmse:.6f}")
    print(f"ms_ssim {ssim:.6f}")
    return 0


def _cmd_sweep(args):
    corpus = load_corpus(args.corpus)
    weights = load_weights(args.weights)
    budgets = [int(b) for b in args.budgets.split(",") if b.strip() != ""]
    if not budgets:
        raise UsageError("--budgets must list at least one byte budget")
    points = metrics.rd_sweep(corpus, weights, budgets)
    _atomic_write(args.out, lambda tmp: metrics.write_rd_csv(points, tmp))
    means = [p for p in points if p.image_id == "mean"]
    for p in means:
        print(f"budget {p.budget_bytes}: mean psnr {p.psnr_db:.4f} dB")
    return 0


def build_parser():
    parser = _Parser(prog="chromacodec", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-corpus", help="render a synthetic corpus")
    p.add_argument("--spec", required=True, help="JSON corpus specification")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_gen_corpus)

    p = sub.add_parser("train", help="train the colorizer")
    p.add_argument("--corpus", required=True)
    p.add_argument("--k", type=int, required=True, help="number of branches")
    p.add_argument("--out", required=True, help="output weights file (.chw)")
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--trunk-channels", type=int, default=16)
    p.add_argument("--trunk-depth", type=int, default=2)
    p.add_argument("--branch-hidden", type=int, default=8)
    p.add_argument("--predictor-hidden", type=int, default=16)
    p.add_argument("--log", default=None, help="loss log CSV (default <out>.log.csv)")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("train-predictor", help="train the branch predictor head")
    p.add_argument("--corpus", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--log", default=None)
    p.set_defaults(func=_cmd_train_predictor)

    p = sub.add_parser("encode", help="compress the color of an image")
    p.add_argument("--color", required=True, help="color PNG providing the chroma truth")
    p.add_argument("--gray", default=None, help="grayscale PNG (derived from --color if omitted)")
    p.add_argument("--weights", required=True)
    p.add_argument("--budget", type=int, default=None, help="byte budget")
    p.add_argument("--min-psnr", type=float, default=None, help="quality target in dB")
    p.add_argument("--out", required=True, help="output container (.chc)")
    p.add_argument("--gray-out", default=None, help="write the grayscale plane used")
    p.set_defaults(func=_cmd_encode)

    p = sub.add_parser("decode", help="reconstruct color from a container")
    p.add_argument("--chc", required=True)
    p.add_argument("--gray", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_decode)

    p = sub.add_parser("colorize", help="zero-cost colorization (no container)")
    p.add_argument("--gray", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_colorize)

    p = sub.add_parser("eval", help="compare two images")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--full-rgb", action="store_true", help="MS-SSIM over RGB, not luma")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("sweep", help="rate-distortion sweep over a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--budgets", required=True, help="comma-separated byte budgets")
    p.add_argument("--out", required=True, help="output CSV")
    p.set_defaults(func=_cmd_sweep)
    return parser


def run_cli(argv):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (CodecError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
