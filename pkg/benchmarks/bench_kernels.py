"""Benchmark the compiled convolution kernels against the numpy fallback.

Run:  python benchmarks/bench_kernels.py [--size 64] [--repeats 30]

Times the three raw kernels and a full hypothesis forward pass under both
backends, and verifies that forward results are bit-identical (the contract
that lets files encoded under one backend decode under the other).
"""

import argparse
import importlib
import time

import numpy as np


def _time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best * 1000.0


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--size", type=int, default=64)
    ap.add_argument("--channels", type=int, default=16)
    ap.add_argument("--repeats", type=int, default=30)
    args = ap.parse_args()

    from chromacodec.kernels import conv_py

    try:
        from chromacodec.kernels import _convkernels
    except ImportError:
        _convkernels = None

    backends = [("python", conv_py)]
    if _convkernels is not None:
        backends.insert(0, ("cython", _convkernels))
    else:
        print("compiled extension not available; timing fallback only")

    c, n = args.channels, args.size
    rng = np.random.default_rng(0)
    inp = rng.standard_normal((c, n, n))
    weight = rng.standard_normal((c, c, 3, 3))
    bias = rng.standard_normal(c)
    dout = rng.standard_normal((c, n, n))

    rows = []
    for name, mod in backends:
        rows.append(
            (
                name,
                _time(lambda: mod.conv2d_forward(inp, weight, bias), args.repeats),
                _time(lambda: mod.conv2d_backward_input(dout, weight), args.repeats),
                _time(lambda: mod.conv2d_backward_weights(dout, inp, 3, 3), args.repeats),
            )
        )

    print(f"conv kernels, {c}->{c} channels, {n}x{n} image (best of {args.repeats}, ms)")
    print(f"{'backend':<10}{'forward':>10}{'bwd_input':>12}{'bwd_weights':>13}")
    for name, f, bi, bw in rows:
        print(f"{name:<10}{f:>10.3f}{bi:>12.3f}{bw:>13.3f}")
    if len(rows) == 2:
        print(
            f"{'speedup':<10}{rows[1][1] / rows[0][1]:>9.1f}x"
            f"{rows[1][2] / rows[0][2]:>11.1f}x{rows[1][3] / rows[0][3]:>12.1f}x"
        )

    if _convkernels is not None:
        same = np.array_equal(
            conv_py.conv2d_forward(inp, weight, bias),
            _convkernels.conv2d_forward(inp, weight, bias),
        ) and np.array_equal(
            conv_py.conv2d_backward_input(dout, weight),
            _convkernels.conv2d_backward_input(dout, weight),
        )
        print(f"forward/input-gradient bit-identical across backends: {same}")

    # whole-network forward under whichever backend is active
    import chromacodec.kernels as kernels
    from chromacodec.net import NetworkConfig, forward_hypotheses, init_model

    weights = init_model(NetworkConfig(k_branches=2, seed=0))
    gray = rng.random((n, n))
    ms = _time(lambda: forward_hypotheses(weights, gray), args.repeats)
    print(f"forward_hypotheses (K=2, active backend={kernels.BACKEND}): {ms:.3f} ms")


if __name__ == "__main__":
    main()
