"""Backend selection for the convolution kernels.

The compiled extension is used when it imported successfully; otherwise the
numpy fallback takes over. Set CHROMACODEC_BACKEND=python to force the
fallback, or CHROMACODEC_BACKEND=cython to fail loudly when the extension is
missing. Forward passes are bit-identical across backends (see conv_py.py),
so files encoded under one backend decode identically under the other.
"""

import os

_requested = os.environ.get("CHROMACODEC_BACKEND", "auto").strip().lower()
if _requested not in ("auto", "cython", "python"):
    raise RuntimeError(
        f"CHROMACODEC_BACKEND must be auto, cython or python, got {_requested!r}"
    )

if _requested == "python":
    from chromacodec.kernels import conv_py as _impl

    BACKEND = "python"
else:
    try:
        from chromacodec.kernels import _convkernels as _impl

        BACKEND = "cython"
    except ImportError:
        if _requested == "cython":
            raise
        from chromacodec.kernels import conv_py as _impl

        BACKEND = "python"

conv2d_forward = _impl.conv2d_forward
conv2d_backward_input = _impl.conv2d_backward_input
conv2d_backward_weights = _impl.conv2d_backward_weights

__all__ = [
    "BACKEND",
    "conv2d_forward",
    "conv2d_backward_input",
    "conv2d_backward_weights",
]
