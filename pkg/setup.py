"""Build script for the optional compiled convolution kernels.

The package works without the extension (a numpy fallback is selected at
import time), so a failed extension build should not block installation:
run ``pip install -e . --no-build-isolation`` and check
``chromacodec.kernels.BACKEND`` to see which implementation is active.

``-ffp-contract=off`` is required: it forbids fused multiply-add
contraction so the compiled kernels produce bit-identical sums to the
numpy fallback, which performs multiply and add as separate operations.
"""

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "chromacodec.kernels._convkernels",
                ["src/chromacodec/kernels/_convkernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3", "-ffp-contract=off"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
