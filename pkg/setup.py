"""Build hook for the optional compiled ray-casting kernel.

The package is pure Python plus one Cython extension. If Cython or a C
compiler is unavailable the extension is skipped and emogen._kernels falls
back to the numpy implementation at import time.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "emogen._kernels._raycast",
                ["src/emogen/_kernels/_raycast.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - build environment dependent
    print(f"skipping compiled kernel ({exc}); numpy fallback will be used")

setup(ext_modules=ext_modules)
