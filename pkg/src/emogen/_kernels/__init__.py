"""Kernel backend selection.

The compiled Cython kernel is preferred when present; the numpy fallback
is always available. Set EMOGEN_PURE_KERNELS=1 to force the fallback
(used by the benchmark and the backend-parity tests).
"""

import logging
import os

log = logging.getLogger(__name__)

if os.environ.get("EMOGEN_PURE_KERNELS"):
    from .pure import line_hits
    BACKEND = "pure"
else:
    try:
        from ._raycast import line_hits  # type: ignore[no-redef]
        BACKEND = "compiled"
    except ImportError:
        from .pure import line_hits  # noqa: F811
        BACKEND = "pure"
        log.info("compiled ray-cast kernel unavailable, using numpy fallback")

__all__ = ["line_hits", "BACKEND"]
