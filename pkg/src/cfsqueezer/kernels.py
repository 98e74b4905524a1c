"""Pick the compiled kernels when available, otherwise the numpy ones.

Set ``CFSQUEEZER_PURE=1`` to force the numpy fallback.  The angle kernels stay
on numpy even when the extension is built: its vectorized atan2 beats the
scalar libm loop (see benchmarks/bench_kernels.py).
"""
import os

from ._kernels_py import segment_angles, winding_stats  # noqa: F401

BACKEND = "python"

if os.environ.get("CFSQUEEZER_PURE", "") not in ("1", "true", "yes"):
    try:
        from ._kernels import general_critical, symmetric_critical  # noqa: F401
        BACKEND = "cython"
    except ImportError:
        pass

if BACKEND == "python":
    from ._kernels_py import general_critical, symmetric_critical  # noqa: F401

__all__ = ["BACKEND", "general_critical", "segment_angles", "symmetric_critical", "winding_stats"]
