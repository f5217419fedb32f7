"""Kernel selection: the compiled extension if it was built, else pure Python.

Set SEMIFLAT_PURE_PYTHON=1 to force the fallback.
"""

import os

import numpy as np

from semiflat import _kernels_py

BACKEND = "python"
_impl = _kernels_py.rk4_transport
if not os.environ.get("SEMIFLAT_PURE_PYTHON"):
    try:
        from semiflat._kernels import rk4_transport as _impl  # type: ignore[no-redef]
        BACKEND = "cython"
    except ImportError:
        pass


def rk4_transport(dp, psi_p, A, B, h, f0, fp0, backend: str | None = None):
    """Run RK4 over n = (len(dp) - 1) // 2 steps; returns (f, f_p) at the n + 1 nodes."""
    n = (len(dp) - 1) // 2
    f_out = np.zeros((n + 1, 3))
    fp_out = np.zeros((n + 1, 3), dtype=complex)
    args = (np.ascontiguousarray(dp, dtype=complex), np.ascontiguousarray(psi_p, dtype=complex),
            np.ascontiguousarray(A, dtype=complex), np.ascontiguousarray(B, dtype=float), float(h),
            np.ascontiguousarray(f0, dtype=float), np.ascontiguousarray(fp0, dtype=complex),
            f_out, fp_out)
    impl = _impl if backend is None else (_kernels_py.rk4_transport if backend == "python" else _compiled())
    impl(*args)
    return f_out, fp_out


def _compiled():
    from semiflat._kernels import rk4_transport as fn
    return fn
