"""Kernel backend chosen at import: compiled extension if present, numpy otherwise.

Set HEISKAM_BACKEND=python to force the fallback; HEISKAM_THREADS caps the
thread count used by the compiled loops.
"""

import os

import numpy as np

from . import _fallback

BACKEND = "python"
_impl = _fallback
if os.environ.get("HEISKAM_BACKEND", "").lower() != "python":
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        _impl = _fallback


def threads():
    try:
        return max(1, int(os.environ.get("HEISKAM_THREADS", "1")))
    except ValueError:
        return 1


def backends():
    """Available implementations keyed by name, for cross-checks and benchmarks."""
    out = {"python": _fallback}
    try:
        from . import _kernels

        out["compiled"] = _kernels
    except ImportError:
        pass
    return out


def nudft_eval(coeffs, dim, cutoff, points):
    # the BLAS-backed numpy contraction outruns the compiled loop on this
    # kernel (see benchmarks/bench_kernels.py), so it is used unless forced
    impl = _impl if os.environ.get("HEISKAM_NUDFT", "") == "compiled" else _fallback
    return impl.nudft_eval(coeffs, dim, cutoff, points, threads())


def _writable(a, dtype):
    a = np.ascontiguousarray(a, dtype=dtype)
    return a if a.flags.writeable else a.copy()


def taylor_eval(derivs, disp, alpha, inv_fact):
    # typed memoryviews in the extension refuse read-only buffers
    return _impl.taylor_eval(_writable(derivs, np.float64), _writable(disp, np.float64),
                             _writable(alpha, np.int64), _writable(inv_fact, np.float64), threads())


def lattice_min(kappa, gamma, bound):
    return _impl.lattice_min(kappa, gamma, bound)
