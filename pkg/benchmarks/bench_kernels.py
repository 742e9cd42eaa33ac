"""Time the compiled kernels against the numpy fallback and check they agree.

    python benchmarks/bench_kernels.py [--repeat 3]

Prints one line per kernel and backend: best wall time and the max deviation
from the fallback result.
"""

import argparse
import time

import numpy as np

from heiskam import _core
from heiskam.lattice_fourier import multi_indices


def _best(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases(rng):
    dim, cutoff, ncomp = 4, 4, 5
    side = 2 * cutoff + 1
    coeffs = rng.standard_normal((ncomp, side**dim)) + 1j * rng.standard_normal((ncomp, side**dim))
    points = rng.uniform(0.0, 1.0, (4000, dim))
    yield "nudft_eval", lambda m: m.nudft_eval(coeffs, dim, cutoff, points, _core.threads())

    order, npts = 6, 10**4
    alpha, inv = multi_indices(dim, order)
    derivs = rng.standard_normal((ncomp, alpha.shape[0], npts))
    disp = rng.uniform(-1e-3, 1e-3, (npts, dim))
    args = tuple(_core._writable(a, t) for a, t in
                 ((derivs, np.float64), (disp, np.float64), (alpha, np.int64), (inv, np.float64)))
    yield "taylor_eval", lambda m: m.taylor_eval(*args, _core.threads())

    kappa = np.sqrt([2.0, 3.0])
    yield "lattice_min", lambda m: np.array(m.lattice_min(kappa, 1.5, 400)[0])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    impls = _core.backends()
    print(f"selected backend: {_core.BACKEND}; threads: {_core.threads()}")
    for name, call in cases(np.random.default_rng(0)):
        ref = None
        for label in ("python", "compiled"):
            if label not in impls:
                print(f"{name:12s} {label:9s} unavailable")
                continue
            t, out = _best(lambda: call(impls[label]), args.repeat)
            if ref is None:
                ref = out
            dev = float(np.max(np.abs(np.asarray(out) - np.asarray(ref))))
            print(f"{name:12s} {label:9s} {t * 1e3:10.2f} ms   max |diff| {dev:.2e}")


if __name__ == "__main__":
    main()
