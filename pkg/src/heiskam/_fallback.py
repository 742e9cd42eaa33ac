"""Pure numpy versions of the compiled kernels, same signatures and results."""

import numpy as np

_CHUNK_BYTES = 64 * 2**20


def nudft_eval(coeffs, dim, cutoff, points, num_threads=1):
    coeffs = np.ascontiguousarray(coeffs, dtype=np.complex128)
    points = np.ascontiguousarray(points, dtype=np.float64)
    ncomp, nmodes = coeffs.shape
    side = 2 * cutoff + 1
    if side**dim != nmodes or points.shape[1] != dim:
        raise ValueError("coefficient box and point dimension disagree")
    box = coeffs.reshape((ncomp,) + (side,) * dim)
    freqs = np.arange(-cutoff, cutoff + 1)
    npts = points.shape[0]
    out = np.empty((ncomp, npts), dtype=np.complex128)
    per_point = 16 * ncomp * max(nmodes // side, 1)
    step = max(1, _CHUNK_BYTES // per_point)
    for lo in range(0, npts, step):
        pts = points[lo:lo + step]
        tabs = np.exp(2j * np.pi * pts[:, :, None] * freqs[None, None, :])
        cur = box @ tabs[:, dim - 1, :].T  # (..., P)
        for axis in range(dim - 2, -1, -1):
            cur = np.einsum("...jp,pj->...p", cur, tabs[:, axis, :])
        out[:, lo:lo + step] = cur
    return out


def taylor_eval(derivs, disp, alpha, inv_fact, num_threads=1):
    derivs = np.asarray(derivs, dtype=np.float64)
    disp = np.asarray(disp, dtype=np.float64)
    order = int(alpha.max()) if alpha.size else 0
    dim = disp.shape[1]
    pw = np.ones((dim, order + 1, disp.shape[0]))
    for e in range(1, order + 1):
        pw[:, e] = pw[:, e - 1] * disp.T
    out = np.zeros((derivs.shape[0], derivs.shape[2]))
    for a in range(alpha.shape[0]):
        mono = np.full(disp.shape[0], inv_fact[a])
        for k in range(dim):
            if alpha[a, k]:
                mono = mono * pw[k, alpha[a, k]]
        out += derivs[:, a, :] * mono
    return out


def lattice_min(kappa, gamma, bound):
    kappa = np.asarray(kappa, dtype=np.float64)
    dim = kappa.size
    side = 2 * bound + 1
    total = side**dim
    half = total // 2
    best, best_idx = np.inf, -1
    step = 1 << 20
    for lo in range(half + 1, total, step):
        idx = np.arange(lo, min(lo + step, total))
        m = np.stack(np.unravel_index(idx, (side,) * dim), axis=1) - bound
        theta = np.zeros(idx.size)
        for k in range(dim):
            theta += kappa[k] * m[:, k]
        dist = np.abs(theta - np.floor(theta + 0.5))
        val = dist * np.sum(m.astype(np.float64) ** 2, axis=1) ** gamma
        j = int(np.argmin(val))
        if val[j] < best:
            best, best_idx = float(val[j]), int(idx[j])
    m = np.array(np.unravel_index(best_idx, (side,) * dim)) - bound
    p = int(np.floor(float(np.dot(kappa, m)) + 0.5))
    return best, m.astype(np.int64), p
