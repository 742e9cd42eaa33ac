# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: direct Fourier evaluation at scattered points,
Taylor-table evaluation and the lattice search behind Diophantine constants."""

import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange, parallel
from libc.math cimport cos, sin, fabs, floor, pow, M_PI
from libc.stdlib cimport malloc, free

cnp.import_array()


DEF BLK = 8


def nudft_eval(double complex[:, ::1] coeffs, int dim, int cutoff,
               double[:, ::1] points, int num_threads=1):
    """Values of sum_m c_m exp(2 pi i m.x) at each point, one row per component.

    ``coeffs`` is (components, (2N+1)**dim) in C order over the mode box.
    Points are processed in blocks so each coefficient load serves several.
    """
    cdef Py_ssize_t ncomp = coeffs.shape[0]
    cdef Py_ssize_t nmodes = coeffs.shape[1]
    cdef Py_ssize_t npts = points.shape[0]
    cdef int side = 2 * cutoff + 1
    cdef Py_ssize_t expect = 1
    cdef int k
    for k in range(dim):
        expect *= side
    if expect != nmodes or points.shape[1] != dim:
        raise ValueError("coefficient box and point dimension disagree")
    cdef double[:, ::1] cre = np.ascontiguousarray(np.real(coeffs))
    cdef double[:, ::1] cim = np.ascontiguousarray(np.imag(coeffs))
    out = np.zeros((ncomp, npts), dtype=np.complex128)
    cdef double complex[:, ::1] res = out
    cdef Py_ssize_t nblocks = (npts + BLK - 1) // BLK
    cdef Py_ssize_t blk, p, p0, c, j, r, block, nrest, b, nb
    cdef double *tre
    cdef double *tim
    cdef double *bre
    cdef double *bim
    cdef double ar, ai, xr, xi, ang
    cdef double accr[BLK]
    cdef double acci[BLK]
    cdef int axis
    with nogil, parallel(num_threads=num_threads):
        # tables laid out [axis][j][b], buffers [c][r][b]
        tre = <double *> malloc(dim * side * BLK * sizeof(double))
        tim = <double *> malloc(dim * side * BLK * sizeof(double))
        bre = <double *> malloc(ncomp * (nmodes // side + 1) * BLK * sizeof(double))
        bim = <double *> malloc(ncomp * (nmodes // side + 1) * BLK * sizeof(double))
        for blk in prange(nblocks, schedule="static"):
            p0 = blk * BLK
            nb = npts - p0
            if nb > BLK:
                nb = BLK
            for axis in range(dim):
                for j in range(side):
                    for b in range(BLK):
                        if b < nb:
                            ang = 2.0 * M_PI * (j - cutoff) * points[p0 + b, axis]
                        else:
                            ang = 0.0
                        tre[(axis * side + j) * BLK + b] = cos(ang)
                        tim[(axis * side + j) * BLK + b] = sin(ang)
            nrest = nmodes // side
            for c in range(ncomp):
                for r in range(nrest):
                    for b in range(BLK):
                        accr[b] = 0.0
                        acci[b] = 0.0
                    for j in range(side):
                        ar = cre[c, r * side + j]
                        ai = cim[c, r * side + j]
                        for b in range(BLK):
                            xr = tre[((dim - 1) * side + j) * BLK + b]
                            xi = tim[((dim - 1) * side + j) * BLK + b]
                            accr[b] = accr[b] + ar * xr - ai * xi
                            acci[b] = acci[b] + ar * xi + ai * xr
                    for b in range(BLK):
                        bre[(c * nrest + r) * BLK + b] = accr[b]
                        bim[(c * nrest + r) * BLK + b] = acci[b]
            axis = dim - 2
            while axis >= 0:
                block = nrest // side
                for c in range(ncomp):
                    for r in range(block):
                        for b in range(BLK):
                            accr[b] = 0.0
                            acci[b] = 0.0
                        for j in range(side):
                            for b in range(BLK):
                                ar = bre[(c * nrest + r * side + j) * BLK + b]
                                ai = bim[(c * nrest + r * side + j) * BLK + b]
                                xr = tre[(axis * side + j) * BLK + b]
                                xi = tim[(axis * side + j) * BLK + b]
                                accr[b] = accr[b] + ar * xr - ai * xi
                                acci[b] = acci[b] + ar * xi + ai * xr
                        for b in range(BLK):
                            bre[(c * block + r) * BLK + b] = accr[b]
                            bim[(c * block + r) * BLK + b] = acci[b]
                nrest = block
                axis = axis - 1
            for c in range(ncomp):
                for b in range(nb):
                    res[c, p0 + b] = bre[c * BLK + b] + 1j * bim[c * BLK + b]
        free(tre)
        free(tim)
        free(bre)
        free(bim)
    return out


def taylor_eval(double[:, :, ::1] derivs, double[:, ::1] disp,
                long[:, ::1] alpha, double[::1] inv_fact, int num_threads=1):
    """sum_a derivs[c, a, p] * disp[p]**alpha[a] / alpha[a]! for every c and p."""
    cdef Py_ssize_t ncomp = derivs.shape[0]
    cdef Py_ssize_t nterm = derivs.shape[1]
    cdef Py_ssize_t npts = derivs.shape[2]
    cdef Py_ssize_t dim = disp.shape[1]
    cdef long order = 0
    cdef Py_ssize_t a, k, p, c
    for a in range(nterm):
        for k in range(dim):
            if alpha[a, k] > order:
                order = alpha[a, k]
    out = np.zeros((ncomp, npts), dtype=np.float64)
    cdef double[:, ::1] res = out
    cdef double[:, :, ::1] pw = np.ones((dim, order + 1, npts))
    cdef double mono
    cdef long e
    for k in range(dim):
        for e in range(1, order + 1):
            for p in range(npts):
                pw[k, e, p] = pw[k, e - 1, p] * disp[p, k]
    # term-major sweep keeps every inner loop contiguous in the point index
    with nogil:
        for a in range(nterm):
            for p in prange(npts, schedule="static", num_threads=num_threads):
                mono = inv_fact[a]
                for k in range(dim):
                    mono = mono * pw[k, alpha[a, k], p]
                for c in range(ncomp):
                    res[c, p] += derivs[c, a, p] * mono
    return out


def lattice_min(double[::1] kappa, double gamma, int bound):
    """Minimum of |kappa.m - p| |m.m|**gamma over 0 < |m|_inf <= bound, p nearest.

    Only half of the box is scanned since m and -m give the same value.
    Returns (value, m, p).
    """
    cdef int dim = kappa.shape[0]
    cdef int side = 2 * bound + 1
    cdef long total = 1
    cdef int k
    for k in range(dim):
        total *= side
    cdef long idx, rem, half = total // 2
    cdef int mk
    cdef double theta, dist, norm2, val
    cdef double best = 1e300
    cdef long best_idx = -1
    cdef double best_p = 0.0
    cdef int *digits = <int *> malloc(dim * sizeof(int))
    with nogil:
        for idx in range(half + 1, total):
            rem = idx
            for k in range(dim - 1, -1, -1):
                digits[k] = <int>(rem % side) - bound
                rem = rem // side
            theta = 0.0
            norm2 = 0.0
            for k in range(dim):
                mk = digits[k]
                theta += kappa[k] * mk
                norm2 += <double>mk * mk
            dist = fabs(theta - floor(theta + 0.5))
            val = dist * pow(norm2, gamma)
            if val < best:
                best = val
                best_idx = idx
                best_p = floor(theta + 0.5)
    free(digits)
    m = np.zeros(dim, dtype=np.int64)
    rem = best_idx
    for k in range(dim - 1, -1, -1):
        m[k] = rem % side - bound
        rem = rem // side
    return best, m, int(best_p)
