# cython: language_level=3
"""Compiled versions of the hot kernels in ``_kernels_py``.

Same functions, same arithmetic order where it matters; see the pure-Python
module for documentation.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport log, log1p, expm1, fabs, floor, ceil, isfinite, INFINITY, NAN

cnp.import_array()

NAME = "cython"

cdef double _SHAPE_EPS = 1e-12
cdef int _BISECT_ITERS = 64


def qdensity(const double[::1] xs, double u, double b):
    cdef Py_ssize_t n = xs.shape[0]
    cdef Py_ssize_t i, i_lo, i_hi
    cdef double t_prev, t_curr, k_prev, k_curr, total = 0.0
    i_lo = <Py_ssize_t>floor((u - b) * n)
    if i_lo < 1:
        i_lo = 1
    i_hi = <Py_ssize_t>ceil((u + b) * n) + 1
    if i_hi > n:
        i_hi = n
    for i in range(i_lo, i_hi + 1):
        t_prev = (u - (i - 1.0) / n) / b
        t_curr = (u - (<double>i) / n) / b
        k_prev = 0.75 * (1.0 - t_prev * t_prev) / b if fabs(t_prev) <= 1.0 else 0.0
        k_curr = 0.75 * (1.0 - t_curr * t_curr) / b if fabs(t_curr) <= 1.0 else 0.0
        total += xs[i - 1] * (k_prev - k_curr)
    return total


def bootstrap_headcounts(const double[::1] xs, const cnp.int64_t[:, ::1] idx, double p):
    cdef Py_ssize_t reps = idx.shape[0]
    cdef Py_ssize_t n = idx.shape[1]
    cdef Py_ssize_t m = xs.shape[0]
    cdef Py_ssize_t r, j, k, lo_pos, hi_pos, cum, ilo, ihi, lo, hi, mid
    cdef double med, line
    cdef cnp.int64_t[::1] mult = np.zeros(m, dtype=np.int64)
    out = np.empty(reps, dtype=np.float64)
    cdef double[::1] res = out
    lo_pos = (n - 1) // 2
    hi_pos = n // 2
    for r in range(reps):
        for j in range(m):
            mult[j] = 0
        for j in range(n):
            mult[idx[r, j]] += 1
        # locate the two central order statistics of the resample
        cum = 0
        ilo = -1
        ihi = -1
        for k in range(m):
            cum += mult[k]
            if ilo < 0 and cum > lo_pos:
                ilo = k
            if cum > hi_pos:
                ihi = k
                break
        med = 0.5 * (xs[ilo] + xs[ihi])
        line = p * med
        # count of sorted values <= line, then weight by multiplicity
        lo = 0
        hi = m
        while lo < hi:
            mid = (lo + hi) // 2
            if xs[mid] <= line:
                lo = mid + 1
            else:
                hi = mid
        cum = 0
        for k in range(lo):
            cum += mult[k]
        res[r] = (<double>cum) / n
    return out


cdef inline double _basis(double u, double alpha, double beta) nogil:
    cdef double lu = log(u)
    cdef double l1u = log1p(-u)
    cdef double ga, gb
    if fabs(alpha) < _SHAPE_EPS:
        ga = lu
    else:
        ga = expm1(alpha * lu) / alpha
    if fabs(beta) < _SHAPE_EPS:
        gb = l1u
    else:
        gb = expm1(beta * l1u) / beta
    return ga - gb


# numpy's vectorised log/expm1 beat a scalar libm loop over whole arrays, so
# the array entry points reuse the fallback; _basis serves the scalar loops
from ._kernels_py import gld_basis, gld_quantile


cdef double _cdf1(double x, double lam, double eta, double alpha, double beta,
                  double lo_x, double hi_x) nogil:
    cdef double lo = 0.0, hi = 1.0, mid
    cdef int it
    if x <= lo_x:
        return 0.0
    if x >= hi_x:
        return 1.0
    for it in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if lam + _basis(mid, alpha, beta) / eta < x:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def gld_cdf(x, double lam, double eta, double alpha, double beta):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xa = np.ascontiguousarray(np.ravel(np.atleast_1d(x)), dtype=np.float64)
    cdef Py_ssize_t i, n = xa.shape[0]
    cdef double lo_x = lam - 1.0 / (eta * alpha) if alpha > _SHAPE_EPS else -INFINITY
    cdef double hi_x = lam + 1.0 / (eta * beta) if beta > _SHAPE_EPS else INFINITY
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    for i in range(n):
        o[i] = _cdf1(xa[i], lam, eta, alpha, beta, lo_x, hi_x)
    return out.reshape(np.shape(np.atleast_1d(x)))


cdef double _profile(double alpha, double beta, const double[::1] u, const double[::1] x,
                     double* lam_out, double* s_out) noexcept nogil:
    cdef Py_ssize_t k, m = u.shape[0]
    cdef double gm = 0.0, xm = 0.0, sgg = 0.0, sgx = 0.0, dg, s, lam, sse = 0.0, r, gk
    lam_out[0] = NAN
    s_out[0] = NAN
    for k in range(m):
        gk = _basis(u[k], alpha, beta)
        if not isfinite(gk):
            return INFINITY
        gm += gk
        xm += x[k]
    gm /= m
    xm /= m
    for k in range(m):
        dg = _basis(u[k], alpha, beta) - gm
        sgg += dg * dg
        sgx += dg * (x[k] - xm)
    if not sgg > 0.0:
        return INFINITY
    s = sgx / sgg
    if not s > 0.0 or not isfinite(s):
        return INFINITY
    lam = xm - s * gm
    for k in range(m):
        r = x[k] - lam - s * _basis(u[k], alpha, beta)
        sse += r * r
    lam_out[0] = lam
    s_out[0] = s
    return sse


def gld_profile(double alpha, double beta, const double[::1] u, const double[::1] x):
    cdef double lam, s
    cdef double sse = _profile(alpha, beta, u, x, &lam, &s)
    return sse, lam, s


cdef inline double _f(double a, double b, const double[::1] u, const double[::1] x) noexcept nogil:
    cdef double lam, s
    return _profile(a, b, u, x, &lam, &s)


def gld_nelder_mead(const double[::1] u, const double[::1] x, double alpha0, double beta0,
                    double step=0.1, double xtol=1e-10, int maxiter=2000):
    cdef double px[3]
    cdef double py[3]
    cdef double fv[3]
    cdef double cx, cy, rx, ry, fr, ex, ey, fe, kx, ky, fk, diam, tmp
    cdef int it = 0, i, j
    cdef bint accepted
    px[0] = alpha0; px[1] = alpha0 + step; px[2] = alpha0
    py[0] = beta0; py[1] = beta0; py[2] = beta0 + step
    for i in range(3):
        fv[i] = _f(px[i], py[i], u, x)
    while True:
        for i in range(1, 3):
            j = i
            while j > 0 and fv[j] < fv[j - 1]:
                tmp = fv[j]; fv[j] = fv[j - 1]; fv[j - 1] = tmp
                tmp = px[j]; px[j] = px[j - 1]; px[j - 1] = tmp
                tmp = py[j]; py[j] = py[j - 1]; py[j - 1] = tmp
                j -= 1
        if it >= maxiter:
            break
        if not isfinite(fv[0]):
            break
        diam = fabs(px[1] - px[0])
        if fabs(py[1] - py[0]) > diam:
            diam = fabs(py[1] - py[0])
        if fabs(px[2] - px[0]) > diam:
            diam = fabs(px[2] - px[0])
        if fabs(py[2] - py[0]) > diam:
            diam = fabs(py[2] - py[0])
        if diam <= xtol:
            break
        it += 1
        cx = 0.5 * (px[0] + px[1])
        cy = 0.5 * (py[0] + py[1])
        rx = cx + (cx - px[2])
        ry = cy + (cy - py[2])
        fr = _f(rx, ry, u, x)
        if fr < fv[0]:
            ex = cx + 2.0 * (cx - px[2])
            ey = cy + 2.0 * (cy - py[2])
            fe = _f(ex, ey, u, x)
            if fe < fr:
                px[2] = ex; py[2] = ey; fv[2] = fe
            else:
                px[2] = rx; py[2] = ry; fv[2] = fr
            continue
        if fr < fv[1]:
            px[2] = rx; py[2] = ry; fv[2] = fr
            continue
        accepted = False
        if fr < fv[2]:
            kx = cx + 0.5 * (rx - cx)
            ky = cy + 0.5 * (ry - cy)
            fk = _f(kx, ky, u, x)
            if fk <= fr:
                px[2] = kx; py[2] = ky; fv[2] = fk
                accepted = True
        else:
            kx = cx + 0.5 * (px[2] - cx)
            ky = cy + 0.5 * (py[2] - cy)
            fk = _f(kx, ky, u, x)
            if fk < fv[2]:
                px[2] = kx; py[2] = ky; fv[2] = fk
                accepted = True
        if accepted:
            continue
        for i in range(1, 3):
            px[i] = px[0] + 0.5 * (px[i] - px[0])
            py[i] = py[0] + 0.5 * (py[i] - py[0])
            fv[i] = _f(px[i], py[i], u, x)
    return px[0], py[0], fv[0], it
