"""Pure-Python/numpy implementations of the hot kernels.

This module is the reference for ``_ckernels.pyx``; both expose the same
functions with the same semantics. ``relpov._backend`` picks one at import.
"""
import math

import numpy as np

NAME = "python"

_SHAPE_EPS = 1e-12
_BISECT_ITERS = 64


def qdensity(xs, u, b):
    """Epanechnikov kernel quantile-density estimate at ``u``.

    ``xs`` must be sorted ascending. Only order statistics whose kernel
    window overlaps ``u`` contribute, so the cost is O(n b).
    """
    n = xs.shape[0]
    i_lo = max(1, int(math.floor((u - b) * n)))
    i_hi = min(n, int(math.ceil((u + b) * n)) + 1)
    if i_hi < i_lo:
        return 0.0
    i = np.arange(i_lo, i_hi + 1, dtype=np.float64)
    t_prev = (u - (i - 1.0) / n) / b
    t_curr = (u - i / n) / b
    k_prev = np.where(np.abs(t_prev) <= 1.0, 0.75 * (1.0 - t_prev * t_prev) / b, 0.0)
    k_curr = np.where(np.abs(t_curr) <= 1.0, 0.75 * (1.0 - t_curr * t_curr) / b, 0.0)
    return float(np.dot(xs[i_lo - 1:i_hi], k_prev - k_curr))


def bootstrap_headcounts(xs, idx, p):
    """Headcount ratio of every resample ``xs[idx[r]]``.

    ``xs`` is sorted, so sorting the indices sorts the resampled values.
    """
    n = idx.shape[1]
    vals = xs[np.sort(idx, axis=1)]
    med = 0.5 * (vals[:, (n - 1) // 2] + vals[:, n // 2])
    line = p * med
    return (vals <= line[:, None]).sum(axis=1) / n


def _basis(u, alpha, beta):
    lu = math.log(u)
    l1u = math.log1p(-u)
    ga = lu if abs(alpha) < _SHAPE_EPS else math.expm1(alpha * lu) / alpha
    gb = l1u if abs(beta) < _SHAPE_EPS else math.expm1(beta * l1u) / beta
    return ga - gb


def gld_basis(u, alpha, beta):
    """Shape part of the FKML quantile function, vectorised over ``u``."""
    u = np.asarray(u, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        lu = np.log(u)
        l1u = np.log1p(-u)
        ga = lu if abs(alpha) < _SHAPE_EPS else np.expm1(alpha * lu) / alpha
        gb = l1u if abs(beta) < _SHAPE_EPS else np.expm1(beta * l1u) / beta
    return ga - gb


def gld_quantile(u, lam, eta, alpha, beta):
    return lam + gld_basis(u, alpha, beta) / eta


def _endpoints(lam, eta, alpha, beta):
    lo = lam - 1.0 / (eta * alpha) if alpha > _SHAPE_EPS else -math.inf
    hi = lam + 1.0 / (eta * beta) if beta > _SHAPE_EPS else math.inf
    return lo, hi


def _gld_cdf_scalar(x, lam, eta, alpha, beta, lo_x, hi_x):
    if x <= lo_x:
        return 0.0
    if x >= hi_x:
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if lam + _basis(mid, alpha, beta) / eta < x:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def gld_cdf(x, lam, eta, alpha, beta):
    """FKML distribution function by bisection on the quantile function."""
    xa = np.atleast_1d(np.asarray(x, dtype=np.float64))
    lo_x, hi_x = _endpoints(lam, eta, alpha, beta)
    out = np.array(
        [_gld_cdf_scalar(v, lam, eta, alpha, beta, lo_x, hi_x) for v in xa.ravel()]
    ).reshape(xa.shape)
    return out


def gld_profile(alpha, beta, u, x):
    """Least-squares location and scale for fixed shapes.

    Returns ``(sse, lam, inv_eta)``; ``sse`` is ``inf`` when the shapes give
    a non-finite basis or a non-positive scale.
    """
    m = u.shape[0]
    g = [_basis(float(uk), alpha, beta) for uk in u]
    gm = 0.0
    xm = 0.0
    for k in range(m):
        if not math.isfinite(g[k]):
            return math.inf, math.nan, math.nan
        gm += g[k]
        xm += x[k]
    gm /= m
    xm /= m
    sgg = 0.0
    sgx = 0.0
    for k in range(m):
        dg = g[k] - gm
        sgg += dg * dg
        sgx += dg * (x[k] - xm)
    if not sgg > 0.0:
        return math.inf, math.nan, math.nan
    s = sgx / sgg
    if not s > 0.0 or not math.isfinite(s):
        return math.inf, math.nan, math.nan
    lam = xm - s * gm
    sse = 0.0
    for k in range(m):
        r = x[k] - lam - s * g[k]
        sse += r * r
    return sse, lam, s


def _order3(px, py, fv):
    # insertion sort of the three vertices, best first
    for i in (1, 2):
        j = i
        while j > 0 and fv[j] < fv[j - 1]:
            fv[j], fv[j - 1] = fv[j - 1], fv[j]
            px[j], px[j - 1] = px[j - 1], px[j]
            py[j], py[j - 1] = py[j - 1], py[j]
            j -= 1


def gld_nelder_mead(u, x, alpha0, beta0, step=0.1, xtol=1e-10, maxiter=2000):
    """Nelder-Mead over the two shapes of the profiled objective.

    Returns ``(alpha, beta, sse, iterations)``.
    """
    px = [alpha0, alpha0 + step, alpha0]
    py = [beta0, beta0, beta0 + step]
    fv = [gld_profile(px[i], py[i], u, x)[0] for i in range(3)]
    it = 0
    while True:
        _order3(px, py, fv)
        if it >= maxiter:
            break
        if not math.isfinite(fv[0]):
            break
        diam = max(abs(px[1] - px[0]), abs(py[1] - py[0]),
                   abs(px[2] - px[0]), abs(py[2] - py[0]))
        if diam <= xtol:
            break
        it += 1
        cx = 0.5 * (px[0] + px[1])
        cy = 0.5 * (py[0] + py[1])
        rx = cx + (cx - px[2])
        ry = cy + (cy - py[2])
        fr = gld_profile(rx, ry, u, x)[0]
        if fr < fv[0]:
            ex = cx + 2.0 * (cx - px[2])
            ey = cy + 2.0 * (cy - py[2])
            fe = gld_profile(ex, ey, u, x)[0]
            if fe < fr:
                px[2], py[2], fv[2] = ex, ey, fe
            else:
                px[2], py[2], fv[2] = rx, ry, fr
            continue
        if fr < fv[1]:
            px[2], py[2], fv[2] = rx, ry, fr
            continue
        if fr < fv[2]:
            kx = cx + 0.5 * (rx - cx)
            ky = cy + 0.5 * (ry - cy)
            fk = gld_profile(kx, ky, u, x)[0]
            if fk <= fr:
                px[2], py[2], fv[2] = kx, ky, fk
                continue
        else:
            kx = cx + 0.5 * (px[2] - cx)
            ky = cy + 0.5 * (py[2] - cy)
            fk = gld_profile(kx, ky, u, x)[0]
            if fk < fv[2]:
                px[2], py[2], fv[2] = kx, ky, fk
                continue
        for i in (1, 2):
            px[i] = px[0] + 0.5 * (px[i] - px[0])
            py[i] = py[0] + 0.5 * (py[i] - py[0])
            fv[i] = gld_profile(px[i], py[i], u, x)[0]
    return px[0], py[0], fv[0], it
