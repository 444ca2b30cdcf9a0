"""Accurate log binomial pmf for large and non-integer M.

``gammaln(M+1) - gammaln(N+1) - gammaln(M-N+1)`` loses about
``eps * M log M`` absolute accuracy to cancellation (1e-9 at M = 1e6).  The
saddle-point form of Loader (2000), built from the Stirling remainder
``stirlerr`` and the deviance ``bd0``, keeps full relative precision.
"""
import math

import numpy as np
from scipy.special import gammaln

_LN_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_S0, _S1, _S2, _S3, _S4 = 1 / 12, 1 / 360, 1 / 1260, 1 / 1680, 1 / 1188


def stirlerr(n):
    """log(n!) - log(sqrt(2 pi n) (n/e)^n) for real n > 0."""
    n = np.asarray(n, dtype=np.float64)
    out = np.empty(n.shape)
    small = n <= 15.0
    if np.any(small):
        s = n[small]
        out[small] = gammaln(s + 1.0) - (s + 0.5) * np.log(s) + s - _LN_SQRT_2PI
    big = ~small
    if np.any(big):
        b = n[big]
        nn = b * b
        r = np.where(b > 500, (_S0 - _S1 / nn) / b,
            np.where(b > 80, (_S0 - (_S1 - _S2 / nn) / nn) / b,
            np.where(b > 35, (_S0 - (_S1 - (_S2 - _S3 / nn) / nn) / nn) / b,
                     (_S0 - (_S1 - (_S2 - (_S3 - _S4 / nn) / nn) / nn) / nn) / b)))
        out[big] = r
    return out


def bd0(x, m):
    """x log(x/m) + m - x, computed without cancellation when x ~ m."""
    x = np.asarray(x, dtype=np.float64)
    m = np.asarray(m, dtype=np.float64)
    x, m = np.broadcast_arrays(x, m)
    out = np.empty(x.shape)
    near = np.abs(x - m) < 0.1 * (x + m)
    far = ~near
    if np.any(far):
        xf, mf = x[far], m[far]
        with np.errstate(over="ignore", divide="ignore"):
            out[far] = xf * np.log(xf / mf) + mf - xf
    if np.any(near):
        xn, mn = x[near], m[near]
        v = (xn - mn) / (xn + mn)
        s = (xn - mn) * v
        ej = 2.0 * xn * v
        v2 = v * v
        for j in range(1, 40):
            ej = ej * v2
            s_new = s + ej / (2 * j + 1)
            if np.array_equal(s_new, s):
                break
            s = s_new
        out[near] = s
    return out


def log_binom_pmf(N, M, p):
    """log of M!/(N!(M-N)!) p^N (1-p)^(M-N) for real M >= N >= 0 (elementwise in N)."""
    N = np.asarray(N, dtype=np.float64)
    M = float(M)
    out = np.full(N.shape, -np.inf)
    if p <= 0.0:
        out[N == 0] = 0.0
        return out
    if p >= 1.0:
        out[N == M] = 0.0
        return out
    q = 1.0 - p
    lo = N == 0
    hi = N == M
    mid = (N > 0) & (N < M)
    out[lo] = M * math.log1p(-p)
    out[hi & ~lo] = M * math.log(p)
    if np.any(mid):
        n = N[mid]
        lc = stirlerr(M) - stirlerr(n) - stirlerr(M - n) - bd0(n, M * p) - bd0(M - n, M * q)
        lf = 2.0 * _LN_SQRT_2PI + np.log(n) + np.log1p(-n / M)
        out[mid] = lc - 0.5 * lf
    return out
