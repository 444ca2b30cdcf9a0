"""Hot numeric kernels with a numba path and a pure-numpy fallback.

Two inner loops dominate a Monte-Carlo study: drawing ``nu`` binomial photon
counts, and scanning the profiled log-likelihood over candidate emitter
numbers.  Each has a ``*_numba`` and a ``*_numpy`` implementation; the public
names (``sample_counts``, ``profile_scan``) are bound to whichever backend
:mod:`pnrcount._backend` selected.

Random numbers come from a counter-based generator: the ``d``-th uniform used
by experiment ``i`` is a keyed hash of ``(seed, i, d)``.  Any partition of the
experiment indices across workers therefore reproduces the same draws.
"""
import math

import numpy as np

from ._backend import USE_NUMBA, HAS_NUMBA
from ._special import log_binom_pmf

_MASK64 = (1 << 64) - 1
_GAMMA_I = np.uint64(0x9E3779B97F4A7C15)
_GAMMA_D = np.uint64(0xD1B54A32D192ED03)
_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
_MUL2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_INV53 = 1.0 / 9007199254740992.0

# sampler modes
CONST, INVERSION, BTRS = 0, 1, 2
# inversion below this mean (after folding p to <= 1/2), transformed rejection above
INVERSION_MAX_MEAN = 30.0
_BLOCK = 1 << 18


def _mix64_py(z):
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def stream_key(seed):
    """64-bit stream key for an integer seed of any size or sign."""
    return np.uint64(_mix64_py(int(seed) ^ 0x5DEECE66D1234567))


def derive_seed(master_seed, index):
    """Child seed for sub-stream ``index`` of ``master_seed`` (e.g. one MC run)."""
    return _mix64_py(int(stream_key(master_seed)) + (int(index) + 1) * int(_GAMMA_I))


# ---------------------------------------------------------------- numpy path

def _mix64_np(z):
    z = (z ^ (z >> _S30)) * _MUL1
    z = (z ^ (z >> _S27)) * _MUL2
    return z ^ (z >> _S31)


def _experiment_hash_np(key, idx):
    return _mix64_np(key + (idx.astype(np.uint64) + _ONE) * _GAMMA_I)


def _uniform_np(h, draw):
    x = _mix64_np(h + np.uint64(draw + 1) * _GAMMA_D)
    return (x >> _S11).astype(np.float64) * _INV53


def uniforms_numpy(key, idx, draw):
    """Uniform [0, 1) variates number ``draw`` for experiment indices ``idx``."""
    with np.errstate(over="ignore"):
        return _uniform_np(_experiment_hash_np(np.uint64(key), np.asarray(idx)), draw)


def _btrs_block_np(key, idx, n, params, table, lo):
    a, b, c, vr, alpha = params
    out = np.empty(idx.size, dtype=np.int64)
    h = _experiment_hash_np(key, idx)
    pending = np.arange(idx.size)
    rnd = 0
    while pending.size:
        hp = h[pending]
        U = _uniform_np(hp, 2 * rnd) - 0.5
        V = _uniform_np(hp, 2 * rnd + 1)
        us = 0.5 - np.abs(U)
        with np.errstate(divide="ignore", invalid="ignore"):
            kf = np.floor((2.0 * a / us + b) * U + c)
        ok = (us > 0.0) & (kf >= 0) & (kf <= n)
        k = np.where(ok, kf, 0).astype(np.int64)
        accept = ok & (us >= 0.07) & (V <= vr)
        slow = ok & ~accept
        if slow.any():
            ks = k[slow] - lo
            inside = (ks >= 0) & (ks < table.size)
            lv = np.log(V[slow] * alpha / (a / (us[slow] * us[slow]) + b))
            bound = np.full(ks.size, -np.inf)
            bound[inside] = table[ks[inside]]
            acc2 = np.zeros_like(accept)
            acc2[slow] = lv <= bound
            accept |= acc2
        out[pending[accept]] = k[accept]
        pending = pending[~accept]
        rnd += 1
    return out


def sample_counts_numpy(key, start, stop, n, flip, mode, const_val, cdf, params, table, lo):
    counts = np.zeros(n + 1, dtype=np.int64)
    key = np.uint64(key)
    with np.errstate(over="ignore"):
        for b0 in range(start, stop, _BLOCK):
            idx = np.arange(b0, min(b0 + _BLOCK, stop), dtype=np.int64)
            if mode == CONST:
                counts[const_val] += idx.size
                continue
            if mode == INVERSION:
                u = _uniform_np(_experiment_hash_np(key, idx), 0)
                k = np.minimum(np.searchsorted(cdf, u, side="right"), cdf.size - 1)
            else:
                k = _btrs_block_np(key, idx, n, params, table, lo)
            if flip:
                k = n - k
            counts += np.bincount(k, minlength=n + 1)
    return counts


def profile_scan_numpy(tail_counts, total, nu, m_lo, m_hi):
    """Profiled log-likelihood (up to a data-only constant) for M in [m_lo, m_hi].

    ``tail_counts[j]`` is the number of experiments with more than ``j``
    photons and ``total`` the photon sum; then
    ``sum_N c_N log(M!/(M-N)!) = sum_j tail_counts[j] log(M - j)``.
    """
    js = np.arange(tail_counts.size, dtype=np.float64)
    out = np.empty(m_hi - m_lo + 1)
    step = max(1, (1 << 20) // max(1, tail_counts.size))
    for r0 in range(m_lo, m_hi + 1, step):
        ms = np.arange(r0, min(r0 + step, m_hi + 1), dtype=np.float64)
        acc = np.log(ms[:, None] - js[None, :]) @ tail_counts
        p = total / (nu * ms)
        rest = nu * ms - total
        with np.errstate(divide="ignore", invalid="ignore"):
            tail = np.where(rest > 0, rest * np.log1p(-p), 0.0)
        out[r0 - m_lo:r0 - m_lo + ms.size] = acc + total * np.log(p) + tail
    return out


# ---------------------------------------------------------------- numba path

if HAS_NUMBA:
    from numba import njit

    @njit(cache=True, nogil=True)
    def _mix64_nb(z):
        z = (z ^ (z >> _S30)) * _MUL1
        z = (z ^ (z >> _S27)) * _MUL2
        return z ^ (z >> _S31)

    @njit(cache=True, nogil=True)
    def _uniform_nb(h, draw):
        x = _mix64_nb(h + np.uint64(draw + 1) * _GAMMA_D)
        return np.float64(x >> _S11) * _INV53

    @njit(cache=True, nogil=True)
    def _invert_nb(cdf, u):
        lo = 0
        hi = cdf.size
        while lo < hi:
            mid = (lo + hi) // 2
            if cdf[mid] > u:
                hi = mid
            else:
                lo = mid + 1
        if lo > cdf.size - 1:
            lo = cdf.size - 1
        return lo

    @njit(cache=True, nogil=True)
    def _btrs_nb(h, n, a, b, c, vr, alpha, table, lo):
        rnd = 0
        while True:
            U = _uniform_nb(h, 2 * rnd) - 0.5
            V = _uniform_nb(h, 2 * rnd + 1)
            rnd += 1
            us = 0.5 - abs(U)
            if us <= 0.0:
                continue
            kf = math.floor((2.0 * a / us + b) * U + c)
            if kf < 0 or kf > n:
                continue
            k = np.int64(kf)
            if us >= 0.07 and V <= vr:
                return k
            lv = math.log(V * alpha / (a / (us * us) + b))
            ks = k - lo
            if ks < 0 or ks >= table.size:
                continue
            if lv <= table[ks]:
                return k

    @njit(cache=True, nogil=True)
    def sample_counts_numba(key, start, stop, n, flip, mode, const_val, cdf, params, table, lo):
        counts = np.zeros(n + 1, dtype=np.int64)
        if mode == CONST:
            counts[const_val] += stop - start
            return counts
        a, b, c, vr, alpha = params[0], params[1], params[2], params[3], params[4]
        for i in range(start, stop):
            h = _mix64_nb(key + (np.uint64(i) + np.uint64(1)) * _GAMMA_I)
            if mode == INVERSION:
                k = _invert_nb(cdf, _uniform_nb(h, 0))
            else:
                k = _btrs_nb(h, n, a, b, c, vr, alpha, table, lo)
            if flip:
                k = n - k
            counts[k] += 1
        return counts

    @njit(cache=True, nogil=True)
    def profile_scan_numba(tail_counts, total, nu, m_lo, m_hi):
        out = np.empty(m_hi - m_lo + 1)
        for r in range(m_hi - m_lo + 1):
            m = np.float64(m_lo + r)
            acc = 0.0
            for j in range(tail_counts.size):
                acc += tail_counts[j] * math.log(m - j)
            p = total / (nu * m)
            rest = nu * m - total
            acc += total * math.log(p)
            if rest > 0:
                acc += rest * math.log1p(-p)
            out[r] = acc
        return out


# ---------------------------------------------------------------- dispatch

def sampler_plan(n, p):
    """Precompute everything a per-experiment binomial draw for (n, p) needs.

    Returns ``(flip, mode, const_val, cdf, params, table, lo)``.  The tables are
    built once here with numpy so both backends consume identical inputs.
    """
    empty = np.zeros(1)
    if p <= 0.0 or p >= 1.0:
        return False, CONST, (0 if p <= 0.0 else n), empty, np.zeros(5), empty, 0
    flip = p > 0.5
    q = 1.0 - p if flip else p
    mean = n * q
    if mean <= INVERSION_MAX_MEAN:
        kmax = int(min(n, math.ceil(mean + 20.0 * math.sqrt(mean) + 40.0)))
        k = np.arange(kmax + 1, dtype=np.float64)
        return flip, INVERSION, 0, np.cumsum(np.exp(log_binom_pmf(k, n, q))), np.zeros(5), empty, 0
    spq = math.sqrt(mean * (1.0 - q))
    b = 1.15 + 2.53 * spq
    a = -0.0873 + 0.0248 * b + 0.01 * q
    c = mean + 0.5
    vr = 0.92 - 4.2 / b
    alpha = (2.83 + 5.1 / b) * spq
    mode_k = math.floor((n + 1) * q)
    half = int(math.ceil(40.0 * spq + 40.0))
    lo = max(0, mode_k - half)
    hi = min(n, mode_k + half)
    k = np.arange(lo, hi + 1, dtype=np.float64)
    # log f(k) - log f(mode) for the acceptance test
    table = log_binom_pmf(k, n, q) - log_binom_pmf(np.array([mode_k], dtype=np.float64), n, q)[0]
    return flip, BTRS, 0, empty, np.array([a, b, c, vr, alpha]), table, lo


if USE_NUMBA:
    sample_counts = sample_counts_numba
    profile_scan = profile_scan_numba
else:
    sample_counts = sample_counts_numpy
    profile_scan = profile_scan_numpy
