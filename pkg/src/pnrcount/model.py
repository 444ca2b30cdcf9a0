"""Photon-number statistics of M identical single-photon emitters.

Each of ``M`` emitters delivers at most one detected photon per pulse with
probability ``p``, so the detected photon number is Binomial(M, p).  The same
model is also written in the brightness parameterisation
``lam = M p``, ``xi = M / p``, where factorials of the non-integer
``sqrt(lam xi)`` are read through the gamma function.
"""
from dataclasses import dataclass
import math

import numpy as np
from scipy.special import gammaln

from . import kernels
from ._special import log_binom_pmf

INTEGER_TOL = 1e-9


class ModelError(ValueError):
    """Parameters outside the model's domain."""


@dataclass(frozen=True)
class EmitterModel:
    """Emitter count ``M`` and per-emitter, per-pulse detection probability ``p``."""

    M: int
    p: float

    def __post_init__(self):
        if isinstance(self.M, bool) or int(self.M) != self.M:
            raise ModelError(f"M must be an integer, got {self.M!r}")
        if self.M < 1:
            raise ModelError(f"M must be >= 1, got {self.M}")
        if not 0.0 <= self.p <= 1.0:
            raise ModelError(f"p must lie in [0, 1], got {self.p}")
        object.__setattr__(self, "M", int(self.M))
        object.__setattr__(self, "p", float(self.p))

    @property
    def lam(self):
        return self.M * self.p


@dataclass(frozen=True)
class BrightnessModel:
    """Mean detected photons ``lam = M p`` and ratio ``xi = M / p``."""

    lam: float
    xi: float

    def __post_init__(self):
        if not (self.lam >= 0.0 and self.xi > 0.0):
            raise ModelError(f"need lam >= 0 and xi > 0, got ({self.lam}, {self.xi})")
        # p <= 1  <=>  lam <= xi  <=>  lam <= sqrt(lam xi)
        if self.lam > self.xi * (1.0 + 1e-12):
            raise ModelError(f"lam > xi implies p > 1: ({self.lam}, {self.xi})")
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "xi", float(self.xi))

    @property
    def M(self):
        """Continuous emitter number sqrt(lam xi)."""
        return math.sqrt(self.lam * self.xi)

    @property
    def p(self):
        return min(1.0, math.sqrt(self.lam / self.xi))


class PhotonHistogram:
    """Occurrence counts of photon numbers over ``nu`` experiments.

    ``counts[N]`` is the number of experiments that registered ``N`` photons.
    Trailing zero bins are trimmed.
    """

    def __init__(self, counts):
        if isinstance(counts, dict):
            if any(int(k) < 0 for k in counts):
                raise ValueError("photon numbers must be non-negative")
            size = max((int(k) for k in counts), default=-1) + 1
            arr = np.zeros(size, dtype=np.int64)
            for k, v in counts.items():
                arr[int(k)] += int(v)
        else:
            arr = np.array(counts, dtype=np.int64).ravel()
        if np.any(arr < 0):
            raise ValueError("occurrence counts must be non-negative")
        nz = np.flatnonzero(arr)
        arr = arr[: nz[-1] + 1] if nz.size else arr[:1]
        if arr.sum() == 0:
            raise ValueError("histogram holds no experiments")
        self.counts = arr
        self.counts.setflags(write=False)

    @classmethod
    def from_samples(cls, samples):
        s = np.asarray(samples, dtype=np.int64)
        if s.size and s.min() < 0:
            raise ValueError("photon numbers must be non-negative")
        return cls(np.bincount(s))

    @property
    def nu(self):
        return int(self.counts.sum())

    @property
    def max_count(self):
        return int(self.counts.size - 1)

    @property
    def total_photons(self):
        return int(np.dot(np.arange(self.counts.size), self.counts))

    @property
    def mean(self):
        return self.total_photons / self.nu

    def as_dict(self):
        return {int(n): int(c) for n, c in enumerate(self.counts) if c}

    def __eq__(self, other):
        return isinstance(other, PhotonHistogram) and np.array_equal(self.counts, other.counts)

    def __repr__(self):
        return f"PhotonHistogram(nu={self.nu}, {self.as_dict()})"


def _xlogy(x, y):
    # 0 * log(0) = 0, so (1-p)^0 = 1 at p = 1
    return np.where(x == 0, 0.0, x * np.log(np.where(x == 0, 1.0, y)))


def _xlog1my(x, y):
    return np.where(x == 0, 0.0, x * np.log1p(-np.where(x == 0, 0.0, y)))


def log_pmf_gamma(N, M, p):
    """log of the gamma-interpolated binomial pmf, valid for real ``M > N - 1``."""
    N = np.asarray(N, dtype=np.float64)
    inside = N <= M
    if np.all(inside):
        return log_binom_pmf(N, M, p)
    # N in (M, M + 1) only arises for non-integer M
    with np.errstate(divide="ignore"):
        out = np.atleast_1d(gammaln(M + 1.0) - gammaln(M - N + 1.0) - gammaln(N + 1.0)
                            + _xlogy(N, p) + _xlog1my(M - N, p))
    out[np.atleast_1d(inside)] = log_binom_pmf(N[inside], M, p)
    return out.reshape(N.shape)


def pmf_gamma(N, M, p):
    """Binomial pmf with factorials continued through x! = Gamma(x + 1).

    Defined for real ``M``; zero where ``N > M``.
    """
    N = np.asarray(N, dtype=np.float64)
    inside = (N >= 0) & (N <= M)
    safe = np.where(inside, N, 0.0)
    out = np.where(inside, np.exp(log_pmf_gamma(safe, M, p)), 0.0)
    return out if out.ndim else float(out)


def pmf_theta(N, model):
    """P(N | M, p), exactly zero for N > M.  Vectorised over ``N``."""
    N = np.asarray(N)
    if np.any(N < 0):
        raise ValueError("photon number must be non-negative")
    return pmf_gamma(N, model.M, model.p)


def pmf_beta(N, model):
    """P(N | lam, xi), with M = sqrt(lam xi) and p = sqrt(lam / xi).

    When ``sqrt(lam xi)`` is within 1e-9 of an integer this is the binomial
    pmf; otherwise the gamma-interpolated form, set to zero for
    ``N >= sqrt(lam xi)`` and clamped into [0, 1].
    """
    N = np.asarray(N, dtype=np.float64)
    if np.any(N < 0):
        raise ValueError("photon number must be non-negative")
    if model.lam == 0.0:
        out = np.where(N == 0, 1.0, 0.0)
        return out if out.ndim else float(out)
    M = model.M
    p = model.p
    Mr = round(M)
    if abs(M - Mr) <= INTEGER_TOL and Mr >= 1:
        return pmf_gamma(N, float(Mr), p)
    inside = N < M
    out = np.where(inside, pmf_gamma(np.where(inside, N, 0.0), M, p), 0.0)
    out = np.clip(out, 0.0, 1.0)
    return out if out.ndim else float(out)


def pmf_poisson(N, lam):
    """lam^N exp(-lam) / N!."""
    if lam < 0:
        raise ValueError("lam must be >= 0")
    N = np.asarray(N, dtype=np.float64)
    if np.any(N < 0):
        raise ValueError("photon number must be non-negative")
    out = np.exp(_xlogy(N, lam) - lam - gammaln(N + 1.0))
    return out if out.ndim else float(out)


def to_beta(model):
    if model.p <= 0.0:
        raise ModelError("xi = M/p is undefined at p = 0")
    return BrightnessModel(model.M * model.p, model.M / model.p)


def to_theta(model, exact=True):
    """Map (lam, xi) back to (M, p).

    With ``exact=True`` sqrt(lam xi) must be within 1e-9 of an integer and an
    :class:`EmitterModel` is returned.  Otherwise returns ``(M, p, is_integer)``
    with the continuous M.
    """
    M = model.M
    Mr = round(M)
    is_int = abs(M - Mr) <= INTEGER_TOL and Mr >= 1
    if exact:
        if not is_int:
            raise ModelError(f"sqrt(lam xi) = {M!r} is not an integer emitter count")
        return EmitterModel(int(Mr), min(1.0, model.lam / Mr))
    return M, model.p, is_int


def moments(model):
    """(mean, variance) of the photon number."""
    return model.M * model.p, model.M * model.p * (1.0 - model.p)


def g2_zero(M):
    """Zero-delay HBT correlation 1 - 1/M of M equal, background-free emitters."""
    if M < 1:
        raise ModelError(f"M must be >= 1, got {M}")
    return 1.0 - 1.0 / M


def sample_histogram(model, nu, seed, workers=1):
    """Histogram of ``nu`` independent photon-number draws from ``model``.

    Experiment ``i`` consumes only the counter-based stream keyed by
    ``(seed, i)``, so the result is identical for every ``workers`` value.
    """
    nu = int(nu)
    if nu < 1:
        raise ValueError("nu must be >= 1")
    plan = kernels.sampler_plan(model.M, model.p)
    key = kernels.stream_key(seed)
    workers = max(1, int(workers))
    if workers == 1 or nu < 4096:
        counts = kernels.sample_counts(key, 0, nu, model.M, *plan)
    else:
        from concurrent.futures import ThreadPoolExecutor

        edges = np.linspace(0, nu, workers + 1).astype(np.int64)
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(lambda ab: kernels.sample_counts(key, int(ab[0]), int(ab[1]), model.M, *plan),
                                zip(edges[:-1], edges[1:])))
        counts = np.sum(parts, axis=0)
    return PhotonHistogram(counts)
