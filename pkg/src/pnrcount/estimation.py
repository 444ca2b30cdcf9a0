"""Joint maximum-likelihood estimation of (M, p) from a photon histogram.

For fixed integer M the binomial likelihood is maximised in closed form by
p = mean / M, so the two-parameter search reduces to a one-dimensional scan
over candidate emitter numbers (profile likelihood).
"""
from dataclasses import dataclass, field
import math

import numpy as np
from scipy.special import gammaln

from . import kernels
from ._special import log_binom_pmf
from .model import EmitterModel, PhotonHistogram, to_beta

NEG_INF = -math.inf


class UnidentifiableError(ValueError):
    """No photon was ever detected, so M cannot be estimated."""


@dataclass
class EstimationResult:
    theta_hat: EmitterModel
    beta_hat: object
    log_likelihood: float
    converged: bool
    search_bounds: tuple
    profile: list = field(default=None, repr=False)

    def to_dict(self, with_profile=True):
        d = {
            "M": self.theta_hat.M,
            "p": self.theta_hat.p,
            "lambda": self.beta_hat.lam,
            "xi": self.beta_hat.xi,
            "log_likelihood": self.log_likelihood,
            "converged": self.converged,
            "search_bounds": list(self.search_bounds),
        }
        if with_profile and self.profile is not None:
            d["profile"] = [[int(m), float(v)] for m, v in self.profile]
        return d


def log_likelihood(model, data):
    """Joint log-likelihood sum_N count(N) ln P(N | M, p), in nats.

    Returns ``-inf`` when the data are impossible under ``model`` (a photon
    number above M, or p in {0, 1} contradicting the observations).
    """
    if not isinstance(data, PhotonHistogram):
        data = PhotonHistogram(data)
    if data.max_count > model.M:
        return NEG_INF
    N = np.flatnonzero(data.counts)
    c = data.counts[N].astype(np.float64)
    M, p = model.M, model.p
    if p == 0.0:
        return 0.0 if N.max() == 0 else NEG_INF
    if p == 1.0:
        return 0.0 if N.min() == M else NEG_INF
    return math.fsum(c * log_binom_pmf(N, M, p))


def default_m_max(data):
    return max(10_000, 100 * data.max_count)


def _sufficient(data):
    counts = data.counts.astype(np.float64)
    # tail[j] = #experiments with more than j photons
    tail = (data.nu - np.cumsum(counts))[:-1]
    const = float(np.dot(counts, gammaln(np.arange(counts.size) + 1.0)))
    return np.ascontiguousarray(tail), const


def profile_log_likelihood(data, m_lo, m_hi):
    """Profiled log-likelihood max_p l(M, p) for each integer M in [m_lo, m_hi]."""
    tail, const = _sufficient(data)
    vals = kernels.profile_scan(tail, float(data.total_photons), float(data.nu), int(m_lo), int(m_hi))
    return vals - const


def mle(data, M_max=None, keep_profile=True):
    """Profile-likelihood MLE of (M, p).

    Scans M over ``max N .. M_max`` with p = mean/M; ties go to the smaller M.
    ``converged`` is False when the best M is the scan ceiling, which happens
    when the data are not under-dispersed relative to Poisson.
    """
    if not isinstance(data, PhotonHistogram):
        data = PhotonHistogram(data)
    if data.total_photons == 0:
        raise UnidentifiableError("no photons detected in any experiment; M is unidentifiable")
    m_lo = max(1, data.max_count)
    m_hi = default_m_max(data) if M_max is None else int(M_max)
    if m_hi < m_lo:
        raise ValueError(f"M_max={m_hi} is below the largest observed photon number {m_lo}")
    prof = profile_log_likelihood(data, m_lo, m_hi)
    best = int(np.argmax(prof))
    M_hat = m_lo + best
    theta = EmitterModel(M_hat, min(1.0, data.total_photons / (data.nu * M_hat)))
    ms = np.arange(m_lo, m_hi + 1)
    return EstimationResult(
        theta_hat=theta,
        beta_hat=to_beta(theta),
        log_likelihood=log_likelihood(theta, data),
        converged=M_hat < m_hi,
        search_bounds=(m_lo, m_hi),
        profile=list(zip(ms.tolist(), prof.tolist())) if keep_profile else None,
    )
