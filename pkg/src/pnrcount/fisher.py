"""Fisher information, Cramer-Rao bounds and confidence ellipses.

Derivatives with respect to the emitter number act on the gamma-interpolated
pmf, f(N; M, p) = Gamma(M+1) / (Gamma(M-N+1) N!) p^N (1-p)^(M-N), whose
M-derivative brings in the digamma function.  The brightness derivatives are
written through the auxiliary factors ``alpha1`` and ``alpha2``.
"""
from dataclasses import dataclass
import math

import numpy as np
from scipy.special import digamma, gammaln

from .model import BrightnessModel, EmitterModel, ModelError, log_pmf_gamma, pmf_beta, pmf_theta, to_beta

# |sqrt(lam xi) - N| (or |M - N|) below which the closed forms are replaced
SINGULAR_GUARD = 1e-3
# FIM summands with pmf below this fraction of the peak are skipped
PMF_FLOOR = 1e-15
MAX_CONDITION = 1e12


class SingularFisherError(ArithmeticError):
    def __init__(self, msg, condition):
        super().__init__(f"{msg} (scaled condition number {condition:.3g})")
        self.condition = condition


@dataclass(frozen=True)
class FisherMatrix:
    entries: np.ndarray
    parameterization: str
    truncation: int


@dataclass(frozen=True)
class CovarianceMatrix:
    """CRLB covariance for ``nu`` experiments; ``per_experiment`` is I^-1."""

    per_experiment: np.ndarray
    nu: float
    parameterization: str

    @property
    def entries(self):
        return self.per_experiment / self.nu

    def at(self, nu):
        return CovarianceMatrix(self.per_experiment, nu, self.parameterization)


def _check_interior(M, p):
    if not 0.0 < p < 1.0:
        raise ModelError(f"derivatives need an interior p, got {p}")
    if M <= 0:
        raise ModelError(f"derivatives need M > 0, got {M}")


def _score_M(N, M, p):
    # d/dM log f, regular at N = M
    return digamma(M + 1.0) - digamma(M - N + 1.0) + math.log1p(-p)


def _ret(x):
    return x if np.ndim(x) else float(x)


# ------------------------------------------------------------------ theta space

def dpmf_dM(N, model_or_M, p=None):
    """d f(N; M, p) / dM of the gamma-interpolated pmf.

    Accepts an :class:`EmitterModel` or a real ``M`` plus ``p``.  Zero for N > M.
    """
    if p is None:
        M, p = float(model_or_M.M), model_or_M.p
    else:
        M = float(model_or_M)
    _check_interior(M, p)
    N = np.asarray(N, dtype=np.float64)
    gap = M - N
    out = np.zeros(N.shape)
    far = gap >= SINGULAR_GUARD
    near = (gap >= 0) & ~far
    if np.any(far):
        n, g = N[far], gap[far]
        log_pref = (gammaln(M) - gammaln(g) - 2.0 * np.log(g) - gammaln(n + 1.0)
                    + n * math.log(p) + g * math.log1p(-p))
        brace = M * (n - M) * (digamma(g) - digamma(M) - math.log1p(-p)) - n
        out[far] = np.exp(log_pref) * brace
    if np.any(near):
        n = N[near]
        out[near] = np.exp(log_pmf_gamma(n, M, p)) * _score_M(n, M, p)
    return _ret(out)


def dpmf_dp(N, model):
    """Exact d P(N | M, p) / dp = -M! p^(N-1) (1-p)^(M-N-1) (Mp - N) / (N! (M-N)!)."""
    M, p = float(model.M), model.p
    _check_interior(M, p)
    N = np.asarray(N, dtype=np.float64)
    ok = N <= M
    n = np.where(ok, N, 0.0)
    mag = np.exp(gammaln(M + 1.0) - gammaln(n + 1.0) - gammaln(M - n + 1.0)
                 + (n - 1.0) * math.log(p) + (M - n - 1.0) * math.log1p(-p))
    return _ret(np.where(ok, -mag * (M * p - n), 0.0))


# ------------------------------------------------------------------- beta space

def _alpha_terms(N, lam, xi):
    M = math.sqrt(lam * xi)
    r = math.sqrt(lam / xi)
    g = M - N
    log_a1 = (gammaln(M) + 0.5 * N * math.log(lam / xi) + (g - 1.0) * math.log1p(-r)
              - math.log(2.0) - gammaln(N + 1.0) - math.log(M) - 2.0 * np.log(g) - gammaln(g))
    a2 = (lam * xi - N * M) * (math.log1p(-r) + digamma(M) - digamma(g))
    return M, r, np.exp(log_a1), a2


def _beta_printed(N, lam, xi):
    """The alpha1/alpha2 closed forms exactly as typeset (sign included)."""
    M, r, a1, a2 = _alpha_terms(N, lam, xi)
    sq = math.sqrt(lam * xi)
    d_lam = math.sqrt(xi / lam) * a1 * (xi * lam ** 2 + N ** 2 * sq
                                        - N * ((sq - 1.0 + lam) * sq + lam) + (lam - sq) * a2)
    d_xi = lam * a1 * (-lam * sq - N ** 2 + N * (-r + sq + lam + 1.0) + (r - 1.0) * a2)
    return d_lam, d_xi


def _beta_regular(N, lam, xi):
    M = math.sqrt(lam * xi)
    p = math.sqrt(lam / xi)
    f = np.exp(log_pmf_gamma(N, M, p))
    fM = f * _score_M(N, M, p)
    fp = f * (N - M * p) / (p * (1.0 - p))
    return (M * fM + p * fp) / (2.0 * lam), (M * fM - p * fp) / (2.0 * xi)


def _beta_derivatives(N, model):
    lam, xi = model.lam, model.xi
    if not 0.0 < lam < xi:
        raise ModelError(f"derivatives need 0 < lam < xi, got ({lam}, {xi})")
    N = np.asarray(N, dtype=np.float64)
    M = model.M
    Mr = round(M)
    if abs(M - Mr) <= 1e-9:
        M = float(Mr)
    gap = M - N
    d_lam = np.zeros(N.shape)
    d_xi = np.zeros(N.shape)
    far = gap >= SINGULAR_GUARD
    near = (gap >= 0) & ~far
    if np.any(far):
        # the typeset expressions are the negatives of the derivatives of the pmf
        a, b = _beta_printed(N[far], lam, xi)
        d_lam[far], d_xi[far] = -a, -b
    if np.any(near):
        d_lam[near], d_xi[near] = _beta_regular(N[near], lam, xi)
    return _ret(d_lam), _ret(d_xi)


def dpmf_dlambda(N, model):
    """d P(N | lam, xi) / d lam; zero outside the support."""
    return _beta_derivatives(N, model)[0]


def dpmf_dxi(N, model):
    """d P(N | lam, xi) / d xi; zero outside the support."""
    return _beta_derivatives(N, model)[1]


def jacobian_theta_wrt_beta(model):
    """J = d(M, p)/d(lam, xi) with M = sqrt(lam xi), p = sqrt(lam / xi)."""
    b = model if isinstance(model, BrightnessModel) else to_beta(model)
    M, p = b.M, b.p
    return np.array([[M / (2.0 * b.lam), M / (2.0 * b.xi)],
                     [p / (2.0 * b.lam), -p / (2.0 * b.xi)]])


# -------------------------------------------------------------------- FIM/CRLB

def _support(model):
    if isinstance(model, EmitterModel):
        return model.M, True
    M = model.M
    Mr = round(M)
    if abs(M - Mr) <= 1e-9:
        return int(Mr), True
    return int(math.ceil(M)) - 1, False


def fim(model, parameterization="theta", n=None):
    """Per-experiment Fisher information sum_N (df/da_i)(df/da_j) / f.

    ``model`` may be either parameter object; it is converted to the requested
    parameterization.  The sum runs over N = 0..n (default: the full support,
    N <= M) and skips summands whose pmf is below 1e-15 of the peak.
    """
    if parameterization not in ("theta", "beta"):
        raise ValueError(f"unknown parameterization {parameterization!r}")
    top, _ = _support(model)
    if n is not None:
        top = min(top, int(n))
    N = np.arange(top + 1, dtype=np.float64)
    if parameterization == "theta":
        if not isinstance(model, EmitterModel):
            from .model import to_theta
            model = to_theta(model)
        f = pmf_theta(N, model)
        d1, d2 = dpmf_dM(N, model), dpmf_dp(N, model)
    else:
        if isinstance(model, EmitterModel):
            model = to_beta(model)
        f = pmf_beta(N, model)
        d1, d2 = _beta_derivatives(N, model)
    keep = f > PMF_FLOOR * f.max()
    f, d1, d2 = f[keep], d1[keep], d2[keep]
    i11 = np.sum(d1 * d1 / f)
    i22 = np.sum(d2 * d2 / f)
    i12 = np.sum(d1 * d2 / f)
    return FisherMatrix(np.array([[i11, i12], [i12, i22]]), parameterization, top)


def scaled_condition(matrix):
    """Condition number after scaling to unit diagonal (units-free)."""
    d = np.sqrt(np.abs(np.diag(matrix)))
    if np.any(d == 0):
        return math.inf
    return float(np.linalg.cond(matrix / np.outer(d, d)))


def crlb(model, nu, parameterization="theta"):
    """Cramer-Rao covariance C_nu = I^-1 / nu at ``model``."""
    if nu <= 0:
        raise ValueError("nu must be positive")
    info = fim(model, parameterization).entries
    cond = scaled_condition(info)
    if not cond < MAX_CONDITION:
        raise SingularFisherError("Fisher information is singular", cond)
    (a, b), (_, d) = info
    det = a * d - b * b
    inv = np.array([[d, -b], [-b, a]]) / det
    return CovarianceMatrix(inv, nu, parameterization)


# --------------------------------------------------------------------- ellipses

def chi2_2dof_quantile(coverage):
    """Quantile of chi-square with 2 dof: -2 ln(1 - coverage)."""
    if not 0.0 <= coverage < 1.0:
        raise ValueError("coverage must lie in [0, 1)")
    return -2.0 * math.log1p(-coverage)


@dataclass(frozen=True)
class ConfidenceEllipse:
    center: tuple
    semi_axes: tuple
    orientation: float
    coverage: float
    covariance: np.ndarray

    @property
    def quantile(self):
        return chi2_2dof_quantile(self.coverage)

    def mahalanobis2(self, points):
        x = np.atleast_2d(np.asarray(points, dtype=np.float64)) - np.asarray(self.center)
        sol = np.linalg.solve(self.covariance, x.T)
        return np.einsum("ij,ji->i", x, sol)

    def contains(self, points):
        return self.mahalanobis2(points) <= self.quantile

    def boundary(self, n=200):
        t = np.linspace(0.0, 2.0 * math.pi, n)
        a, b = self.semi_axes
        c, s = math.cos(self.orientation), math.sin(self.orientation)
        x = a * np.cos(t)
        y = b * np.sin(t)
        return np.column_stack([self.center[0] + c * x - s * y, self.center[1] + s * x + c * y])


def ellipse(cov, center, coverage=0.95):
    """Confidence ellipse {x : (x-c)^T C^-1 (x-c) <= q(coverage)}."""
    C = cov.entries if isinstance(cov, CovarianceMatrix) else np.asarray(cov, dtype=np.float64)
    if not np.allclose(C, C.T, rtol=1e-12, atol=0):
        raise ValueError("covariance must be symmetric")
    w, v = np.linalg.eigh(C)
    if w[0] <= 0:
        raise ValueError("covariance is not positive definite")
    q = chi2_2dof_quantile(coverage)
    major = v[:, 1]
    return ConfidenceEllipse(
        center=(float(center[0]), float(center[1])),
        semi_axes=(math.sqrt(q * w[1]), math.sqrt(q * w[0])),
        orientation=math.atan2(major[1], major[0]),
        coverage=coverage,
        covariance=C,
    )


def ellipse_transform_beta_to_theta(points):
    """Map (lam, xi) points to (M, p) = (sqrt(lam xi), sqrt(lam / xi)).

    Returns ``(curve, valid)``; ``valid`` is False where lam > xi (p > 1) or lam < 0.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    lam, xi = pts[:, 0], pts[:, 1]
    valid = (lam >= 0) & (xi > 0) & (lam <= xi)
    with np.errstate(invalid="ignore"):
        curve = np.column_stack([np.sqrt(lam * xi), np.sqrt(lam / xi)])
    return curve, valid


def inside_theta_region(ell, theta_points):
    """Whether (M, p) points fall in the image of a beta-space ellipse."""
    t = np.atleast_2d(np.asarray(theta_points, dtype=np.float64))
    beta = np.column_stack([t[:, 0] * t[:, 1], t[:, 0] / t[:, 1]])
    return ell.contains(beta)
