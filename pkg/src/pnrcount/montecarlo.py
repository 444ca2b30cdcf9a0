"""Seeded Monte-Carlo ensembles: simulate, estimate, compare with the CRLB."""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .estimation import UnidentifiableError, mle
from .fisher import crlb, ellipse, inside_theta_region
from .model import EmitterModel, sample_histogram, to_beta

PARAMS = ("M", "p", "lambda", "xi")


@dataclass
class EnsembleResult:
    ground_truth: EmitterModel
    nu: int
    runs: int
    estimates: list = field(repr=False)
    unidentifiable: int
    not_converged: int
    sample_mean: dict
    sample_variance: dict
    crlb_reference: dict
    inside_ellipse_fraction: float
    inside_theta_region_fraction: float

    @property
    def used(self):
        return self.runs - self.unidentifiable - self.not_converged

    def crlb_variance(self, name):
        kind = "theta" if name in ("M", "p") else "beta"
        i = 0 if name in ("M", "lambda") else 1
        return float(self.crlb_reference[kind].entries[i, i])

    def estimate_array(self):
        """(runs_used, 4) array of M, p, lambda, xi over the runs kept."""
        ok = [e for e in self.estimates if e is not None and e.converged]
        return np.array([[e.theta_hat.M, e.theta_hat.p, e.beta_hat.lam, e.beta_hat.xi] for e in ok]).reshape(-1, 4)


def _one_run(ground_truth, nu, seed, M_max):
    h = sample_histogram(ground_truth, nu, seed)
    try:
        return mle(h, M_max=M_max, keep_profile=False)
    except UnidentifiableError:
        return None


def run_ensemble(ground_truth, nu, runs, master_seed, M_max=None, workers=1, coverage=0.95):
    """``runs`` independent (simulate -> MLE) repetitions at ``nu`` experiments each.

    Run ``r`` uses the seed derived from ``(master_seed, r)``.  Runs with no
    detected photons or a non-converged MLE are excluded from the statistics and
    counted separately.
    """
    if not 0.0 < ground_truth.p < 1.0:
        raise ValueError("ground truth must have 0 < p < 1")
    if nu < 1 or runs < 2:
        raise ValueError("need nu >= 1 and runs >= 2")
    seeds = [kernels.derive_seed(master_seed, r) for r in range(runs)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            estimates = list(ex.map(lambda s: _one_run(ground_truth, nu, s, M_max), seeds))
    else:
        estimates = [_one_run(ground_truth, nu, s, M_max) for s in seeds]

    unident = sum(e is None for e in estimates)
    not_conv = sum(e is not None and not e.converged for e in estimates)
    ref = {"theta": crlb(ground_truth, nu, "theta"), "beta": crlb(ground_truth, nu, "beta")}
    res = EnsembleResult(ground_truth, int(nu), int(runs), estimates, unident, not_conv, {}, {}, ref, float("nan"),
                         float("nan"))
    arr = res.estimate_array()
    for j, name in enumerate(PARAMS):
        col = arr[:, j]
        res.sample_mean[name] = float(col.mean()) if col.size else float("nan")
        res.sample_variance[name] = float(col.var(ddof=1)) if col.size > 1 else float("nan")
    if arr.shape[0]:
        beta0 = to_beta(ground_truth)
        ell = ellipse(ref["beta"], (beta0.lam, beta0.xi), coverage)
        res.inside_ellipse_fraction = float(np.mean(ell.contains(arr[:, 2:4])))
        res.inside_theta_region_fraction = float(np.mean(inside_theta_region(ell, arr[:, 0:2])))
    return res


def scaling_study(ground_truth, nu_list, runs, master_seed, M_max=None, workers=1):
    """One ensemble per ``nu`` (ascending); ensemble ``i`` is seeded from ``(master_seed, i)``."""
    nu_list = [int(n) for n in nu_list]
    if any(n < 1 for n in nu_list) or nu_list != sorted(nu_list):
        raise ValueError("nu_list must be ascending with entries >= 1")
    return [run_ensemble(ground_truth, nu, runs, kernels.derive_seed(master_seed, i), M_max=M_max, workers=workers)
            for i, nu in enumerate(nu_list)]


def study_table(results):
    """Long-format rows: one per (nu, parameter)."""
    rows = []
    for r in results:
        for name in PARAMS:
            cr = r.crlb_variance(name)
            var = r.sample_variance[name]
            rows.append({
                "nu": r.nu,
                "parameter": name,
                "truth": {"M": r.ground_truth.M, "p": r.ground_truth.p,
                          "lambda": to_beta(r.ground_truth).lam, "xi": to_beta(r.ground_truth).xi}[name],
                "sample_mean": r.sample_mean[name],
                "sample_variance": var,
                "crlb_variance": cr,
                "variance_ratio": var / cr,
                "runs": r.runs,
                "runs_used": r.used,
                "unidentifiable": r.unidentifiable,
                "not_converged": r.not_converged,
                "inside_ellipse_fraction": r.inside_ellipse_fraction,
            })
    return rows


def loglog_slope(nus, variances):
    """Least-squares slope of log(variance) against log(nu)."""
    return float(np.polyfit(np.log(np.asarray(nus, float)), np.log(np.asarray(variances, float)), 1)[0])
