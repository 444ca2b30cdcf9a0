"""How many experiments are needed to pin down M.

The criterion is CRLB(M) / M <= target, with CRLB(M) the (M, M) element of
I^-1 / nu.  Solving for nu gives nu = C_MM / (target M).
"""
from dataclasses import dataclass, field
import math

import numpy as np

from .fisher import SingularFisherError, crlb
from .model import EmitterModel


@dataclass(frozen=True)
class Requirement:
    nu_exact: float
    nu: int
    per_experiment_var_M: float


def experiments_needed(model, target=0.01):
    """Smallest nu with CRLB(M)/M <= target, plus the exact real-valued nu."""
    if target <= 0:
        raise ValueError("target must be positive")
    c_mm = float(crlb(model, 1).per_experiment[0, 0])
    exact = c_mm / (target * model.M)
    n = math.ceil(exact)
    # ceil of a rounded quotient can overshoot by one; keep the smallest that meets the bound
    if n > 1 and c_mm / (n - 1) <= target * model.M:
        n -= 1
    return Requirement(exact, max(1, n), c_mm)


def contour_profile(lambda_value, M_samples, target=0.01):
    """(M, p, nu_exact) along the fixed-brightness curve p = lambda / M."""
    out = []
    for M in M_samples:
        M = int(M)
        if lambda_value > M:
            raise ValueError(f"lambda={lambda_value} exceeds M={M} (p > 1)")
        p = lambda_value / M
        try:
            nu = experiments_needed(EmitterModel(M, p), target).nu_exact if p < 1.0 else _nu_at_p_one(M, target)
        except SingularFisherError:
            nu = math.nan
        out.append((M, p, nu))
    return out


def _nu_at_p_one(M, target):
    # p = 1: every pulse yields exactly M photons, M is known after one experiment
    return 1.0


@dataclass
class PlanGrid:
    M_axis: np.ndarray
    p_axis: np.ndarray
    nu_required: np.ndarray
    nu_exact: np.ndarray
    target: float
    contours: list = field(default_factory=list)


def log_axis_int(lo, hi, n):
    return np.unique(np.round(np.geomspace(lo, hi, n)).astype(np.int64))


def plan_grid(M_range=(2, 2000), p_range=(1e-3, 0.999), resolution=(50, 50), target=0.01,
              contour_lambdas=(5, 10, 20, 50), workers=1):
    """Required experiments over a log-spaced (M, p) grid.

    Rows follow ``p_axis``, columns ``M_axis``.  Cells whose FIM is singular
    hold NaN.  Each requested lambda gets a profile sampled at the grid's M
    values with M >= lambda.
    """
    (m_lo, m_hi), (p_lo, p_hi) = M_range, p_range
    if m_lo < 2 or m_hi > 10_000 or not 0.0 < p_lo <= p_hi < 1.0:
        raise ValueError("grid must satisfy 2 <= M <= 1e4 and 0 < p < 1")
    nm, npn = (resolution, resolution) if np.isscalar(resolution) else resolution
    M_axis = log_axis_int(m_lo, m_hi, nm)
    p_axis = np.geomspace(p_lo, p_hi, npn)

    def cell(args):
        i, j = args
        try:
            return experiments_needed(EmitterModel(int(M_axis[j]), float(p_axis[i])), target).nu_exact
        except (SingularFisherError, ValueError):
            return math.nan

    idx = [(i, j) for i in range(p_axis.size) for j in range(M_axis.size)]
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(workers) as ex:
            vals = list(ex.map(cell, idx))
    else:
        vals = [cell(ij) for ij in idx]
    exact = np.array(vals).reshape(p_axis.size, M_axis.size)
    with np.errstate(invalid="ignore"):
        req = np.where(np.isfinite(exact), np.ceil(exact), np.nan)
    contours = [(float(lam), contour_profile(lam, [m for m in M_axis if m >= lam], target))
                for lam in contour_lambdas]
    return PlanGrid(M_axis, p_axis, req, exact, target, contours)


def acquisition_time(nu, pulse_period=1e-6):
    """Wall time in seconds for ``nu`` experiments at one per ``pulse_period``."""
    if nu <= 0 or pulse_period <= 0:
        raise ValueError("nu and pulse_period must be positive")
    return nu * pulse_period
