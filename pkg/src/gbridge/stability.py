"""Condition numbers of least-squares and shrinkage estimators.

The estimator with shrinkage ratio ``t`` solves ``G beta = A'y`` with
``G = P diag(1 / (d_i (1 - t / c_i))) P'``, so its condition number is
``max_i d_i (1 - t/c_i) / min_i d_i (1 - t/c_i)``. Least squares is the
case ``t = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, OrderingError

_ORDER_RTOL = 1e-12


@dataclass(frozen=True)
class StabilityReport:
    kappa_ls: float
    kappa_est: float
    t_used: float
    improved: bool
    t0: float
    guaranteed: bool


def kappa_ls(d) -> float:
    d = np.asarray(d, dtype=float)
    return float(np.max(d) / np.min(d))


def kappa_estimator(d, c, t):
    """Condition number of the estimator at shrinkage ratio ``t``.

    ``t`` may be an array; the result then has the same shape.
    """
    d = np.asarray(d, dtype=float)
    c = np.asarray(c, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(c < 1):
        raise DomainError("shrinkage factors must satisfy c_i >= 1")
    if np.any(t < 0) or np.any(t >= 1):
        raise DomainError(f"need 0 <= t < 1, got t in [{t.min():g}, {t.max():g}]")
    m = d * (1.0 - t[..., None] / c)
    kappa = np.max(m, axis=-1) / np.min(m, axis=-1)
    return float(kappa) if kappa.ndim == 0 else kappa


def _nondecreasing(c: np.ndarray) -> bool:
    return bool(np.all(np.diff(c) >= -_ORDER_RTOL * np.abs(c[1:])))


def _ratio_or_inf(num, den, scale):
    # 0/0 for tied eigenvalues with tied factors: the pair imposes no constraint
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    out = np.full(np.broadcast(num, den).shape, np.inf)
    ok = den > 1e-14 * np.asarray(scale)
    np.divide(num, den, out=out, where=ok)
    return out


def t0_bound_increasing(d, c) -> float:
    """Largest ``t0`` keeping the condition number at most ``d_1/d_p`` for
    nondecreasing ``c``: the minimum over index pairs ``i > k`` of
    ``c_i c_k (d_1 d_k - d_i d_p) / (c_i d_1 d_k - c_k d_i d_p)``.
    """
    d = np.asarray(d, dtype=float)
    c = np.asarray(c, dtype=float)
    if not _nondecreasing(c):
        raise OrderingError(f"t0 bound needs nondecreasing c, got {c}")
    i, k = np.tril_indices(d.size, -1)
    d1, dp = d[0], d[-1]
    num = c[i] * c[k] * (d1 * d[k] - d[i] * dp)
    den = c[i] * d1 * d[k] - c[k] * d[i] * dp
    ratios = _ratio_or_inf(num, den, c[i] * d1 * d[k])
    return float(np.min(ratios)) if ratios.size else np.inf


def t0_bound_case2(d, c) -> float:
    """``t0`` bound for ``c_p > c_1 >= c_2 >= ... >= c_{p-1}``."""
    d = np.asarray(d, dtype=float)
    c = np.asarray(c, dtype=float)
    if d.size < 2:
        raise DomainError("need p >= 2")
    head = c[:-1]
    if not (c[-1] > c[0] and np.all(np.diff(head) <= _ORDER_RTOL * np.abs(head[1:]))):
        raise OrderingError(f"t0 bound needs c_p > c_1 >= ... >= c_(p-1), got {c}")
    d1, dq, dp = d[0], d[-2], d[-1]
    c1, cq, cp = c[0], c[-2], c[-1]
    first = _ratio_or_inf(c1 * cq * (dq - dp), c1 * dq - cq * dp, c1 * dq)
    second = _ratio_or_inf(cq * cp * (d1 * dq - dp**2), cp * d1 * dq - cq * dp**2, cp * d1 * dq)
    return float(min(first, second))


def verify_stable(phi, d, c, ordering: str = "increasing") -> StabilityReport:
    """Check that the estimator never raises the condition number.

    ``phi(w)/w`` is nonincreasing for the shrinkage functions in this
    package, so its supremum is the ``w -> 0`` limit and the worst case
    over all data is the condition number at that ratio.
    """
    d = np.asarray(d, dtype=float)
    c = np.asarray(c, dtype=float)
    if ordering == "increasing":
        t0 = t0_bound_increasing(d, c)
    elif ordering == "case2":
        t0 = t0_bound_case2(d, c)
    else:
        raise ValueError(f"unknown ordering {ordering!r}; expected 'increasing' or 'case2'")
    t_sup = float(phi.sup_ratio())
    k_ls = kappa_ls(d)
    if t_sup >= 1:
        return StabilityReport(k_ls, np.inf, t_sup, False, t0, False)
    k_est = kappa_estimator(d, c, t_sup)
    return StabilityReport(
        kappa_ls=k_ls,
        kappa_est=k_est,
        t_used=t_sup,
        improved=bool(k_est <= k_ls * (1 + 1e-12)),
        t0=t0,
        guaranteed=bool(t_sup <= t0),
    )
