"""Minimaxity bounds and minimax, condition-number-reducing designs.

A shrinkage function ``phi`` is minimax under loss order ``j`` when it is
nondecreasing and bounded by

    2 / (n + 2) * (sum_i q_i / max_i q_i - 2),    q_i = d_i^(1-j) / c_i.

The two constructions below choose ``c`` so that the bound is positive and
the condition number of the resulting estimator never exceeds ``d_1/d_p``.
Which one applies depends on the sign of ``sum_i (d_i/d_1)^(1-j) - 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, RegimeError
from .shrinkage import GBHyper, ShrinkageSpec, SimpleBayes, gb_limit_at_infinity
from .stability import t0_bound_case2, t0_bound_increasing

PLUS = "plus"
MINUS = "minus"
DEFAULT_CP_RATIO = 2.0


@dataclass(frozen=True)
class MinimaxDesign:
    """Shrinkage factors and simple-Bayes parameters from one construction.

    ``u`` bounds the limit of ``phi`` and ``v`` bounds ``phi(w)/w``;
    ``alpha <= u`` and ``alpha / (gamma (alpha + 1)) <= v`` by construction.
    """

    c: np.ndarray
    u: float
    v: float
    alpha: float
    gamma: float
    branch: str
    eta_or_nu_star: float | None
    eta_or_nu_used: float
    j: float
    n: int

    def phi(self) -> SimpleBayes:
        return SimpleBayes(self.alpha, self.gamma)

    def spec(self) -> ShrinkageSpec:
        return ShrinkageSpec(self.c, self.phi())

    @property
    def ordering(self) -> str:
        return "increasing" if self.branch == PLUS else "case2"


def geometric_spectrum(mu: float, p: int = 9) -> np.ndarray:
    """``d = (mu^h, mu^(h-1), ..., mu^-h)`` with ``h = (p - 1)/2``; p odd."""
    if not mu > 1:
        raise DomainError(f"mu must exceed 1, got {mu}")
    if p % 2 != 1:
        raise DomainError(f"geometric spectrum needs odd p, got {p}")
    half = (p - 1) // 2
    return np.array([mu**k for k in range(half, -half - 1, -1)], dtype=float)


def _check_d(d) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    if d.ndim != 1 or d.size < 1:
        raise DomainError("d must be a nonempty vector")
    if np.any(d <= 0) or not np.all(np.isfinite(d)):
        raise DomainError(f"d must be positive and finite, got {d}")
    if np.any(np.diff(d) > 0):
        raise DomainError(f"d must be sorted in nonincreasing order, got {d}")
    return d


def regime_indicator(d, j: float) -> float:
    """``sum_i (d_i/d_1)^(1-j) - 2``; positive selects the ``plus`` construction."""
    d = _check_d(d)
    return float(np.sum((d / d[0]) ** (1 - j)) - 2)


def regime(d, j: float) -> str:
    return PLUS if regime_indicator(d, j) > 0 else MINUS


def minimax_phi_bound(d, c, j: float, n: int) -> float:
    """Upper bound on ``phi`` guaranteeing minimaxity under loss order ``j``.

    A nonpositive value means no nontrivial minimax ``phi`` exists for
    this ``c``.
    """
    d = np.asarray(d, dtype=float)
    c = np.asarray(c, dtype=float)
    q = d ** (1 - j) / c
    return float(2.0 / (n + 2) * (np.sum(q) / np.max(q) - 2))


def check_gb_minimax(hyper: GBHyper, d, c, j: float, n: int, p: int) -> bool:
    hyper.check(p, n)
    lhs = gb_limit_at_infinity(hyper, p, n)
    bound = minimax_phi_bound(d, c, j, n)
    return bool(0 <= lhs <= bound + 1e-12 * max(1.0, abs(bound)))


def _bisect_decreasing(f, lo: float, hi: float) -> float:
    """Root of a strictly decreasing ``f`` with ``f(lo) > 0 > f(hi)``."""
    f_lo, f_hi = f(lo), f(hi)
    if not (f_lo > 0 > f_hi):
        raise DomainError(f"root not bracketed: f({lo})={f_lo}, f({hi})={f_hi}")
    while True:
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        f_mid = f(mid)
        if f_mid == 0:
            return mid
        if f_mid > 0:
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
    return lo if abs(f_lo) <= abs(f_hi) else hi


def _expand_bracket(f, lo: float, hi: float, limit: float = 2.0**40) -> float:
    while f(hi) >= 0:
        hi *= 2
        if hi > limit:
            raise DomainError("no sign change: d_2/d_1 is too close to 1 to bracket the root")
    return hi


def solve_eta_star(d) -> float | None:
    """Exponent ``eta`` with ``sum_i (d_i/d_1)^eta = 2``; ``None`` if ``d_1 = d_2``."""
    d = _check_d(d)
    if d.size < 3:
        raise DomainError(f"need p >= 3, got p = {d.size}")
    r = d / d[0]
    if r[1] >= 1.0:
        return None

    def f(eta):
        return math.fsum(r**eta) - 2.0

    lo = 1e-12
    hi = _expand_bracket(f, lo, 64.0)
    return _bisect_decreasing(f, lo, hi)


def solve_nu_star(d, j: float) -> float | None:
    """Exponent ``nu`` in ``(0, 1-j)`` with ``sum_{i<p} (d_i/d_1)^nu = 2``.

    Only defined when ``sum_i (d_i/d_1)^(1-j) <= 2``; returns ``None`` for
    ``p = 3``.
    """
    d = _check_d(d)
    if d.size < 3:
        raise DomainError(f"need p >= 3, got p = {d.size}")
    ind = regime_indicator(d, j)
    if ind > 0:
        raise RegimeError(
            f"sum (d_i/d_1)^(1-j) - 2 = {ind:.6g} > 0: use the nondecreasing-c construction"
        )
    if d.size == 3:
        return None
    r = (d / d[0])[:-1]

    def f(nu):
        return math.fsum(r**nu) - 2.0

    return _bisect_decreasing(f, 0.0, 1.0 - j)


def _gamma_for(alpha: float, v: float, gamma_floor: bool) -> float:
    if not v > 0:
        raise DomainError(
            f"t0 bound is {v:g}: no positive shrinkage keeps the condition number down "
            "for this spectrum (tied smallest eigenvalues)"
        )
    gamma = alpha / ((alpha + 1.0) * v)
    return max(1.0, gamma) if gamma_floor else gamma


def design_plus(d, j: float, n: int, eta_pick: float | None = None,
                gamma_floor: bool = True) -> MinimaxDesign:
    """Nondecreasing-``c`` construction, valid when the regime indicator is positive.

    ``c_i = (d_1/d_i)^(j - 1 + eta)`` with ``eta`` strictly between
    ``max(0, 1-j)`` and the root ``eta*`` (the midpoint by default). The
    simple-Bayes parameters are ``alpha = u`` and
    ``gamma = alpha / ((alpha + 1) v)``, floored at 1 unless
    ``gamma_floor=False``.
    """
    d = _check_d(d)
    p = d.size
    if p < 3:
        raise DomainError(f"need p >= 3, got p = {p}")
    ind = regime_indicator(d, j)
    if not ind > 0:
        raise RegimeError(
            f"sum (d_i/d_1)^(1-j) - 2 = {ind:.6g} <= 0: nondecreasing-c construction needs > 0"
        )
    lower = max(0.0, 1.0 - j)
    eta_star = solve_eta_star(d)
    if eta_pick is None:
        eta = lower + 1.0 if eta_star is None else 0.5 * (lower + eta_star)
    else:
        eta = float(eta_pick)
        upper = np.inf if eta_star is None else eta_star
        if not lower < eta < upper:
            raise DomainError(f"eta must lie in ({lower:g}, {upper:g}), got {eta}")
    r = d / d[0]
    c = (d[0] / d) ** (j - 1 + eta)
    assert np.all(c >= 1.0) and np.all(np.diff(c) >= 0)
    u = 2.0 / (n + 2) * (math.fsum(r**eta) - 2.0)
    v = t0_bound_increasing(d, c)
    if not np.isfinite(v):
        v = 1.0  # all eigenvalues equal
    alpha = u
    return MinimaxDesign(
        c=c, u=float(u), v=float(v), alpha=float(alpha),
        gamma=float(_gamma_for(alpha, v, gamma_floor)),
        branch=PLUS, eta_or_nu_star=eta_star, eta_or_nu_used=eta, j=j, n=n,
    )


def design_minus(d, j: float, n: int, nu_pick: float | None = None,
                 cp_ratio: float = DEFAULT_CP_RATIO,
                 gamma_floor: bool = True) -> MinimaxDesign:
    """Construction for a nonpositive regime indicator.

    ``c_i = (d_i/d_{p-1})^(1 - j - nu)`` for ``i < p`` and
    ``c_p = cp_ratio * c_1``; ``nu`` defaults to half the root ``nu*``
    (and is 0 when ``p = 3``).
    """
    d = _check_d(d)
    p = d.size
    if p < 3:
        raise DomainError(f"need p >= 3, got p = {p}")
    if not cp_ratio > 1:
        raise DomainError(f"cp_ratio must exceed 1, got {cp_ratio}")
    nu_star = solve_nu_star(d, j)
    if nu_star is None:
        if nu_pick not in (None, 0, 0.0):
            raise DomainError("with p = 3 the exponent nu must be 0")
        nu = 0.0
    elif nu_pick is None:
        nu = 0.5 * nu_star
    else:
        nu = float(nu_pick)
        if not 0 <= nu < nu_star:
            raise DomainError(f"nu must lie in [0, {nu_star:g}), got {nu}")
    r = d / d[0]
    c = np.empty(p)
    c[:-1] = (d[:-1] / d[-2]) ** (1 - j - nu)
    c[-1] = cp_ratio * c[0]
    assert np.all(c >= 1.0)
    u = 2.0 / (n + 2) * (math.fsum(r[:-1] ** nu) - 2.0 + c[0] / c[-1] * r[-1] ** (1 - j))
    v = t0_bound_case2(d, c)
    if not np.isfinite(v):
        v = 1.0
    alpha = u
    return MinimaxDesign(
        c=c, u=float(u), v=float(v), alpha=float(alpha),
        gamma=float(_gamma_for(alpha, v, gamma_floor)),
        branch=MINUS, eta_or_nu_star=nu_star, eta_or_nu_used=nu, j=j, n=n,
    )


def auto_design(d, j: float, n: int, *, eta_pick: float | None = None,
                nu_pick: float | None = None, cp_ratio: float = DEFAULT_CP_RATIO,
                gamma_floor: bool = True) -> MinimaxDesign:
    """Pick the construction from the sign of the regime indicator."""
    if regime(d, j) == PLUS:
        return design_plus(d, j, n, eta_pick=eta_pick, gamma_floor=gamma_floor)
    return design_minus(d, j, n, nu_pick=nu_pick, cp_ratio=cp_ratio, gamma_floor=gamma_floor)


def loss_robustness_range(j: float, eta_used: float) -> tuple[float, float]:
    """Open interval of loss orders ``k`` under which a nondecreasing-c
    design built for order ``j`` stays minimax."""
    return (float(j), float(j) + float(eta_used))


def gb_hyper_for(design: MinimaxDesign, p: int, b: float = 0.0, e: float = -1.0) -> GBHyper:
    """Prior hyperparameters whose ``phi_gb`` meets a design's ``u`` and ``v``.

    ``a`` is solved from ``lim phi_gb = u`` and ``gamma`` from
    ``sup phi_gb(w)/w = v``, floored at 1 so the prior stays proper in
    ``lambda``.
    """
    n = design.n
    k = n / 2 + e + p / 2 + 1
    a1 = design.u * k / (1.0 + design.u)
    gamma = max(1.0, a1 / ((a1 + b + 1.0) * design.v))
    return GBHyper(a=a1 - p / 2 - 1, b=b, e=e, gamma=gamma)
