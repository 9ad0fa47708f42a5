"""Adaptive ridge-type shrinkage estimators in canonical coordinates.

An estimator is a pair ``(c, phi)``: a vector of per-coordinate factors
``c_i >= 1`` and a scalar shrinkage function ``phi`` of

    W = sum_i x_i^2 / (c_i d_i) / s.

Coordinate ``i`` of the estimate is ``(1 - t / c_i) x_i`` with
``t = phi(W) / W``. Two shrinkage functions are provided: the closed-form
``SimpleBayes`` one and ``GeneralizedBayes``, the posterior-mean ratio
under the hierarchical prior, evaluated by quadrature.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np
from scipy.interpolate import CubicSpline

from .canonical import CanonicalForm, DesignData
from .errors import DataError, DomainError
from .quadrature import beta_kernel_integral

CACHE_W_MAX = 1e8
CACHE_KNOTS = 2048


class PhiFn(Protocol):
    def __call__(self, w): ...

    def ratio(self, w): ...

    def sup_ratio(self) -> float: ...


# ---------------------------------------------------------------------------
# shrinkage functions


@dataclass(frozen=True)
class ZeroShrinkage:
    """``phi == 0``; the estimator reduces to least squares."""

    def __call__(self, w):
        return np.zeros_like(np.asarray(w, dtype=float))

    def ratio(self, w):
        return np.zeros_like(np.asarray(w, dtype=float))

    def sup_ratio(self) -> float:
        return 0.0

    def limit(self) -> float:
        return 0.0


def phi_sb(w, alpha: float, gamma: float):
    """``alpha w / (gamma (alpha + 1) + w)``."""
    w = np.asarray(w, dtype=float)
    return alpha * w / (gamma * (alpha + 1.0) + w)


@dataclass(frozen=True)
class SimpleBayes:
    """Closed-form shrinkage ``phi(w) = alpha w / (gamma (alpha + 1) + w)``.

    ``gamma >= 1`` keeps the estimator generalized Bayes; smaller positive
    values are accepted since the minimax and stability guarantees only
    need ``gamma >= alpha / ((alpha + 1) v)``.
    """

    alpha: float
    gamma: float = 1.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise DomainError(f"alpha must be positive, got {self.alpha}")
        if not self.gamma > 0:
            raise DomainError(f"gamma must be positive, got {self.gamma}")

    @property
    def is_generalized_bayes(self) -> bool:
        return self.gamma >= 1.0

    def __call__(self, w):
        return phi_sb(w, self.alpha, self.gamma)

    def ratio(self, w):
        w = np.asarray(w, dtype=float)
        return self.alpha / (self.gamma * (self.alpha + 1.0) + w)

    def sup_ratio(self) -> float:
        return self.alpha / (self.gamma * (self.alpha + 1.0))

    def limit(self) -> float:
        return self.alpha


@dataclass(frozen=True)
class GBHyper:
    """Hyperparameters of the hierarchical prior.

    ``lambda`` has density proportional to ``lambda^a (1 - gamma lambda)^b``
    on ``[0, 1/gamma]`` and the precision ``eta`` proportional to ``eta^e``.
    """

    a: float
    b: float
    e: float
    gamma: float = 1.0

    def check(self, p: int, n: int, permissive: bool = False) -> None:
        """Raise ``DomainError`` unless the hyperparameters suit ``(p, n)``.

        The default region is the one on which ``phi`` is monotone with the
        stated limits (``b >= 0``, ``-p/2 - 1 < a < n/2 + e``). ``permissive``
        only asks for the integrals to exist (``b > -1``, ``a > -p/2 - 1``).
        """
        a, b, e, gamma = self.a, self.b, self.e, self.gamma
        problems = []
        if not gamma >= 1:
            problems.append(f"gamma >= 1 (got {gamma})")
        if not e > -p / 2 - n / 2 - 2:
            problems.append(f"e > -p/2 - n/2 - 2 = {-p / 2 - n / 2 - 2:g} (got {e})")
        if not a > -p / 2 - 1:
            problems.append(f"a > -p/2 - 1 = {-p / 2 - 1:g} (got {a})")
        if permissive:
            if not b > -1:
                problems.append(f"b > -1 (got {b})")
        else:
            if not b >= 0:
                problems.append(f"b >= 0 (got {b})")
            if not a < n / 2 + e:
                problems.append(f"a < n/2 + e = {n / 2 + e:g} (got {a})")
        if problems:
            raise DomainError(
                f"hyperparameters outside the {'integrable' if permissive else 'minimax'} "
                f"region for p={p}, n={n}: need " + "; ".join(problems)
            )

    def simple_b(self, p: int, n: int) -> float:
        """The ``b`` value for which ``phi_gb`` collapses to the closed form."""
        return n / 2 - self.a + self.e - 1

    def simple_alpha(self, p: int, n: int) -> float:
        return (p / 2 + self.a + 1) / (n / 2 + self.e - self.a)


def gb_limit_at_infinity(hyper: GBHyper, p: int, n: int) -> float:
    return (p / 2 + hyper.a + 1) / (n / 2 + hyper.e - hyper.a)


def gb_ratio_at_zero(hyper: GBHyper, p: int, n: int) -> float:
    """``lim_{w -> 0} phi_gb(w) / w``, also the supremum of the ratio."""
    return (p / 2 + hyper.a + 1) / (hyper.gamma * (p / 2 + hyper.a + hyper.b + 2))


def _phi_gb_scalar(w: float, hyper: GBHyper, p: int, n: int, form: str) -> float:
    if w == 0.0:
        return 0.0
    a, b, e, gamma = hyper.a, hyper.b, hyper.e, hyper.gamma
    shape = p / 2 + a
    if form == "transformed":
        q = w / (w + gamma)
        expo = n / 2 + e - a - b
        num = beta_kernel_integral(shape + 1, b, q, expo - 1)
        den = beta_kernel_integral(shape, b, q, expo)
        return w * num / ((w + gamma) * den)
    if form == "direct":
        q = -w / gamma
        power = -(p / 2 + n / 2 + e + 2)
        num = beta_kernel_integral(shape + 1, b, q, power)
        den = beta_kernel_integral(shape, b, q, power)
        return w * num / (gamma * den)
    raise ValueError(f"unknown form {form!r}; expected 'transformed' or 'direct'")


def phi_gb(w, hyper: GBHyper, p: int, n: int, *, form: str = "transformed",
           permissive: bool = False):
    """Generalized Bayes shrinkage function by adaptive quadrature.

    ``form="transformed"`` integrates against ``1 - t w / (w + gamma)``,
    which stays bounded for large ``w``; ``form="direct"`` integrates
    against ``(1 + w t / gamma)`` and serves as a cross-check.
    """
    hyper.check(p, n, permissive=permissive)
    w_arr = np.asarray(w, dtype=float)
    if np.any(w_arr < 0) or not np.all(np.isfinite(w_arr)):
        raise DomainError("w must be finite and nonnegative")
    out = np.array([_phi_gb_scalar(float(v), hyper, p, n, form) for v in w_arr.ravel()])
    out = out.reshape(w_arr.shape)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class GeneralizedBayes:
    """Generalized Bayes shrinkage function for a fixed ``(hyper, p, n)``.

    With ``cached=True`` a cubic spline of ``phi(w) (1 + w) / w`` in
    ``log(1 + w)`` is built once, at construction, on
    ``[0, CACHE_W_MAX]``; larger ``w`` fall back to quadrature.
    """

    hyper: GBHyper
    p: int
    n: int
    cached: bool = True
    permissive: bool = False
    _spline: CubicSpline | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.hyper.check(self.p, self.n, permissive=self.permissive)
        if self.cached:
            z = np.linspace(0.0, math.log1p(CACHE_W_MAX), CACHE_KNOTS)
            w = np.expm1(z)
            g = np.empty_like(w)
            g[0] = gb_ratio_at_zero(self.hyper, self.p, self.n)
            for i in range(1, w.size):
                phi = _phi_gb_scalar(float(w[i]), self.hyper, self.p, self.n, "transformed")
                g[i] = phi * (1.0 + w[i]) / w[i]
            object.__setattr__(self, "_spline", CubicSpline(z, g))

    @property
    def is_minimax_region(self) -> bool:
        try:
            self.hyper.check(self.p, self.n)
        except DomainError:
            return False
        return True

    def _scaled(self, w: np.ndarray) -> np.ndarray:
        # phi(w) (1 + w) / w, finite on [0, inf)
        out = np.empty_like(w)
        inside = w <= CACHE_W_MAX if self._spline is not None else np.zeros(w.shape, bool)
        if np.any(inside):
            out[inside] = self._spline(np.log1p(w[inside]))
        for idx in np.flatnonzero(~inside):
            v = float(w.flat[idx])
            if v == 0.0:
                out.flat[idx] = gb_ratio_at_zero(self.hyper, self.p, self.n)
            else:
                phi = _phi_gb_scalar(v, self.hyper, self.p, self.n, "transformed")
                out.flat[idx] = phi * (1.0 + v) / v
        return out

    def __call__(self, w):
        w = np.asarray(w, dtype=float)
        val = self._scaled(np.atleast_1d(w)) * np.atleast_1d(w) / (1.0 + np.atleast_1d(w))
        return float(val[0]) if w.ndim == 0 else val.reshape(w.shape)

    def ratio(self, w):
        w = np.asarray(w, dtype=float)
        val = self._scaled(np.atleast_1d(w)) / (1.0 + np.atleast_1d(w))
        return float(val[0]) if w.ndim == 0 else val.reshape(w.shape)

    def sup_ratio(self) -> float:
        return gb_ratio_at_zero(self.hyper, self.p, self.n)

    def limit(self) -> float:
        return gb_limit_at_infinity(self.hyper, self.p, self.n)


# ---------------------------------------------------------------------------
# estimators


def _as_factors(c) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    if c.ndim != 1:
        raise DataError(f"shrinkage factors must be a vector, got shape {c.shape}")
    if np.any(c < 1.0) or not np.all(np.isfinite(c)):
        raise DomainError(f"shrinkage factors must satisfy c_i >= 1, got {c}")
    return c


@dataclass(frozen=True)
class ShrinkageSpec:
    """Per-coordinate factors ``c`` and the shrinkage function ``phi``."""

    c: np.ndarray
    phi: PhiFn

    def __post_init__(self):
        c = _as_factors(self.c)
        c.setflags(write=False)
        object.__setattr__(self, "c", c)


def w_statistic(x, c, d, s):
    """``sum_i x_i^2 / (c_i d_i) / s``; rows of a 2-D ``x`` are separate draws."""
    x = np.asarray(x, dtype=float)
    s = np.asarray(s, dtype=float)
    c = np.asarray(c, dtype=float)
    d = np.asarray(d, dtype=float)
    if x.shape[-1] != c.shape[0] or c.shape != d.shape:
        raise DataError(f"dimension mismatch: x {x.shape}, c {c.shape}, d {d.shape}")
    if np.any(s <= 0):
        raise DomainError("residual sum of squares must be positive")
    w = np.sum(x**2 / (c * d), axis=-1) / s
    return float(w) if np.ndim(w) == 0 else w


def shrink(x, s, c, d, phi: PhiFn):
    """Apply the estimator to one draw or a batch (rows of ``x``).

    Returns ``(theta_hat, t)`` with ``t = phi(W) / W``; at ``W = 0`` the
    ratio's limit is used, which leaves ``theta_hat = 0``.
    """
    x = np.asarray(x, dtype=float)
    c = np.asarray(c, dtype=float)
    w = w_statistic(x, c, d, s)
    t = np.asarray(phi.ratio(w), dtype=float)
    if np.any(t >= c.min()):
        warnings.warn(
            f"shrinkage ratio t = {np.max(t):.6g} reaches min c_i = {c.min():.6g}; "
            "coordinates change sign",
            RuntimeWarning,
            stacklevel=2,
        )
    theta = (1.0 - t[..., None] / c) * x
    return theta, (float(t) if t.ndim == 0 else t)


def estimate_theta(canon: CanonicalForm, spec: ShrinkageSpec) -> np.ndarray:
    if spec.c.shape[0] != canon.p:
        raise DataError(f"c has length {spec.c.shape[0]}, expected {canon.p}")
    theta, _ = shrink(canon.x, canon.s, spec.c, canon.d, spec.phi)
    return theta


def ridge_hk(data: DesignData, k: float) -> np.ndarray:
    """Ordinary ridge estimate ``(A'A + k I)^{-1} A'y``."""
    if not k > 0:
        raise DomainError(f"ridge constant k must be > 0, got {k}")
    a = data.a_matrix
    return np.linalg.solve(a.T @ a + k * np.eye(data.p), a.T @ data.y)


def generalized_ridge(canon: CanonicalForm, rotation, k_vec, data: DesignData) -> np.ndarray:
    """``P (D^{-1} + K)^{-1} P' A'y`` with ``K = diag(k_vec)``."""
    k_vec = np.asarray(k_vec, dtype=float)
    if k_vec.shape != canon.d.shape:
        raise DataError(f"k_vec has shape {k_vec.shape}, expected {canon.d.shape}")
    if np.any(k_vec < 0):
        raise DomainError("ridge constants must be nonnegative")
    rotation = np.asarray(rotation, dtype=float)
    rotated = rotation.T @ (data.a_matrix.T @ data.y)
    return rotation @ (rotated / (1.0 / canon.d + k_vec))


def implied_ridge_k(t: float, c, d) -> np.ndarray:
    """Ridge constants ``t / (d_i (c_i - t))`` reproducing the shrinkage ``t``."""
    c = np.asarray(c, dtype=float)
    d = np.asarray(d, dtype=float)
    if not 0 <= t < c.min():
        raise DomainError(f"need 0 <= t < min c_i = {c.min():g}, got t = {t}")
    return t / (d * (c - t))
