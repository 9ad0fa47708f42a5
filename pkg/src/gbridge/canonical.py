"""Reduction of a linear regression to its canonical diagonal form.

With ``(A'A)^{-1} = P diag(d) P'`` the least-squares estimate rotated by
``P'`` has independent coordinates with variances ``sigma^2 d_i``, and the
residual sum of squares ``s`` carries ``n = N - p`` degrees of freedom.
Every estimator in this package is defined on ``(x, s, d)`` and mapped back
to the coefficient scale with ``P``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, RankDeficientError

RANK_RTOL = 1e-10


@dataclass(frozen=True)
class DesignData:
    """Design matrix ``a_matrix`` (N x p) and response ``y`` (N,)."""

    a_matrix: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a_matrix, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if a.ndim != 2:
            raise DataError(f"design matrix must be 2-D, got shape {a.shape}")
        if y.ndim != 1 or y.shape[0] != a.shape[0]:
            raise DataError(
                f"response must be a vector of length {a.shape[0]}, got shape {y.shape}"
            )
        n_obs, p = a.shape
        if not n_obs > p >= 1:
            raise DataError(f"need N > p >= 1, got N={n_obs}, p={p}")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(y))):
            raise DataError("design and response must be finite")
        a.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "a_matrix", a)
        object.__setattr__(self, "y", y)

    @property
    def n_obs(self) -> int:
        return self.a_matrix.shape[0]

    @property
    def p(self) -> int:
        return self.a_matrix.shape[1]


@dataclass(frozen=True)
class CanonicalForm:
    """Canonical statistics of a regression.

    Attributes
    ----------
    x : ndarray (p,)
        Rotated least-squares estimate ``P' beta_ls``.
    s : float
        Residual sum of squares.
    d : ndarray (p,)
        Eigenvalues of ``(A'A)^{-1}``, nonincreasing.
    rotation : ndarray (p, p)
        Orthogonal eigenvector matrix ``P``.
    n : int
        Residual degrees of freedom ``N - p``.
    """

    x: np.ndarray
    s: float
    d: np.ndarray
    rotation: np.ndarray
    n: int

    @property
    def p(self) -> int:
        return self.x.shape[0]


def _fix_signs(v: np.ndarray) -> np.ndarray:
    # first entry above noise level in each column made positive
    v = v.copy()
    for k in range(v.shape[1]):
        col = v[:, k]
        big = np.flatnonzero(np.abs(col) > 1e-12 * np.max(np.abs(col)))
        if col[big[0]] < 0:
            v[:, k] = -col
    return v


def _svd(data: DesignData):
    _, sv, vt = np.linalg.svd(data.a_matrix, full_matrices=False)
    if sv[-1] <= RANK_RTOL * sv[0]:
        raise RankDeficientError(
            f"design matrix is rank deficient: smallest singular value {sv[-1]:.3e} "
            f"<= {RANK_RTOL:g} * largest ({sv[0]:.3e})"
        )
    return sv, vt


def decompose(data: DesignData) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of ``(A'A)^{-1}`` computed from the SVD of ``A``.

    Returns
    -------
    rotation : ndarray (p, p)
        Orthogonal ``P`` with columns ordered to match ``d``.
    d : ndarray (p,)
        ``1 / sigma_i^2`` sorted in nonincreasing order. Ties keep SVD order.
    """
    sv, vt = _svd(data)
    d_svd = 1.0 / sv**2
    order = np.argsort(-d_svd, kind="stable")
    d = d_svd[order]
    rotation = _fix_signs(vt.T[:, order])
    return rotation, d


def least_squares(data: DesignData) -> np.ndarray:
    """``(A'A)^{-1} A'y`` via the thin SVD."""
    u, sv, vt = np.linalg.svd(data.a_matrix, full_matrices=False)
    if sv[-1] <= RANK_RTOL * sv[0]:
        raise RankDeficientError(
            f"design matrix is rank deficient: smallest singular value {sv[-1]:.3e}"
        )
    return vt.T @ ((u.T @ data.y) / sv)


def to_canonical(data: DesignData) -> CanonicalForm:
    rotation, d = decompose(data)
    beta = least_squares(data)
    resid = data.y - data.a_matrix @ beta
    return CanonicalForm(
        x=rotation.T @ beta,
        s=float(resid @ resid),
        d=d,
        rotation=rotation,
        n=data.n_obs - data.p,
    )


def from_canonical(theta_hat, rotation) -> np.ndarray:
    """Map a canonical estimate back to coefficients: ``P theta_hat``."""
    theta_hat = np.asarray(theta_hat, dtype=float)
    rotation = np.asarray(rotation, dtype=float)
    if rotation.ndim != 2 or rotation.shape[1] != theta_hat.shape[-1]:
        raise DataError(
            f"dimension mismatch: rotation {rotation.shape}, estimate {theta_hat.shape}"
        )
    return rotation @ theta_hat


def read_design_csv(path: str | Path, header: bool = False) -> DesignData:
    """Read a CSV whose first p columns are the design and last column is y."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        if header:
            next(reader, None)
        for lineno, row in enumerate(reader, start=2 if header else 1):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                rows.append([float(cell) for cell in row])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: non-numeric value ({exc})") from None
    if not rows:
        raise DataError(f"{path}: no data rows")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise DataError(f"{path}: ragged rows (widths {sorted(widths)})")
    arr = np.array(rows)
    if arr.shape[1] < 2:
        raise DataError(f"{path}: need at least one design column and a response")
    return DesignData(arr[:, :-1], arr[:, -1])
