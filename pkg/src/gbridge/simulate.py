"""Monte Carlo risk and condition-number experiments in canonical form.

Draws are generated per batch from a counter-based Philox stream keyed by
``(seed, cell_id, batch)``, and batch totals are reduced in batch order,
so results do not depend on how many worker threads run the batches.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError
from .minimax import MINUS, PLUS, MinimaxDesign, auto_design, geometric_spectrum, solve_eta_star
from .shrinkage import ShrinkageSpec, shrink
from .stability import kappa_estimator, kappa_ls

DEFAULT_REPS = 50_000
DEFAULT_SEED = 20050801
N_BATCHES = 100


# ---------------------------------------------------------------------------
# error distributions


@dataclass(frozen=True)
class Normal:
    name = "normal"

    def radial(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.ones(size)


@dataclass(frozen=True)
class StudentT:
    """Multivariate t: a Gaussian vector divided by an independent chi factor."""

    df: float
    name = "student_t"

    def __post_init__(self):
        if not self.df > 2:
            raise DomainError(f"Student t needs df > 2 for finite variance, got {self.df}")

    def radial(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.sqrt(self.df / rng.chisquare(self.df, size))


@dataclass(frozen=True)
class ScaleMixture:
    """Gaussian scale mixture with finitely many scales."""

    scales: tuple[float, ...]
    weights: tuple[float, ...]
    name = "scale_mixture"

    def __post_init__(self):
        scales = tuple(float(s) for s in self.scales)
        weights = tuple(float(w) for w in self.weights)
        if len(scales) != len(weights) or not scales:
            raise DomainError("scales and weights must be nonempty and of equal length")
        if any(s <= 0 for s in scales) or any(w < 0 for w in weights):
            raise DomainError("scales must be positive and weights nonnegative")
        if abs(math.fsum(weights) - 1.0) > 1e-12:
            raise DomainError(f"mixture weights must sum to 1, got {math.fsum(weights)}")
        object.__setattr__(self, "scales", scales)
        object.__setattr__(self, "weights", weights)

    def radial(self, rng: np.random.Generator, size: int) -> np.ndarray:
        idx = rng.choice(len(self.scales), size=size, p=self.weights)
        return np.asarray(self.scales)[idx]


ErrorModel = Normal | StudentT | ScaleMixture


def sample_canonical(theta, d, sigma: float, n: int, model: ErrorModel,
                     stream: np.random.Generator, size: int | None = None):
    """Draw ``(x, s)`` from the spherically symmetric canonical model.

    A ``(p + n)``-vector ``eps`` is drawn from ``model``; then
    ``x_i = theta_i + sigma sqrt(d_i) eps_i`` and
    ``s = sigma^2 sum_{i > p} eps_i^2``. With ``size`` given, ``x`` has
    ``size`` rows and ``s`` is a vector.
    """
    theta = np.asarray(theta, dtype=float)
    d = np.asarray(d, dtype=float)
    p = theta.shape[0]
    m = 1 if size is None else size
    eps = stream.standard_normal((m, p + n))
    eps *= model.radial(stream, m)[:, None]
    x = theta + sigma * np.sqrt(d) * eps[:, :p]
    s = sigma**2 * np.sum(eps[:, p:] ** 2, axis=1)
    if size is None:
        return x[0], float(s[0])
    return x, s


def loss_eval(delta, theta, d, j: float, sigma: float):
    """``sum_i (delta_i - theta_i)^2 / d_i^j / sigma^2`` (row-wise for 2-D input)."""
    diff = np.asarray(delta, dtype=float) - np.asarray(theta, dtype=float)
    out = np.sum(diff**2 / np.asarray(d, dtype=float) ** j, axis=-1) / sigma**2
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# risk and expected condition number


@dataclass(frozen=True)
class SimConfig:
    """One simulation cell.

    Either ``d`` or ``mu`` (with ``p = 9``) fixes the spectrum. Every
    coordinate of the mean is ``theta_value``.
    """

    n: int
    j: float
    estimator: ShrinkageSpec | MinimaxDesign
    theta_value: float = 0.0
    d: np.ndarray | None = None
    mu: float | None = None
    p: int | None = None
    sigma: float = 1.0
    reps: int = DEFAULT_REPS
    seed: int = DEFAULT_SEED
    cell_id: int = 0
    error_model: ErrorModel = field(default_factory=Normal)

    def __post_init__(self):
        if (self.d is None) == (self.mu is None):
            raise ConfigError("give exactly one of d and mu")
        if self.mu is not None:
            if self.p not in (None, 9):
                raise ConfigError("mu presets need p = 9")
            d = geometric_spectrum(self.mu, 9)
        else:
            d = np.asarray(self.d, dtype=float)
            if d.ndim != 1 or np.any(d <= 0) or np.any(np.diff(d) > 0):
                raise ConfigError("d must be a positive nonincreasing vector")
        if self.p is not None and self.p != d.size:
            raise ConfigError(f"p = {self.p} does not match len(d) = {d.size}")
        if d.size < 3:
            raise ConfigError("need p >= 3")
        if self.n < 1:
            raise ConfigError("need n >= 1")
        if not self.sigma > 0:
            raise ConfigError("sigma must be positive")
        if self.reps < 10:
            raise ConfigError("need reps >= 10")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")
        if self.spec.c.shape[0] != d.size:
            raise ConfigError(f"estimator has {self.spec.c.shape[0]} factors, p = {d.size}")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "p", d.size)

    @property
    def spec(self) -> ShrinkageSpec:
        est = self.estimator
        return est.spec() if isinstance(est, MinimaxDesign) else est

    @property
    def theta(self) -> np.ndarray:
        return np.full(self.p, float(self.theta_value))


@dataclass(frozen=True)
class SimResult:
    risk_ratio: float
    risk_ratio_se: float
    ecn_ratio: float
    ecn_ratio_se: float
    reps_used: int
    max_kappa: float


def batch_sizes(reps: int, batches: int = N_BATCHES) -> list[int]:
    b = min(batches, reps)
    return [reps // b + (i < reps % b) for i in range(b)]


def substream(seed: int, cell_id: int, batch: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(cell_id, batch))
    return np.random.Generator(np.random.Philox(ss))


def _run_batch(config: SimConfig, batch: int, size: int):
    rng = substream(config.seed, config.cell_id, batch)
    spec = config.spec
    theta = config.theta
    x, s = sample_canonical(theta, config.d, config.sigma, config.n,
                            config.error_model, rng, size)
    est, t = shrink(x, s, spec.c, config.d, spec.phi)
    loss_est = loss_eval(est, theta, config.d, config.j, config.sigma)
    loss_ls = loss_eval(x, theta, config.d, config.j, config.sigma)
    kappa = kappa_estimator(config.d, spec.c, t)
    rel = kappa / kappa_ls(config.d)
    return float(np.sum(loss_est)), float(np.sum(loss_ls)), float(np.sum(rel)), size, float(np.max(kappa))


def risk_and_ecn(config: SimConfig, threads: int = 1) -> SimResult:
    """Risk ratio against least squares and relative expected condition number.

    Both estimators see the same draws. Standard errors come from
    nonoverlapping batch means (delta method for the risk ratio).
    """
    sizes = batch_sizes(config.reps)
    jobs = list(enumerate(sizes))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda job: _run_batch(config, *job), jobs))
    else:
        parts = [_run_batch(config, *job) for job in jobs]

    num = np.array([p[0] for p in parts])
    den = np.array([p[1] for p in parts])
    ecn = np.array([p[2] for p in parts])
    m = np.array([p[3] for p in parts], dtype=float)
    total = int(m.sum())
    num_tot, den_tot, ecn_tot = math.fsum(num), math.fsum(den), math.fsum(ecn)
    ratio = num_tot / den_tot
    ecn_ratio = ecn_tot / total
    b = len(parts)
    resid = (num / m - ratio * den / m) / (den_tot / total)
    risk_se = float(np.std(resid, ddof=1) / math.sqrt(b)) if b > 1 else 0.0
    ecn_se = float(np.std(ecn / m, ddof=1) / math.sqrt(b)) if b > 1 else 0.0
    return SimResult(
        risk_ratio=ratio,
        risk_ratio_se=risk_se,
        ecn_ratio=ecn_ratio,
        ecn_ratio_se=ecn_se,
        reps_used=total,
        max_kappa=max(p[4] for p in parts),
    )


# ---------------------------------------------------------------------------
# moment identities


@dataclass(frozen=True)
class IdentityReport:
    name: str
    lhs: float
    rhs: float
    se: float
    passed: bool


def _h_constant(x, s, i):
    return np.ones_like(s), np.zeros_like(s)


def _h_linear(x, s, i):
    return x[:, i], np.ones_like(s)


def _h_quadratic(x, s, i):
    return np.sum(x**2, axis=1) + s, 2.0 * x[:, i]


def _h_shrinkage(x, s, i):
    denom = s + np.sum(x**2, axis=1)
    h = x[:, i] * s / denom
    dh = s / denom - 2.0 * x[:, i] ** 2 * s / denom**2
    return h, dh


STEIN_CATALOG = {
    "constant": _h_constant,
    "linear": _h_linear,
    "quadratic": _h_quadratic,
    "shrinkage": _h_shrinkage,
}

CHISQ_CATALOG = {
    "one": (lambda s: np.ones_like(s), lambda s: np.zeros_like(s)),
    "linear": (lambda s: s, lambda s: np.ones_like(s)),
    "reciprocal": (lambda s: 1.0 / (1.0 + s), lambda s: -1.0 / (1.0 + s) ** 2),
}


def _paired_report(name, lhs_draws, rhs_draws, sigmas=4.0):
    diff = lhs_draws - rhs_draws
    se = float(np.std(diff, ddof=1) / math.sqrt(diff.size))
    lhs, rhs = float(np.mean(lhs_draws)), float(np.mean(rhs_draws))
    return IdentityReport(name, lhs, rhs, se, bool(abs(lhs - rhs) <= sigmas * se))


def stein_identity_check(h, theta, d, sigma: float, n: int, reps: int,
                         stream: np.random.Generator, coord: int = 0) -> IdentityReport:
    """Monte Carlo check of ``E[(X_i - theta_i) h] = d_i sigma^2 E[dh/dx_i]``.

    ``h`` is a catalog name or a callable ``(x, s, i) -> (h, dh/dx_i)``.
    Passes when the two sides differ by at most 4 standard errors of the
    paired difference.
    """
    fn = STEIN_CATALOG[h] if isinstance(h, str) else h
    name = h if isinstance(h, str) else getattr(h, "__name__", "h")
    theta = np.asarray(theta, dtype=float)
    d = np.asarray(d, dtype=float)
    x, s = sample_canonical(theta, d, sigma, n, Normal(), stream, reps)
    hv, dh = fn(x, s, coord)
    return _paired_report(name, (x[:, coord] - theta[coord]) * hv, d[coord] * sigma**2 * dh)


def chisq_identity_check(g, sigma: float, n: int, reps: int,
                         stream: np.random.Generator) -> IdentityReport:
    """Monte Carlo check of ``E[S g(S)] = sigma^2 E[n g(S) + 2 S g'(S)]``.

    ``g`` is a catalog name or a pair ``(g, g')`` of vectorised callables.
    """
    g_fn, dg_fn = CHISQ_CATALOG[g] if isinstance(g, str) else g
    name = g if isinstance(g, str) else "g"
    s = sigma**2 * stream.chisquare(n, reps)
    return _paired_report(name, s * g_fn(s), sigma**2 * (n * g_fn(s) + 2.0 * s * dg_fn(s)))


# ---------------------------------------------------------------------------
# the published experiment grid

TABLE1_MUS = (1.2, 1.6, 2.0, 2.4)
TABLE1_THETAS = (0.0, 0.5, 1.0, 1.5, 2.0)
TABLE1_LOSSES = (0, 1, 2)
TABLE1_N = 10
TABLE1_P = 9
PROTOCOLS = ("stated", "published")

# (mu, theta, j) -> (risk ratio, relative expected condition number)
REFERENCE_TABLE1 = {
    (1.2, 0.0, 0): (0.780, 0.761), (1.2, 0.0, 1): (0.785, 0.643), (1.2, 0.0, 2): (0.674, 0.495),
    (1.2, 0.5, 0): (0.809, 0.791), (1.2, 0.5, 1): (0.808, 0.669), (1.2, 0.5, 2): (0.703, 0.511),
    (1.2, 1.0, 0): (0.866, 0.852), (1.2, 1.0, 1): (0.857, 0.734), (1.2, 1.0, 2): (0.769, 0.565),
    (1.2, 1.5, 0): (0.912, 0.902), (1.2, 1.5, 1): (0.903, 0.806), (1.2, 1.5, 2): (0.837, 0.641),
    (1.2, 2.0, 0): (0.941, 0.935), (1.2, 2.0, 1): (0.934, 0.861), (1.2, 2.0, 2): (0.889, 0.718),
    (1.6, 0.0, 0): (0.894, 0.950), (1.6, 0.0, 1): (0.778, 0.597), (1.6, 0.0, 2): (0.955, 0.417),
    (1.6, 0.5, 0): (0.917, 0.963), (1.6, 0.5, 1): (0.801, 0.637), (1.6, 0.5, 2): (0.956, 0.425),
    (1.6, 1.0, 0): (0.950, 0.981), (1.6, 1.0, 1): (0.848, 0.723), (1.6, 1.0, 2): (0.961, 0.449),
    (1.6, 1.5, 0): (0.967, 0.989), (1.6, 1.5, 1): (0.891, 0.803), (1.6, 1.5, 2): (0.967, 0.487),
    (1.6, 2.0, 0): (0.978, 0.996), (1.6, 2.0, 1): (0.923, 0.860), (1.6, 2.0, 2): (0.973, 0.537),
    (2.0, 0.0, 0): (0.994, 0.999), (2.0, 0.0, 1): (0.778, 0.594), (2.0, 0.0, 2): (0.995, 0.415),
    (2.0, 0.5, 0): (0.994, 0.999), (2.0, 0.5, 1): (0.807, 0.652), (2.0, 0.5, 2): (0.995, 0.419),
    (2.0, 1.0, 0): (0.995, 0.999), (2.0, 1.0, 1): (0.861, 0.757), (2.0, 1.0, 2): (0.995, 0.430),
    (2.0, 1.5, 0): (0.995, 1.000), (2.0, 1.5, 1): (0.905, 0.839), (2.0, 1.5, 2): (0.996, 0.449),
    (2.0, 2.0, 0): (0.995, 1.000), (2.0, 2.0, 1): (0.934, 0.890), (2.0, 2.0, 2): (0.996, 0.475),
    (2.4, 0.0, 0): (0.994, 1.000), (2.4, 0.0, 1): (0.778, 0.593), (2.4, 0.0, 2): (0.998, 0.422),
    (2.4, 0.5, 0): (0.994, 1.000), (2.4, 0.5, 1): (0.819, 0.679), (2.4, 0.5, 2): (0.999, 0.424),
    (2.4, 1.0, 0): (0.994, 1.000), (2.4, 1.0, 1): (0.882, 0.802), (2.4, 1.0, 2): (1.000, 0.431),
    (2.4, 1.5, 0): (0.994, 1.000), (2.4, 1.5, 1): (0.925, 0.879), (2.4, 1.5, 2): (1.000, 0.442),
    (2.4, 2.0, 0): (0.994, 1.000), (2.4, 2.0, 1): (0.950, 0.921), (2.4, 2.0, 2): (1.000, 0.456),
}


def table1_cell_id(mu: float, theta: float, j: int) -> int:
    m = TABLE1_MUS.index(mu)
    t = TABLE1_THETAS.index(theta)
    k = TABLE1_LOSSES.index(j)
    return (m * len(TABLE1_THETAS) + t) * len(TABLE1_LOSSES) + k


def table1_eta_pick(j: int, protocol: str) -> float | None:
    """Exponent override for the nondecreasing-c designs of the grid.

    ``stated`` uses the midpoint rule for every spectrum. ``published``
    differs only under loss order 2, where one exponent is shared by the
    whole column: the midpoint rule at the most ill-conditioned spectrum.
    That is the parameterisation that reproduces the published L2 column.
    """
    if protocol not in PROTOCOLS:
        raise ConfigError(f"unknown protocol {protocol!r}; expected one of {PROTOCOLS}")
    if protocol == "stated" or j != 2:
        return None
    eta_star = solve_eta_star(geometric_spectrum(max(TABLE1_MUS), TABLE1_P))
    return 0.5 * (max(0.0, 1.0 - j) + eta_star)


def table1_design(mu: float, j: int, protocol: str = "stated") -> MinimaxDesign:
    """Design used for one (mu, j) column: gamma is not floored at 1."""
    d = geometric_spectrum(mu, TABLE1_P)
    return auto_design(d, j, TABLE1_N, eta_pick=table1_eta_pick(j, protocol), gamma_floor=False)


@dataclass(frozen=True)
class Table1Row:
    mu: float
    theta: float
    j: int
    result: SimResult
    regime: str
    alpha: float
    gamma: float


CSV_COLUMNS = ("mu", "theta", "j", "risk_ratio", "risk_se", "ecn_ratio", "ecn_se",
               "reps", "regime", "alpha", "gamma")


def result_row(mu, theta, j, result: SimResult, regime: str, alpha: float, gamma: float) -> list:
    return ["" if mu is None else repr(float(mu)), repr(float(theta)), repr(j) if isinstance(j, int) else repr(float(j)),
            repr(result.risk_ratio), repr(result.risk_ratio_se), repr(result.ecn_ratio),
            repr(result.ecn_ratio_se), str(result.reps_used), regime, repr(float(alpha)),
            repr(float(gamma))]


def table1(reps: int = DEFAULT_REPS, seed: int = DEFAULT_SEED, *, protocol: str = "stated",
           threads: int = 1, error_model: ErrorModel | None = None) -> list[Table1Row]:
    """Simulate the full mu x theta x loss grid, one cell at a time."""
    model = Normal() if error_model is None else error_model
    rows = []
    for mu in TABLE1_MUS:
        designs = {j: table1_design(mu, j, protocol) for j in TABLE1_LOSSES}
        for theta in TABLE1_THETAS:
            for j in TABLE1_LOSSES:
                design = designs[j]
                config = SimConfig(
                    n=TABLE1_N, j=j, estimator=design, theta_value=theta, mu=mu,
                    reps=reps, seed=seed, cell_id=table1_cell_id(mu, theta, j),
                    error_model=model,
                )
                result = risk_and_ecn(config, threads=threads)
                rows.append(Table1Row(mu, theta, j, result, design.branch,
                                      design.alpha, design.gamma))
    return rows


def table1_csv(rows: list[Table1Row]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in rows:
        writer.writerow(result_row(r.mu, r.theta, r.j, r.result, r.regime, r.alpha, r.gamma))
    return buf.getvalue()


__all__ = [
    "Normal", "StudentT", "ScaleMixture", "sample_canonical", "loss_eval", "SimConfig",
    "SimResult", "risk_and_ecn", "stein_identity_check", "chisq_identity_check",
    "IdentityReport", "table1", "table1_csv", "table1_design", "table1_cell_id",
    "REFERENCE_TABLE1", "PLUS", "MINUS",
]
