import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize

from gbridge.errors import DomainError, RegimeError
from gbridge.minimax import (
    MINUS,
    PLUS,
    auto_design,
    check_gb_minimax,
    design_minus,
    design_plus,
    gb_hyper_for,
    geometric_spectrum,
    loss_robustness_range,
    minimax_phi_bound,
    regime,
    regime_indicator,
    solve_eta_star,
    solve_nu_star,
)
from gbridge.shrinkage import GBHyper, gb_limit_at_infinity, gb_ratio_at_zero
from gbridge.stability import kappa_estimator, kappa_ls, t0_bound_case2, t0_bound_increasing

MUS = (1.2, 1.6, 2.0, 2.4)
N = 10


def eta_oracle(d):
    r = np.asarray(d) / d[0]
    return optimize.brentq(lambda e: np.sum(r**e) - 2, 1e-12, 200.0, xtol=1e-15, rtol=1e-15)


def nu_oracle(d, j):
    r = (np.asarray(d) / d[0])[:-1]
    return optimize.brentq(lambda v: np.sum(r**v) - 2, 0.0, 1.0 - j, xtol=1e-15, rtol=1e-15)


def descending_spectra():
    return st.lists(st.floats(0.05, 20.0), min_size=3, max_size=8).map(
        lambda xs: np.sort(np.asarray(xs))[::-1]
    )


# ---------------------------------------------------------------------------
# bound


def test_bound_with_c_proportional_to_d():
    d = geometric_spectrum(1.6)
    assert minimax_phi_bound(d, d / d[-1], 0, N) == pytest.approx(7 / 6, rel=1e-12)


def test_bound_spherical_negative_example():
    assert minimax_phi_bound([4.0, 2.0, 1.0], np.ones(3), 0, 4) == pytest.approx(-1 / 12, rel=1e-12)


@pytest.mark.parametrize("j", [0, 0.5, 1, 2, 3.5])
def test_bound_with_equalizing_c(j):
    d = geometric_spectrum(2.4)
    c = d ** (1 - j) / np.min(d ** (1 - j))
    assert minimax_phi_bound(d, c, j, N) == pytest.approx(2 * (9 - 2) / (N + 2), rel=1e-12)


def test_check_gb_minimax_examples():
    d = geometric_spectrum(1.2)
    hyper = GBHyper(-2.0, 0.0, -1.0, 1.0)
    assert gb_limit_at_infinity(hyper, 9, N) == pytest.approx(7 / 12)
    assert check_gb_minimax(hyper, d, d / d[-1], 0, N, 9)
    # spherical c with a wide spread: bound is negative, nothing qualifies
    d3 = np.array([4.0, 2.0, 1.0])
    assert not check_gb_minimax(GBHyper(-2.0, 0.0, -1.0), d3, np.ones(3), 0, 4, 3)
    with pytest.raises(DomainError):
        check_gb_minimax(GBHyper(-2.0, -1.0, -1.0), d, np.ones(9), 0, N, 9)


@settings(max_examples=50, deadline=None)
@given(p=st.integers(3, 12), n=st.integers(1, 30), seed=st.integers(0, 1000))
def test_standard_gb_choice_always_minimax_with_c_d_over_dp(p, n, seed):
    d = np.sort(np.random.default_rng(seed).uniform(0.1, 10.0, p))[::-1]
    assert check_gb_minimax(GBHyper(-2.0, 0.0, -1.0, 1.0), d, d / d[-1], 0, n, p)


# ---------------------------------------------------------------------------
# roots


def test_eta_star_closed_form():
    assert solve_eta_star([4.0, 2.0, 1.0]) == pytest.approx(-math.log2((math.sqrt(5) - 1) / 2), abs=1e-12)


@pytest.mark.parametrize("mu, expected", [(1.2, 3.79089), (1.6, 1.47054), (2.0, 0.99713), (2.4, 0.78948)])
def test_eta_star_geometric(mu, expected):
    d = geometric_spectrum(mu)
    eta = solve_eta_star(d)
    assert eta == pytest.approx(expected, abs=5e-6)
    assert eta == pytest.approx(eta_oracle(d), abs=1e-12)
    assert abs(np.sum((d / d[0]) ** eta) - 2) < 1e-12


def test_eta_star_absent_for_tied_top():
    assert solve_eta_star([3.0, 3.0, 1.0]) is None


@settings(max_examples=80, deadline=None)
@given(d=descending_spectra())
def test_eta_star_residual_and_oracle(d):
    if d[1] >= d[0] or d[1] / d[0] > 0.999:
        return
    eta = solve_eta_star(d)
    assert abs(math.fsum((d / d[0]) ** eta) - 2) < 1e-12
    assert eta == pytest.approx(eta_oracle(d), rel=1e-10)


def test_nu_star_geometric_mu2():
    d = geometric_spectrum(2.0)
    assert math.fsum((d / d[0]) ** 1.0) == 2 - 2.0**-8
    nu = solve_nu_star(d, 0)
    assert nu == pytest.approx(0.993, abs=2e-3)
    assert nu == pytest.approx(nu_oracle(d, 0), abs=1e-12)
    assert abs(math.fsum((d[:-1] / d[0]) ** nu) - 2) < 1e-12


def test_nu_star_edge_cases():
    assert solve_nu_star([4.0, 2.0, 0.5], 0) is None  # p = 3
    with pytest.raises(RegimeError):
        solve_nu_star(geometric_spectrum(2.0), 1)
    with pytest.raises(RegimeError):
        solve_nu_star(geometric_spectrum(1.2), 0)


# ---------------------------------------------------------------------------
# regime split


@pytest.mark.parametrize("mu", MUS)
@pytest.mark.parametrize("j", [0, 1, 2])
def test_regime_split(mu, j):
    expected = MINUS if (j == 0 and mu in (2.0, 2.4)) else PLUS
    assert regime(geometric_spectrum(mu), j) == expected


@pytest.mark.parametrize("j", [1, 1.5, 2, 4])
def test_higher_loss_orders_always_plus(j):
    d = np.array([100.0, 1.0, 0.01, 1e-4])
    assert regime_indicator(d, j) > 0


# ---------------------------------------------------------------------------
# designs


def check_design_invariants(design, d, j, n):
    c = design.c
    assert np.all(c >= 1.0)
    bound = minimax_phi_bound(d, c, j, n)
    assert design.alpha <= design.u + 1e-12
    assert design.u <= bound + 1e-12
    sup = design.alpha / (design.gamma * (design.alpha + 1))
    assert sup <= design.v + 1e-12
    assert design.phi().sup_ratio() == pytest.approx(sup, rel=1e-15)
    if design.branch == PLUS:
        assert np.all(np.diff(c) >= 0)
        assert design.v == pytest.approx(t0_bound_increasing(d, c), rel=1e-15) or not np.isfinite(
            t0_bound_increasing(d, c)
        )
    else:
        assert c[-1] > c[0] and np.all(np.diff(c[:-1]) <= 0)
        assert c[-2] == pytest.approx(1.0, rel=1e-15)
        assert design.v == pytest.approx(t0_bound_case2(d, c), rel=1e-15)
    # the worst-case ratio keeps the condition number from rising
    assert kappa_estimator(d, c, sup) <= kappa_ls(d) * (1 + 1e-12)


@pytest.mark.parametrize("mu", MUS)
@pytest.mark.parametrize("j", [0, 1, 2])
@pytest.mark.parametrize("floor", [True, False])
def test_geometric_designs(mu, j, floor):
    d = geometric_spectrum(mu)
    design = auto_design(d, j, N, gamma_floor=floor)
    check_design_invariants(design, d, j, N)
    if floor:
        assert design.gamma >= 1.0
    if design.branch == PLUS:
        lower = max(0.0, 1.0 - j)
        eta = 0.5 * (lower + solve_eta_star(d))
        assert design.eta_or_nu_used == pytest.approx(eta, rel=1e-15)
        np.testing.assert_allclose(design.c, (d[0] / d) ** (j - 1 + eta), rtol=1e-14)
        u = 2 / (N + 2) * (np.sum((d / d[0]) ** eta) - 2)
        assert design.u == pytest.approx(u, abs=1e-12)
    else:
        assert design.eta_or_nu_used == pytest.approx(solve_nu_star(d, j) / 2, rel=1e-15)


# frozen from the design construction; the midpoint rule for mu = 1.2 and the
# half-root rule for mu = 2.0, both with unfloored gamma
@pytest.mark.parametrize(
    "mu, j, branch, alpha, gamma, v",
    [
        (1.2, 0, PLUS, 0.1284, 0.1232, 0.9233),
        (1.2, 1, PLUS, 0.2116, 0.1922, 0.9088),
        (1.2, 2, PLUS, 0.2116, 0.1966, 0.8884),
        (1.6, 0, PLUS, 0.0431, 0.0413, 0.9982),
        (2.0, 0, MINUS, 0.2025, 0.3221, 0.5228),
        (2.4, 0, MINUS, 0.2022, 0.2855, 0.5893),
    ],
)
def test_design_regression_values(mu, j, branch, alpha, gamma, v):
    design = auto_design(geometric_spectrum(mu), j, N, gamma_floor=False)
    assert design.branch == branch
    assert design.alpha == pytest.approx(alpha, abs=1e-4)
    assert design.gamma == pytest.approx(gamma, abs=1e-4)
    assert design.v == pytest.approx(v, abs=1e-4)


def test_equal_eigenvalues_design():
    d = np.ones(5)
    design = design_plus(d, 0, 4)
    np.testing.assert_array_equal(design.c, np.ones(5))
    assert design.u == pytest.approx(2 * 3 / 6)
    assert design.v == 1.0
    assert design.eta_or_nu_used == 2.0


def test_mu16_loss1_exponent_is_half_root():
    d = geometric_spectrum(1.6)
    design = design_plus(d, 1, N)
    assert design.eta_or_nu_used == pytest.approx(solve_eta_star(d) / 2, rel=1e-15)
    np.testing.assert_allclose(design.c, (d[0] / d) ** design.eta_or_nu_used, rtol=1e-14)


def test_tied_bottom_eigenvalues_leave_no_stable_minus_design():
    d = np.array([14.6, 5.0, 0.1, 0.05, 0.05, 0.05])
    assert regime(d, 0) == MINUS
    with pytest.raises(DomainError, match="no positive shrinkage"):
        design_minus(d, 0, 5)


def test_design_minus_p3():
    d = np.array([4.0, 2.0, 0.5])
    assert regime(d, 0) == MINUS
    design = design_minus(d, 0, 4)
    assert design.eta_or_nu_used == 0.0
    assert design.c[0] == pytest.approx(d[0] / d[1])
    assert design.c[1] == 1.0
    assert design.c[2] == pytest.approx(2 * design.c[0])
    check_design_invariants(design, d, 0, 4)


def test_design_errors():
    with pytest.raises(RegimeError):
        design_plus(geometric_spectrum(2.0), 0, N)
    with pytest.raises(RegimeError):
        design_minus(geometric_spectrum(1.2), 0, N)
    with pytest.raises(DomainError):
        design_plus(geometric_spectrum(1.2), 0, N, eta_pick=5.0)
    with pytest.raises(DomainError):
        design_minus(geometric_spectrum(2.0), 0, N, cp_ratio=1.0)
    with pytest.raises(DomainError):
        geometric_spectrum(1.0)


@pytest.mark.parametrize("cp", [1.1, 2.0, 5.0, 50.0])
@pytest.mark.parametrize("frac", [0.0, 0.3, 0.9])
def test_minus_designs_over_parameters(cp, frac):
    d = geometric_spectrum(2.4)
    nu = frac * solve_nu_star(d, 0)
    design = design_minus(d, 0, N, nu_pick=nu, cp_ratio=cp)
    assert design.u > 0
    check_design_invariants(design, d, 0, N)


@settings(max_examples=100, deadline=None)
@given(d=descending_spectra(), j=st.sampled_from([0, 0.5, 1, 2]), n=st.integers(1, 25))
def test_random_designs_satisfy_invariants(d, j, n):
    if d[0] / d[-1] < 1.0001 or d[1] / d[0] > 0.999:
        return
    try:
        design = auto_design(d, j, n)
    except DomainError:
        # only tied smallest eigenvalues under the c_p > c_1 ordering leave no room
        assert d[-2] == d[-1] and regime(d, j) == MINUS
        return
    check_design_invariants(design, d, j, n)
    assert design.u > 0


# ---------------------------------------------------------------------------
# loss robustness


def test_loss_robustness_range():
    assert loss_robustness_range(0, 2.2) == (0.0, 2.2)


@pytest.mark.parametrize("mu", [1.2, 1.6])
@pytest.mark.parametrize("j", [0, 1, 2])
def test_minimaxity_retained_inside_range(mu, j):
    d = geometric_spectrum(mu)
    design = design_plus(d, j, N)
    lo, hi = loss_robustness_range(j, design.eta_or_nu_used)
    for k in np.linspace(lo, hi, 12)[1:-1]:
        assert minimax_phi_bound(d, design.c, k, N) >= design.u - 1e-12


def test_mu12_midpoint_loss():
    d = geometric_spectrum(1.2)
    design = design_plus(d, 0, N)
    k = design.eta_or_nu_used / 2
    assert minimax_phi_bound(d, design.c, k, N) >= design.u


# ---------------------------------------------------------------------------
# generalized Bayes hyperparameters from a design


@pytest.mark.parametrize("mu", MUS)
@pytest.mark.parametrize("j", [0, 1, 2])
def test_gb_hyper_for_design(mu, j):
    d = geometric_spectrum(mu)
    design = auto_design(d, j, N)
    hyper = gb_hyper_for(design, 9)
    hyper.check(9, N)
    assert gb_limit_at_infinity(hyper, 9, N) == pytest.approx(design.u, rel=1e-12)
    assert gb_ratio_at_zero(hyper, 9, N) <= design.v * (1 + 1e-12)
    assert check_gb_minimax(hyper, d, design.c, j, N, 9)
