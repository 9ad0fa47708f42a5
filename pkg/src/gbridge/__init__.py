"""Minimax, numerically stable generalized Bayes ridge regression."""

from .canonical import (
    CanonicalForm,
    DesignData,
    decompose,
    from_canonical,
    least_squares,
    read_design_csv,
    to_canonical,
)
from .errors import (
    ConfigError,
    DataError,
    DomainError,
    GBRidgeError,
    OrderingError,
    QuadratureError,
    RankDeficientError,
    RegimeError,
)
from .minimax import (
    MinimaxDesign,
    auto_design,
    check_gb_minimax,
    design_minus,
    design_plus,
    geometric_spectrum,
    loss_robustness_range,
    minimax_phi_bound,
    regime,
    regime_indicator,
    solve_eta_star,
    solve_nu_star,
)
from .shrinkage import (
    GBHyper,
    GeneralizedBayes,
    ShrinkageSpec,
    SimpleBayes,
    ZeroShrinkage,
    estimate_theta,
    generalized_ridge,
    implied_ridge_k,
    phi_gb,
    phi_sb,
    ridge_hk,
    shrink,
    w_statistic,
)
from .simulate import (
    Normal,
    ScaleMixture,
    SimConfig,
    SimResult,
    StudentT,
    chisq_identity_check,
    loss_eval,
    risk_and_ecn,
    sample_canonical,
    stein_identity_check,
    table1,
)
from .stability import (
    StabilityReport,
    kappa_estimator,
    kappa_ls,
    t0_bound_case2,
    t0_bound_increasing,
    verify_stable,
)

__version__ = "0.1.0"
