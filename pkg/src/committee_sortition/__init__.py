"""Binomial committee sortition with exact and Chernoff honest-fraction bounds."""
from .bounds import (
    BoundResult,
    SweepTable,
    binomial_tail_le,
    bound,
    c_approx,
    c_combined_closed,
    c_combined_numeric,
    c_exact,
    c_honest_chernoff,
    failure_prob,
    log_binomial_pmf,
    poisson_tail_le,
    sweep_failure,
    sweep_t,
)
from .errors import EstimabilityError, InfeasibleBoundError, ParameterError
from .kernels import BACKEND
from .simulator import (
    FailureEstimate,
    ScenarioConfig,
    compare_to_bounds,
    run_scenario,
    split_equivalence_test,
    split_user,
)
from .sortition import (
    CommitteeDraw,
    MechanismParams,
    Population,
    SelectionProof,
    User,
    draw_subusers,
    expected_subusers,
    inverse_binomial_cdf,
    sample_committee,
    sortition_select,
    sortition_verify,
)

__version__ = "0.1.0"
