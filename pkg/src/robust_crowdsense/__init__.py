"""Bid optimization for crowdsensing under hard (joint) and soft (per-location) chance constraints."""

from .errors import (
    ConfigError,
    ContractViolation,
    DomainError,
    InfeasibleError,
    NonTerminationError,
    StructuralError,
)
from .hard import certify_gap, solve_pa2, solve_pa3, verify_pa1
from .model import (
    BiddingCurve,
    GeneralCurve,
    PolicyMatrix,
    RobustnessSpec,
    Scenario,
    joint_success_probability,
    total_payment,
)
from .soft import (
    SoftSearchParams,
    algorithm1,
    closed_form_policy,
    closed_form_special_case,
    solve_pb3,
    solve_pb4,
    theorem5_certificate,
    theorem6_certificate,
    verify_pb1,
)
from .solver import BudgetedProblem, solve_budgeted
from .tail import exact_tail, inverse_normal_cdf, k_threshold, monte_carlo_tail

__version__ = "0.1.0"
