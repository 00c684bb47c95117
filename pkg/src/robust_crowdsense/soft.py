"""Per-location (soft) chance constraints.

Each location must meet its requirement in at least a fraction ``alpha_l`` of
the T slots with probability ``beta``. Everything reduces to per-column
budgeted solves ``sum_t rho_t >= gamma_l``; the searches differ only in how
``gamma_l`` is chosen.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError, InfeasibleError, NonTerminationError
from .hard import GapCertificate, SolveOutcome
from .model import PolicyMatrix, total_payment
from .solver import BudgetedProblem, solve_budgeted
from .tail import exact_tail, inverse_normal_cdf, k_threshold, monte_carlo_tail


def _require_soft(scenario):
    if scenario.spec.is_hard:
        raise DomainError("this operation needs a soft robustness spec")
    return scenario.spec


def solve_pb2_subproblem(scenario, loc, gamma):
    """Cheapest column ``loc`` with expected successes ``sum_t rho_t >= gamma``."""
    if gamma > scenario.T * (1 + 1e-12):
        raise InfeasibleError(f"gamma={gamma} exceeds T={scenario.T} at location {loc}")
    return solve_budgeted(BudgetedProblem(scenario.column_terms(loc), gamma))


def _solve_columns(scenario, gammas, label):
    rho = np.empty((scenario.T, scenario.L))
    duals = []
    for loc, g in enumerate(gammas):
        sol = solve_pb2_subproblem(scenario, loc, g)
        rho[:, loc] = sol.rho
        duals.append(sol.dual)
    policy = PolicyMatrix(rho)
    return SolveOutcome(
        policy=policy,
        objective=total_payment(policy, scenario),
        dual=tuple(duals),
        diagnostics={"problem": label, "gamma": list(gammas)},
    )


def solve_pb3(scenario):
    """Relaxation ``gamma_l = T * alpha_l * beta``; payment lower-bounds the optimum."""
    spec = _require_soft(scenario)
    return _solve_columns(scenario, [scenario.T * a * spec.beta for a in spec.alpha], "PB3")


def solve_pb4(scenario):
    """Conservative problem ``gamma_l = T - 1 + beta``; payment upper-bounds the optimum."""
    spec = _require_soft(scenario)
    return _solve_columns(scenario, [scenario.T - 1 + spec.beta] * scenario.L, "PB4")


def theorem5_certificate(scenario):
    """``sum_l dual_l * (T - T alpha_l beta - 1 + beta)`` with duals from the conservative solve."""
    spec = _require_soft(scenario)
    outcome = solve_pb4(scenario)
    T, beta = scenario.T, spec.beta
    terms = tuple(lam * (T - T * a * beta - 1 + beta) for lam, a in zip(outcome.dual, spec.alpha))
    return GapCertificate(bound=max(0.0, math.fsum(terms)), dual=max(outcome.dual), formula="pb4-pb3", terms=terms)


def verify_pb1(policy, scenario):
    """Per location: ``(feasible, exact_tail - beta)``."""
    spec = _require_soft(scenario)
    out = []
    for loc, a in enumerate(spec.alpha):
        k = k_threshold(scenario.T, a)
        slack = exact_tail(policy.rho[:, loc], k) - spec.beta
        out.append((slack >= 0.0, slack))
    return out


# ---------------------------------------------------------------------------
# binary search with Monte Carlo feasibility checks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SoftSearchParams:
    sigma_hi: float = 0.02
    sigma_lo: float = 0.01
    mc_samples: int = 500
    master_seed: int = 0
    max_bisect: int = 64
    escalation_factor: int = 10
    max_escalations: int = 3
    min_width: float = 1e-9
    fresh_upper_draws: bool = False

    def __post_init__(self):
        if not (self.sigma_hi > self.sigma_lo > 0):
            raise ConfigError(f"need sigma_hi > sigma_lo > 0, got {self.sigma_hi}, {self.sigma_lo}")
        if self.mc_samples < 1:
            raise ConfigError("mc_samples must be positive")
        if self.max_bisect < 1:
            raise ConfigError("max_bisect must be >= 1")
        if self.escalation_factor < 2:
            raise ConfigError("escalation_factor must be >= 2")
        if self.max_escalations < 0:
            raise ConfigError("max_escalations must be >= 0")


@dataclass(frozen=True)
class LocationSearch:
    gamma_final: float
    q_estimate: float
    exact_tail_check: float
    bisect_iters: int
    samples: int
    escalations: int
    trajectory: tuple = ()

    def to_dict(self, verbose=False):
        d = {
            "gamma_final": self.gamma_final,
            "q_estimate": self.q_estimate,
            "exact_tail_check": self.exact_tail_check,
            "bisect_iters": self.bisect_iters,
            "samples": self.samples,
            "escalations": self.escalations,
        }
        if verbose:
            d["trajectory"] = [list(p) for p in self.trajectory]
        return d


@dataclass(frozen=True)
class SoftSolveOutcome:
    policy: PolicyMatrix
    per_location: tuple
    objective: float
    diagnostics: dict = field(default_factory=dict)


def _search_once(scenario, loc, k, beta, params, n_samples, level):
    """One bisection pass. Returns (gamma_hi, q_hi, rho_hi, iters, trajectory) or None."""
    T = scenario.T
    seed = params.master_seed

    def q_at(gamma, rho, step):
        est = monte_carlo_tail(rho, k, n_samples, seed, stream=(loc, level, step))
        return est.value - beta

    lo, hi = 0.0, float(T)
    rho_hi = np.ones(T)
    q_hi = q_at(hi, rho_hi, 0)
    traj = [(hi, q_hi)]
    it = 0
    while not (params.sigma_lo <= q_hi <= params.sigma_hi):
        if it >= params.max_bisect or hi - lo < params.min_width:
            return None, traj
        it += 1
        mid = 0.5 * (lo + hi)
        rho_mid = solve_pb2_subproblem(scenario, loc, mid).rho
        q_mid = q_at(mid, rho_mid, 2 * it - 1)
        traj.append((mid, q_mid))
        if q_mid < 0.0:
            lo = mid
        else:
            hi, rho_hi, q_hi = mid, rho_mid, q_mid
        if params.fresh_upper_draws:
            q_hi = q_at(hi, rho_hi, 2 * it)
    return (hi, q_hi, rho_hi, it), traj


def _search_location(scenario, loc, params):
    spec = scenario.spec
    alpha, beta = spec.alpha[loc], spec.beta
    k = k_threshold(scenario.T, alpha)
    n_samples = params.mc_samples
    history = []
    for level in range(params.max_escalations + 1):
        found, traj = _search_once(scenario, loc, k, beta, params, n_samples, level)
        history.append({"samples": n_samples, "trajectory": [list(p) for p in traj]})
        if found is not None:
            hi, q_hi, rho_hi, it = found
            return rho_hi, LocationSearch(
                gamma_final=hi,
                q_estimate=q_hi,
                exact_tail_check=exact_tail(rho_hi, k),
                bisect_iters=it,
                samples=n_samples,
                escalations=level,
                trajectory=tuple(traj),
            )
        n_samples *= params.escalation_factor
    raise NonTerminationError(
        f"location {loc}: Monte Carlo estimate never entered "
        f"[{params.sigma_lo}, {params.sigma_hi}] after {params.max_escalations} escalations",
        diagnostics={"location": loc, "k": k, "attempts": history},
    )


def algorithm1(scenario, params=None):
    """Per-location bisection on ``gamma_l`` with Monte Carlo feasibility checks.

    Each location stops when the estimated ``tail - beta`` falls in
    ``[sigma_lo, sigma_hi]`` at the current upper end of its interval. If the
    interval collapses or ``max_bisect`` is reached first, the search restarts
    with ``mc_samples * escalation_factor`` samples, at most
    ``max_escalations`` times, then raises :class:`NonTerminationError`.
    """
    spec = _require_soft(scenario)
    params = params or SoftSearchParams()
    # q at gamma = T is exactly 1 - beta, the largest value q can take
    if 1.0 - spec.beta < params.sigma_lo:
        raise ConfigError(f"1 - beta = {1 - spec.beta} < sigma_lo: the stop band is unreachable")
    rho = np.empty((scenario.T, scenario.L))
    per_location = []
    for loc in range(scenario.L):
        col, info = _search_location(scenario, loc, params)
        rho[:, loc] = col
        per_location.append(info)
    policy = PolicyMatrix(rho)
    return SoftSolveOutcome(
        policy=policy,
        per_location=tuple(per_location),
        objective=total_payment(policy, scenario),
    )


def mc_error(n_samples):
    """Four-sigma Monte Carlo error at the worst-case variance 1/4."""
    return 4.0 * math.sqrt(0.25 / n_samples)


# ---------------------------------------------------------------------------
# time-independent columns: normal-approximation closed form
# ---------------------------------------------------------------------------


def closed_form_special_case(T, alpha, beta):
    """``(min(1, alpha + z_beta * sqrt(alpha / T)), clamped)``."""
    if not (0.0 < alpha <= 1.0):
        raise DomainError(f"alpha must lie in (0, 1], got {alpha!r}")
    raw = alpha + inverse_normal_cdf(beta) * math.sqrt(alpha / T)
    if raw >= 1.0:
        return 1.0, True
    return max(0.0, raw), False


def _require_time_independent(scenario):
    bad = [l for l in range(scenario.L) if not scenario.is_time_independent(l)]
    if bad:
        raise DomainError(f"locations {bad} vary over time; the closed form needs constant columns")


def closed_form_policy(scenario):
    """Constant-column policy from :func:`closed_form_special_case` and the clamp flags."""
    spec = _require_soft(scenario)
    _require_time_independent(scenario)
    values, clamped = zip(*(closed_form_special_case(scenario.T, a, spec.beta) for a in spec.alpha))
    rho = np.tile(np.array(values), (scenario.T, 1))
    return PolicyMatrix(rho), tuple(clamped)


def theorem6_certificate(scenario):
    """``sum_l dual_l * (gamma_l - T alpha_l beta)`` at ``gamma_l = T alpha_l + z_beta sqrt(T alpha_l)``."""
    spec = _require_soft(scenario)
    _require_time_independent(scenario)
    T = scenario.T
    z = inverse_normal_cdf(spec.beta)
    terms, duals, clamped = [], [], []
    for loc, a in enumerate(spec.alpha):
        gamma = T * a + z * math.sqrt(T * a)
        clamp = gamma > T
        gamma = min(max(gamma, 0.0), float(T))
        lam = solve_pb2_subproblem(scenario, loc, gamma).dual
        duals.append(lam)
        clamped.append(clamp)
        terms.append(lam * (gamma - T * a * spec.beta))
    return GapCertificate(
        bound=max(0.0, math.fsum(terms)),
        dual=max(duals),
        formula="closed-form",
        terms=tuple(terms),
        clamped=tuple(clamped),
    )
