"""Joint (hard) chance constraint: conservative and relaxed budgeted solves plus gap certificates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InfeasibleError
from .model import PolicyMatrix, joint_success_probability, total_payment
from .solver import BudgetedProblem, solve_budgeted


@dataclass(frozen=True)
class SolveOutcome:
    policy: PolicyMatrix
    objective: float
    dual: float
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class GapCertificate:
    """Upper bound on ``F(returned policy) - F(optimum)``.

    ``formula`` names which bound produced ``bound``: ``"pairwise"``
    (``dual * TL(TL-1)/2 * eps**2``), ``"relaxation"`` (``dual * (TL-1) * eps``),
    ``"min"`` for the smaller of the two, or the soft-constraint variants
    ``"pb4-pb3"`` and ``"closed-form"``.
    """

    bound: float
    dual: float
    formula: str
    epsilon: float = float("nan")
    TL: int = 0
    terms: tuple = ()
    clamped: tuple = ()

    def to_dict(self):
        d = {"bound": self.bound, "dual": self.dual, "formula": self.formula}
        if self.TL:
            d.update(epsilon=self.epsilon, TL=self.TL)
        if self.terms:
            d["per_location"] = list(self.terms)
        if any(self.clamped):
            d["clamped"] = list(self.clamped)
        return d


def _require_hard(scenario):
    if not scenario.spec.is_hard:
        raise DomainError("this operation needs a hard robustness spec")
    return scenario.spec.epsilon


def _solve_all_cells(scenario, gamma, label):
    problem = BudgetedProblem(scenario.all_terms(), gamma)
    sol = solve_budgeted(problem)
    policy = PolicyMatrix(sol.rho.reshape(scenario.T, scenario.L))
    return SolveOutcome(
        policy=policy,
        objective=total_payment(policy, scenario),
        dual=sol.dual,
        diagnostics={
            "problem": label,
            "gamma": gamma,
            "residual": sol.residual,
            "iterations": sol.iterations,
        },
    )


def solve_pa2(scenario):
    """Boole-conservative problem: ``sum(1 - rho) <= eps`` over all cells."""
    eps = _require_hard(scenario)
    return _solve_all_cells(scenario, scenario.TL - eps, "PA2")


def solve_pa3(scenario):
    """Relaxation with budget ``TL * eps``; its payment lower-bounds the true optimum."""
    eps = _require_hard(scenario)
    if scenario.TL * eps >= scenario.TL:
        raise InfeasibleError("relaxed budget TL*eps must be below TL")
    return _solve_all_cells(scenario, scenario.TL * (1.0 - eps), "PA3")


def verify_pa1(policy, epsilon):
    """``(feasible, slack)`` for the joint constraint ``prod(rho) >= 1 - eps``."""
    slack = joint_success_probability(policy) - (1.0 - epsilon)
    return slack >= 0.0, slack


def hard_bounds(dual, TL, epsilon):
    pairwise = dual * TL * (TL - 1) / 2.0 * epsilon**2
    relaxation = dual * (TL - 1) * epsilon
    return pairwise, relaxation


def certify_gap(outcome, scenario):
    """Gap certificate for a :func:`solve_pa2` outcome: ``dual * min((TL-1)eps, TL(TL-1)/2 eps^2)``."""
    eps = _require_hard(scenario)
    pairwise, relaxation = hard_bounds(outcome.dual, scenario.TL, eps)
    return GapCertificate(
        bound=max(0.0, min(pairwise, relaxation)),
        dual=outcome.dual,
        formula="min",
        epsilon=eps,
        TL=scenario.TL,
    )


def gradient_norm_dual_bound(outcome, scenario):
    """``||grad F|| / ||grad H||`` at the PA2 solution, an a-priori bound on the dual."""
    rho = outcome.policy.rho
    if scenario.is_power:
        grad_f = scenario.requirement * scenario.scale * (scenario.exponent + 1.0) * rho**scenario.exponent
    else:
        grad_f = np.array(
            [[float(scenario.curves[t][l].marginal(rho[t, l], scenario.requirement[t, l])) for l in range(scenario.L)]
             for t in range(scenario.T)]
        )
    return float(np.linalg.norm(grad_f) / math.sqrt(scenario.TL))


MAX_BRUTE_CELLS = 4
MAX_GRID_POINTS = 5_000_000


def brute_force_pa1(scenario, step=1e-2):
    """Grid search for the joint-constraint optimum, used as a test oracle (TL <= 4).

    Every coordinate of a feasible point is at least ``1 - eps``, so the grid
    spans ``[1 - eps, 1]``. The first ``TL - 1`` coordinates run over the grid
    and the last takes the smallest value keeping the product feasible, so
    each candidate is feasible and the result over-estimates the optimum by at
    most ``grid_slack``. Identical cells use the symmetric 1-D reduction.
    """
    eps = _require_hard(scenario)
    TL = scenario.TL
    if TL > MAX_BRUTE_CELLS:
        raise DomainError(f"brute force is limited to TL <= {MAX_BRUTE_CELLS}, got {TL}")
    if not (0 < step <= 1e-2):
        raise DomainError(f"grid step must lie in (0, 1e-2], got {step}")
    terms = scenario.all_terms()
    target = 1.0 - eps
    fmax = [curve.marginal_at_one(r) for r, curve in terms]

    def cell_pay(i, x):
        r, curve = terms[i]
        return curve.payment(x, r)

    if eps == 0.0:
        best = np.ones(TL)
        slack = 0.0
    elif all(t == terms[0] for t in terms):
        # symmetric optimum: every coordinate equals target ** (1 / TL)
        grid = np.arange(target, 1.0 + step / 2, step)
        grid = np.append(grid, 1.0)
        feasible = grid[grid**TL >= target]
        x = float(feasible.min())
        best = np.full(TL, x)
        slack = step * sum(fmax)
    else:
        n_grid = int(math.ceil(eps / step)) + 1
        if n_grid ** (TL - 1) > MAX_GRID_POINTS:
            raise DomainError("grid too fine for exhaustive search; raise step")
        axis = np.minimum(1.0, target + step * np.arange(n_grid))
        if TL == 1:
            best = np.array([target])
        else:
            mesh = np.stack(np.meshgrid(*([axis] * (TL - 1)), indexing="ij"), axis=-1).reshape(-1, TL - 1)
            last = target / np.prod(mesh, axis=1)
            ok = last <= 1.0
            mesh, last = mesh[ok], last[ok]
            cost = sum(cell_pay(i, mesh[:, i]) for i in range(TL - 1)) + cell_pay(TL - 1, last)
            j = int(np.argmin(cost))
            best = np.append(mesh[j], last[j])
        slack = step * sum(fmax[:-1])
    policy = PolicyMatrix(best.reshape(scenario.T, scenario.L))
    return SolveOutcome(
        policy=policy,
        objective=total_payment(policy, scenario),
        dual=float("nan"),
        diagnostics={"problem": "PA1-grid", "step": step, "grid_slack": slack},
    )


def union_gap(fail_probs):
    """Exact ``prod(1 - p) - (1 - sum p)`` for independent failure probabilities."""
    p = np.asarray(fail_probs, dtype=np.float64)
    return float(np.prod(1.0 - p) - (1.0 - p.sum()))


def pairwise_gap_bound(n, eps):
    return n * (n - 1) / 2.0 * eps**2

