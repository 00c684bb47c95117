"""Separable convex minimisation under a single total-mass constraint.

Solves ``min sum_i f_i(x_i)  s.t.  sum_i x_i >= gamma, 0 <= x_i <= 1`` where
every ``f_i(x) = x * r_i * b_i(x)`` is increasing and strictly convex. At the
optimum all unclamped coordinates share one marginal value ``f_i'(x_i) = nu``,
so the solver bisects on ``nu``; ``nu`` is also the KKT multiplier of the mass
constraint and is returned as ``dual``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .errors import ContractViolation, InfeasibleError

DEFAULT_TOL = 1e-10
MAX_ITER = 200
# slack for treating gamma == n as attainable after floating-point arithmetic
_EDGE_RTOL = 1e-12


@dataclass(frozen=True)
class BudgetedProblem:
    """``terms`` is a sequence of ``(r, curve)`` pairs; ``gamma`` the required mass."""

    terms: Sequence[tuple]
    gamma: float

    def __post_init__(self):
        if len(self.terms) < 1:
            raise ValueError("a budgeted problem needs at least one term")
        object.__setattr__(self, "terms", tuple(self.terms))

    @property
    def n(self):
        return len(self.terms)

    @property
    def is_power(self):
        return all(curve.is_power for _, curve in self.terms)

    def power_arrays(self):
        coef = np.array([curve.marginal_at_one(r) for r, curve in self.terms], dtype=np.float64)
        expo = np.array([curve.exponent for _, curve in self.terms], dtype=np.float64)
        return coef, expo

    def objective(self, x):
        if self.is_power:
            coef, expo = self.power_arrays()
            return float(np.sum(coef / (expo + 1.0) * np.power(x, expo + 1.0)))
        return float(sum(float(curve.payment(float(xi), r)) for xi, (r, curve) in zip(x, self.terms)))

    def marginals(self, x):
        return np.array([float(curve.marginal(float(xi), r)) for xi, (r, curve) in zip(x, self.terms)])


@dataclass(frozen=True)
class BudgetedSolution:
    rho: np.ndarray
    objective: float
    dual: float
    residual: float
    iterations: int


_PROBE = np.linspace(0.0, 1.0, 33)


def _check_convex(problem):
    for r, curve in problem.terms:
        if curve.is_power:
            continue
        d = np.array([float(curve.marginal(x, r)) for x in _PROBE])
        if np.any(d[1:] <= 0) or np.any(np.diff(d) <= 0):
            raise ContractViolation(f"term {curve!r} with r={r} is not increasing and strictly convex")


def _waterfill_general(problem, gamma, tol, max_iter):
    lo, hi = 0.0, max(curve.marginal_at_one(r) for r, curve in problem.terms)
    x_hi = np.ones(problem.n)
    m_hi = float(problem.n)
    it = 0
    while it < max_iter and m_hi - gamma > tol:
        it += 1
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        x = np.array([curve.marginal_inverse(mid, r) for r, curve in problem.terms])
        m = float(x.sum())
        if m >= gamma:
            hi, x_hi, m_hi = mid, x, m
        else:
            lo = mid
    return x_hi, hi, it


def solve_budgeted(problem, tol=DEFAULT_TOL, max_iter=MAX_ITER):
    """Exact minimiser of the budgeted problem by water-filling.

    The returned ``rho`` always satisfies the mass constraint
    (``0 <= residual <= tol`` on the interior branch).
    """
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol!r}")
    n = problem.n
    gamma = float(problem.gamma)
    if gamma > n * (1.0 + _EDGE_RTOL):
        raise InfeasibleError(f"required mass gamma={gamma} exceeds the number of terms n={n}")
    _check_convex(problem)
    if gamma <= 0.0:
        x = np.zeros(n)
        return BudgetedSolution(x, 0.0, 0.0, -gamma, 0)
    if gamma >= n * (1.0 - _EDGE_RTOL):
        x = np.ones(n)
        # smallest multiplier compatible with every coordinate at its upper bound
        dual = max(curve.marginal_at_one(r) for r, curve in problem.terms)
        return BudgetedSolution(x, problem.objective(x), float(dual), n - gamma, 0)
    if problem.is_power:
        coef, expo = problem.power_arrays()
        x, nu, it = kernels.waterfill_power(coef, expo, gamma, tol, max_iter)
    else:
        x, nu, it = _waterfill_general(problem, gamma, tol, max_iter)
    x = np.asarray(x, dtype=np.float64)
    return BudgetedSolution(x, problem.objective(x), float(nu), float(x.sum() - gamma), int(it))


def solve_budgeted_scalar(term, gamma, n, tol=DEFAULT_TOL):
    """Closed form when all ``n`` terms are the same ``(r, curve)``: the constant ``gamma / n``."""
    r, curve = term
    if gamma < 0 or gamma > n * (1.0 + _EDGE_RTOL):
        raise InfeasibleError(f"gamma={gamma} outside [0, {n}]")
    x0 = min(1.0, gamma / n)
    x = np.full(n, x0)
    objective = n * float(curve.payment(x0, r))
    dual = 0.0 if x0 == 0.0 else float(curve.marginal(x0, r))
    return BudgetedSolution(x, objective, dual, float(n * x0 - gamma), 0)
