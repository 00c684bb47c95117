"""Bidding curves, scenarios, policies and the payment / robustness functionals."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, StructuralError


def _check_prob(rho, name="rho"):
    if not (0.0 <= rho <= 1.0):
        raise DomainError(f"{name} must lie in [0, 1], got {rho!r}")


@dataclass(frozen=True)
class BiddingCurve:
    """Power-law bidding function ``b(x) = scale * x**exponent`` on [0, 1].

    ``b(x)`` is the bid needed to make a potential participant accept with
    probability ``x``. ``b_max`` defaults to ``b(1)`` and is only validated.
    """

    scale: float
    exponent: float = 3.0
    b_max: Optional[float] = None

    def __post_init__(self):
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise DomainError(f"scale must be positive, got {self.scale!r}")
        if not (self.exponent >= 1 and math.isfinite(self.exponent)):
            raise DomainError(f"exponent must be >= 1, got {self.exponent!r}")
        if self.b_max is None:
            object.__setattr__(self, "b_max", float(self.scale))
        elif self.b_max < self.scale:
            raise DomainError(f"b_max={self.b_max} is below b(1)={self.scale}")

    is_power = True

    def bid(self, rho):
        return self.scale * np.power(rho, self.exponent)

    def bid_derivative(self, rho):
        return self.scale * self.exponent * np.power(rho, self.exponent - 1.0)

    def payment(self, rho, r):
        """Payment integrand ``f(x) = x * r * b(x)``."""
        return r * self.scale * np.power(rho, self.exponent + 1.0)

    def marginal(self, rho, r):
        """``f'(x)``."""
        return r * self.scale * (self.exponent + 1.0) * np.power(rho, self.exponent)

    def marginal_at_one(self, r):
        return r * self.scale * (self.exponent + 1.0)

    def marginal_inverse(self, nu, r):
        """Largest x in [0, 1] with ``f'(x) <= nu`` (clamped)."""
        if nu <= 0:
            return 0.0
        return min(1.0, (nu / self.marginal_at_one(r)) ** (1.0 / self.exponent))


@dataclass(frozen=True)
class GeneralCurve:
    """Any increasing convex bidding function given with its derivative.

    ``f'`` is inverted numerically, so ``bid_derivative`` must be supplied.
    """

    b: Callable[[float], float]
    db: Callable[[float], float]
    b_max: float
    name: str = "general"

    is_power = False

    def __post_init__(self):
        if self.b(1.0) > self.b_max * (1 + 1e-12):
            raise DomainError(f"b(1)={self.b(1.0)} exceeds b_max={self.b_max}")

    def bid(self, rho):
        return np.vectorize(self.b, otypes=[float])(rho) if np.ndim(rho) else float(self.b(rho))

    def bid_derivative(self, rho):
        return np.vectorize(self.db, otypes=[float])(rho) if np.ndim(rho) else float(self.db(rho))

    def payment(self, rho, r):
        return rho * r * self.bid(rho)

    def marginal(self, rho, r):
        return r * (self.bid(rho) + rho * self.bid_derivative(rho))

    def marginal_at_one(self, r):
        return float(self.marginal(1.0, r))

    def marginal_inverse(self, nu, r):
        lo_val = float(self.marginal(0.0, r))
        if nu <= lo_val:
            return 0.0
        if nu >= self.marginal_at_one(r):
            return 1.0
        return brentq(lambda x: float(self.marginal(x, r)) - nu, 0.0, 1.0, xtol=1e-15, rtol=1e-15)


@dataclass(frozen=True)
class RobustnessSpec:
    """Either a hard joint constraint (``epsilon``) or per-location soft ones."""

    variant: str
    epsilon: Optional[float] = None
    alpha: Optional[tuple] = None
    beta: Optional[float] = None

    def __post_init__(self):
        if self.variant == "hard":
            if self.alpha is not None or self.beta is not None:
                raise DomainError("hard spec takes only epsilon")
            # epsilon = 0 is admitted: it is the all-one end of the sweep
            if self.epsilon is None or not (0.0 <= self.epsilon < 1.0):
                raise DomainError(f"epsilon must lie in [0, 1), got {self.epsilon!r}")
        elif self.variant == "soft":
            if self.epsilon is not None:
                raise DomainError("soft spec does not take epsilon")
            if self.beta is None or not (0.0 < self.beta < 1.0):
                raise DomainError(f"beta must lie in (0, 1), got {self.beta!r}")
            if not self.alpha:
                raise DomainError("soft spec needs one alpha per location")
            alpha = tuple(float(a) for a in self.alpha)
            for a in alpha:
                if not (0.0 < a <= 1.0):
                    raise DomainError(f"alpha entries must lie in (0, 1], got {a!r}")
            object.__setattr__(self, "alpha", alpha)
        else:
            raise DomainError(f"variant must be 'hard' or 'soft', got {self.variant!r}")

    @classmethod
    def hard(cls, epsilon):
        return cls("hard", epsilon=float(epsilon))

    @classmethod
    def soft(cls, alpha, beta):
        return cls("soft", alpha=tuple(alpha), beta=float(beta))

    @property
    def is_hard(self):
        return self.variant == "hard"

    def to_dict(self):
        if self.is_hard:
            return {"kind": "hard", "epsilon": self.epsilon}
        return {"kind": "soft", "alpha": list(self.alpha), "beta": self.beta}


def _freeze(a):
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Scenario:
    """T time slots by L locations with requirements, curves and a robustness spec."""

    T: int
    L: int
    requirement: np.ndarray
    curves: tuple
    spec: RobustnessSpec
    scale: Optional[np.ndarray] = field(init=False, default=None)
    exponent: Optional[np.ndarray] = field(init=False, default=None)

    def __post_init__(self):
        if self.T < 1 or self.L < 1:
            raise StructuralError(f"T and L must be positive, got T={self.T}, L={self.L}")
        req = np.asarray(self.requirement)
        if req.shape != (self.T, self.L):
            raise StructuralError(f"requirement has shape {req.shape}, expected {(self.T, self.L)}")
        if not np.all(req == np.round(req)) or np.any(req < 1):
            raise DomainError("requirement entries must be integers >= 1")
        object.__setattr__(self, "requirement", _freeze(req.astype(np.int64)))
        curves = tuple(tuple(row) for row in self.curves)
        if len(curves) != self.T or any(len(row) != self.L for row in curves):
            raise StructuralError(f"curves must be a {self.T}x{self.L} grid")
        object.__setattr__(self, "curves", curves)
        if self.spec.variant == "soft" and len(self.spec.alpha) != self.L:
            raise StructuralError(f"soft spec has {len(self.spec.alpha)} alphas for L={self.L}")
        if all(c.is_power for row in curves for c in row):
            object.__setattr__(self, "scale", _freeze([[c.scale for c in row] for row in curves]))
            object.__setattr__(self, "exponent", _freeze([[c.exponent for c in row] for row in curves]))

    @classmethod
    def uniform_curves(cls, requirement, curve_per_location: Sequence[BiddingCurve], spec):
        req = np.asarray(requirement)
        T, L = req.shape
        curves = tuple(tuple(curve_per_location) for _ in range(T))
        return cls(T, L, req, curves, spec)

    @property
    def TL(self):
        return self.T * self.L

    @property
    def is_power(self):
        return self.scale is not None

    def with_spec(self, spec):
        return Scenario(self.T, self.L, self.requirement, self.curves, spec)

    def column_terms(self, loc):
        return [(int(self.requirement[t, loc]), self.curves[t][loc]) for t in range(self.T)]

    def all_terms(self):
        """Cells in row-major (t, l) order."""
        return [(int(self.requirement[t, l]), self.curves[t][l]) for t in range(self.T) for l in range(self.L)]

    def is_time_independent(self, loc):
        col = self.requirement[:, loc]
        first = self.curves[0][loc]
        return bool(np.all(col == col[0])) and all(self.curves[t][loc] == first for t in range(self.T))


@dataclass(frozen=True, eq=False)
class PolicyMatrix:
    """Accept probabilities, one per (time slot, location)."""

    rho: np.ndarray

    def __post_init__(self):
        rho = np.array(self.rho, dtype=np.float64)
        if rho.ndim != 2:
            raise StructuralError(f"policy must be a 2-D matrix, got ndim={rho.ndim}")
        if np.any(~np.isfinite(rho)) or np.any(rho < 0.0) or np.any(rho > 1.0):
            raise DomainError("policy entries must lie in [0, 1]")
        object.__setattr__(self, "rho", _freeze(rho))

    @classmethod
    def constant(cls, T, L, value):
        return cls(np.full((T, L), float(value)))

    @property
    def shape(self):
        return self.rho.shape

    def bids(self, scenario):
        _check_shape(self, scenario)
        if scenario.is_power:
            return scenario.scale * np.power(self.rho, scenario.exponent)
        out = np.empty(self.rho.shape)
        for t in range(scenario.T):
            for l in range(scenario.L):
                out[t, l] = scenario.curves[t][l].bid(float(self.rho[t, l]))
        return out

    def __eq__(self, other):
        return isinstance(other, PolicyMatrix) and np.array_equal(self.rho, other.rho)

    __hash__ = None


def _check_shape(policy, scenario):
    if policy.rho.shape != (scenario.T, scenario.L):
        raise StructuralError(
            f"policy shape {policy.rho.shape} does not match scenario {(scenario.T, scenario.L)}"
        )


def expected_cell_payment(rho, r, curve):
    """Expected payment ``rho * r * b(rho)`` at one cell."""
    _check_prob(rho)
    if rho == 0.0:
        return 0.0
    return float(curve.payment(float(rho), r))


def total_payment(policy, scenario):
    """Sum of expected cell payments over every slot and location."""
    _check_shape(policy, scenario)
    if scenario.is_power:
        rho = policy.rho
        return float(np.sum(scenario.requirement * scenario.scale * np.power(rho, scenario.exponent + 1.0)))
    return float(
        sum(
            expected_cell_payment(float(policy.rho[t, l]), int(scenario.requirement[t, l]), scenario.curves[t][l])
            for t in range(scenario.T)
            for l in range(scenario.L)
        )
    )


def joint_success_probability(policy):
    """Product of all entries, accumulated as a sum of logs."""
    rho = policy.rho if isinstance(policy, PolicyMatrix) else np.asarray(policy, dtype=np.float64)
    if np.any(rho == 0.0):
        return 0.0
    return float(math.exp(math.fsum(np.log(rho).ravel())))


def expected_unsatisfiability(policy):
    """Expected number of unsatisfied cells, ``sum(1 - rho)``."""
    rho = policy.rho if isinstance(policy, PolicyMatrix) else np.asarray(policy, dtype=np.float64)
    return float(math.fsum((1.0 - rho).ravel()))
