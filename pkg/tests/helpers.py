"""Scenario builders and independent oracles shared by the tests."""

import itertools

import numpy as np

from robust_crowdsense.model import BiddingCurve, RobustnessSpec, Scenario


def identical(T, L, spec, r=1, scale=1.0, exponent=3.0):
    req = np.full((T, L), r)
    return Scenario.uniform_curves(req, [BiddingCurve(scale, exponent)] * L, spec)


def random_scenario(rng, T, L, spec, r_max=36, time_varying=True):
    """Random requirements in [1, r_max] and random power curves (scale in [1,6], exponent in [1,4])."""
    req = rng.integers(1, r_max + 1, size=(T, L))
    if time_varying:
        curves = [[BiddingCurve(rng.uniform(1, 6), rng.uniform(1, 4)) for _ in range(L)] for _ in range(T)]
        return Scenario(T, L, req, curves, spec)
    req = np.tile(req[0], (T, 1))
    return Scenario.uniform_curves(req, [BiddingCurve(rng.uniform(1, 6), rng.uniform(1, 4)) for _ in range(L)], spec)


def hard(eps):
    return RobustnessSpec.hard(eps)


def soft(alpha, beta):
    return RobustnessSpec.soft(alpha, beta)


def enumerate_tail(rho, k):
    """Pr{#successes >= k} by summing over all 2^T outcomes."""
    total = 0.0
    for outcome in itertools.product((0, 1), repeat=len(rho)):
        if sum(outcome) >= k:
            p = 1.0
            for o, q in zip(outcome, rho):
                p *= q if o else 1.0 - q
            total += p
    return total


def power_objective(coef, expo, x):
    """sum_i coef_i/(p_i+1) * x_i^(p_i+1), where coef_i is the marginal at one."""
    x = np.asarray(x, dtype=float)
    return np.sum(coef / (expo + 1.0) * x ** (expo + 1.0), axis=-1)


def grid_search_budgeted(coef, expo, gamma, step=1e-3, coarse=1e-2, window=2e-2):
    """Coarse-to-fine grid minimum of the budgeted problem.

    The free coordinates run over a grid; the last coordinate takes the
    smallest value meeting the mass constraint, which is optimal for it
    because every term is increasing.
    """
    coef = np.asarray(coef, dtype=float)
    expo = np.asarray(expo, dtype=float)
    n = coef.size
    if n == 1:
        x = min(1.0, max(0.0, gamma))
        return float(power_objective(coef, expo, [x]))

    def best_on(axes, coef, expo):
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n - 1)
        last = np.maximum(0.0, gamma - mesh.sum(axis=1))
        ok = last <= 1.0 + 1e-12
        pts = np.column_stack([mesh[ok], np.minimum(last[ok], 1.0)])
        vals = power_objective(coef, expo, pts)
        j = int(np.argmin(vals))
        return float(vals[j]), pts[j]

    base = np.arange(0.0, 1.0 + coarse / 2, coarse)
    best = np.inf
    # each coordinate takes a turn as the solved-for one, so a coordinate
    # sitting at its bound never has to absorb the grid rounding
    for last in range(n):
        order = [i for i in range(n) if i != last] + [last]
        c, e = coef[order], expo[order]
        _, center = best_on([base] * (n - 1), c, e)
        fine_axes = [np.clip(np.arange(x - window, x + window + step / 2, step), 0.0, 1.0) for x in center[:-1]]
        value, _ = best_on(fine_axes, c, e)
        best = min(best, value)
    return best
