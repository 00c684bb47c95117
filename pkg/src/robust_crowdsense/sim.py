"""Simulation study: scenario generation, comparison policies, metrics and CSV tables."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import hard, soft
from ._accel import worker_count
from .errors import ConfigError, NonTerminationError
from .model import (
    BiddingCurve,
    PolicyMatrix,
    RobustnessSpec,
    Scenario,
    joint_success_probability,
    total_payment,
)
from .tail import make_rng

# stream domains under the master seed
_SCENARIO, _ALPHA, _SEARCH, _RANDOM = 0, 1, 2, 3

POLICIES = ("our", "lower_bound", "uniform", "random")
SETTING_I = (0.9, 1.0)
SETTING_II = (0.75, 1.0)


@dataclass(frozen=True)
class ExperimentConfig:
    T: int = 70
    L: int = 6
    r_low: tuple = None
    r_high: tuple = None
    curve_scale: tuple = None
    curve_exponent: float = 3.0
    epsilons: tuple = (0.08, 0.06, 0.04, 0.02, 0.0)
    betas: tuple = (0.91, 0.93, 0.95, 0.97, 0.99)
    alpha_range: tuple = SETTING_I
    replications: int = 20
    master_seed: int = 0
    search: soft.SoftSearchParams = field(default_factory=soft.SoftSearchParams)

    def __post_init__(self):
        if self.T < 1 or self.L < 1:
            raise ConfigError("T and L must be positive")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        # per-location defaults: r in [1, l^2], b(x) = l * x^3 (l counted from 1)
        lows = tuple(self.r_low) if self.r_low is not None else (1,) * self.L
        highs = tuple(self.r_high) if self.r_high is not None else tuple((l + 1) ** 2 for l in range(self.L))
        scales = tuple(self.curve_scale) if self.curve_scale is not None else tuple(float(l + 1) for l in range(self.L))
        for name, seq in (("r_low", lows), ("r_high", highs), ("curve_scale", scales)):
            if len(seq) != self.L:
                raise ConfigError(f"{name} needs {self.L} entries, got {len(seq)}")
        if any(lo < 1 or hi < lo for lo, hi in zip(lows, highs)):
            raise ConfigError("requirement intervals must satisfy 1 <= low <= high")
        lo, hi = self.alpha_range
        if not (0.0 < lo <= hi <= 1.0):
            raise ConfigError(f"alpha_range must satisfy 0 < low <= high <= 1, got {self.alpha_range}")
        object.__setattr__(self, "r_low", lows)
        object.__setattr__(self, "r_high", highs)
        object.__setattr__(self, "curve_scale", scales)
        object.__setattr__(self, "epsilons", tuple(float(e) for e in self.epsilons))
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))


def _sub_seed(master, *key):
    ss = np.random.SeedSequence(int(master), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


def draw_alpha(config, rep):
    rng = make_rng(config.master_seed, (_ALPHA, rep))
    return tuple(rng.uniform(*config.alpha_range, size=config.L))


def generate_scenario(config, rep, spec=None):
    """Scenario for replication ``rep``; requirements come from that replication's substream."""
    rng = make_rng(config.master_seed, (_SCENARIO, rep))
    req = np.column_stack(
        [rng.integers(lo, hi + 1, size=config.T) for lo, hi in zip(config.r_low, config.r_high)]
    )
    curves = [BiddingCurve(s, config.curve_exponent) for s in config.curve_scale]
    if spec is None:
        spec = RobustnessSpec.hard(config.epsilons[0]) if config.epsilons else RobustnessSpec.soft(
            draw_alpha(config, rep), config.betas[0]
        )
    return Scenario.uniform_curves(req, curves, spec)


# ---------------------------------------------------------------------------
# comparison policies
# ---------------------------------------------------------------------------


def policy_our(scenario, params=None):
    if scenario.spec.is_hard:
        return hard.solve_pa2(scenario).policy
    return soft.algorithm1(scenario, params).policy


def policy_lower_bound(scenario):
    if scenario.spec.is_hard:
        return hard.solve_pa3(scenario).policy
    return soft.solve_pb3(scenario).policy


def policy_uniform(scenario):
    spec = scenario.spec
    value = 1.0 - spec.epsilon if spec.is_hard else spec.beta
    return PolicyMatrix.constant(scenario.T, scenario.L, value)


def policy_random(scenario, seed, stream=()):
    """Accept probabilities drawn uniformly from [0, 1] per cell."""
    rng = make_rng(seed, stream)
    return PolicyMatrix(rng.random((scenario.T, scenario.L)))


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ComparisonRow:
    policy_name: str
    total_payment: float
    time_avg_gap: float
    hard_success_prob: float = float("nan")
    per_location_soft_slack: tuple = ()


def evaluate(scenario, policies):
    """Metrics for each named policy; ``policies`` must contain ``lower_bound``."""
    if "lower_bound" not in policies:
        raise ValueError("evaluate needs a 'lower_bound' policy as the gap reference")
    base = total_payment(policies["lower_bound"], scenario)
    rows = []
    for name, policy in policies.items():
        pay = total_payment(policy, scenario)
        gap = 0.0 if name == "lower_bound" else (pay - base) / scenario.T
        if scenario.spec.is_hard:
            rows.append(ComparisonRow(name, pay, gap, hard_success_prob=joint_success_probability(policy)))
        else:
            slacks = tuple(s for _, s in soft.verify_pb1(policy, scenario))
            rows.append(ComparisonRow(name, pay, gap, per_location_soft_slack=slacks))
    return rows


def _policies(scenario, config, rep, gi):
    seed = config.master_seed
    params = replace(config.search, master_seed=_sub_seed(seed, _SEARCH, rep, gi))
    return {
        "our": policy_our(scenario, params),
        "lower_bound": policy_lower_bound(scenario),
        "uniform": policy_uniform(scenario),
        "random": policy_random(scenario, seed, (_RANDOM, rep, gi)),
    }


def _map(fn, items, workers):
    workers = workers or worker_count()
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _hard_replication(config, rep):
    base = generate_scenario(config, rep, RobustnessSpec.hard(config.epsilons[0]))
    out = []
    for gi, eps in enumerate(config.epsilons):
        sc = base.with_spec(RobustnessSpec.hard(eps))
        out.append({r.policy_name: r for r in evaluate(sc, _policies(sc, config, rep, gi))})
    return out


def _soft_replication(config, rep):
    alpha = draw_alpha(config, rep)
    base = generate_scenario(config, rep, RobustnessSpec.soft(alpha, config.betas[0]))
    out = []
    for gi, beta in enumerate(config.betas):
        sc = base.with_spec(RobustnessSpec.soft(alpha, beta))
        try:
            out.append({r.policy_name: r for r in evaluate(sc, _policies(sc, config, rep, gi))})
        except NonTerminationError:
            out.append(None)
    return out


@dataclass(frozen=True)
class Table1Row:
    one_minus_epsilon: float
    our: float
    lower_bound: float
    uniform: float
    random: float


def run_table1(config, workers=None):
    """Replication-averaged joint success probability per policy and epsilon."""
    per_rep = _map(lambda rep: _hard_replication(config, rep), range(config.replications), workers)
    rows = []
    for gi, eps in enumerate(config.epsilons):
        means = {
            name: math.fsum(rep[gi][name].hard_success_prob for rep in per_rep) / len(per_rep)
            for name in POLICIES
        }
        rows.append(Table1Row(1.0 - eps, **means))
    return rows, per_rep


@dataclass(frozen=True)
class GapRow:
    requirement: float
    policy: str
    mean_gap: float
    stderr: float
    n: int


def _gap_rows(per_rep, grid, label):
    rows = []
    failures = {}
    for gi, x in enumerate(grid):
        done = [rep[gi] for rep in per_rep if rep[gi] is not None]
        failures[x] = len(per_rep) - len(done)
        for name in POLICIES:
            gaps = np.array([d[name].time_avg_gap for d in done])
            if gaps.size == 0:
                mean, se = float("nan"), float("nan")
            else:
                mean = float(gaps.mean())
                se = float(gaps.std(ddof=1) / math.sqrt(gaps.size)) if gaps.size > 1 else 0.0
            rows.append(GapRow(label(x), name, mean, se, int(gaps.size)))
    return rows, failures


def run_gap_hard(config, workers=None):
    per_rep = _map(lambda rep: _hard_replication(config, rep), range(config.replications), workers)
    rows, _ = _gap_rows(per_rep, config.epsilons, lambda e: 1.0 - e)
    return rows


def run_gap_soft(config, workers=None):
    """Gap rows over the beta grid and the count of non-terminating replications per beta."""
    per_rep = _map(lambda rep: _soft_replication(config, rep), range(config.replications), workers)
    return _gap_rows(per_rep, config.betas, lambda b: b)


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------


def fmt(x):
    """Fixed four decimals; scientific notation for nonzero magnitudes below 1e-4."""
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if math.isnan(x):
        return "nan"
    if x != 0.0 and abs(x) < 1e-4:
        return f"{x:.2E}"
    return f"{x:.4f}"


TABLE1_COLUMNS = ("one_minus_epsilon", "our", "lower_bound", "uniform", "random")
GAP_COLUMNS = ("requirement", "policy", "mean_gap", "stderr")


def table1_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE1_COLUMNS)
    for r in rows:
        w.writerow([fmt(getattr(r, c)) for c in TABLE1_COLUMNS])
    return buf.getvalue()


def gap_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(GAP_COLUMNS)
    for r in rows:
        w.writerow([fmt(getattr(r, c)) for c in GAP_COLUMNS])
    return buf.getvalue()
