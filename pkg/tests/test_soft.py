import math

import numpy as np
import pytest
from scipy.stats import norm

from robust_crowdsense import sim
from robust_crowdsense.errors import ConfigError, DomainError, InfeasibleError, NonTerminationError
from robust_crowdsense.model import BiddingCurve, PolicyMatrix, RobustnessSpec, Scenario, total_payment
from robust_crowdsense.soft import (
    SoftSearchParams,
    algorithm1,
    closed_form_policy,
    closed_form_special_case,
    mc_error,
    solve_pb2_subproblem,
    solve_pb3,
    solve_pb4,
    theorem5_certificate,
    theorem6_certificate,
    verify_pb1,
)
from robust_crowdsense.solver import solve_budgeted_scalar
from robust_crowdsense.tail import binomial_tail, exact_tail, k_threshold

from helpers import identical, random_scenario, soft


def default_soft(rep, beta=0.95):
    cfg = sim.ExperimentConfig()
    return sim.generate_scenario(cfg, rep, RobustnessSpec.soft(sim.draw_alpha(cfg, rep), beta))


class TestSubproblems:
    def test_boundaries(self):
        sc = random_scenario(np.random.default_rng(0), 6, 2, soft([0.5, 0.5], 0.9))
        assert np.all(solve_pb2_subproblem(sc, 0, 0.0).rho == 0)
        assert np.all(solve_pb2_subproblem(sc, 1, 6.0).rho == 1)
        with pytest.raises(InfeasibleError):
            solve_pb2_subproblem(sc, 0, 6.5)

    def test_two_cells(self):
        np.testing.assert_allclose(solve_pb2_subproblem(identical(2, 1, soft([0.5], 0.9)), 0, 1.0).rho, [0.5, 0.5], atol=1e-9)

    def test_relaxation_example(self):
        out = solve_pb3(identical(2, 1, soft([0.5], 0.9)))
        np.testing.assert_allclose(out.policy.rho.ravel(), [0.45, 0.45], atol=1e-9)

    def test_relaxation_limit(self):
        out = solve_pb3(identical(5, 2, soft([1.0, 1.0], 1 - 1e-13)))
        np.testing.assert_allclose(out.policy.rho, 1.0, atol=1e-9)

    def test_conservative_example(self):
        out = solve_pb4(identical(2, 1, soft([0.5], 0.9)))
        np.testing.assert_allclose(out.policy.rho.ravel(), [0.95, 0.95], atol=1e-9)

    def test_conservative_dominates_relaxation(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            T, L = int(rng.integers(1, 30)), int(rng.integers(1, 4))
            sc = random_scenario(rng, T, L, soft(rng.uniform(0.05, 1, size=L), rng.uniform(0.5, 0.99)))
            assert solve_pb4(sc).objective >= solve_pb3(sc).objective - 1e-9

    def test_hard_spec_rejected(self):
        with pytest.raises(DomainError):
            solve_pb3(identical(2, 1, RobustnessSpec.hard(0.1)))

    def test_scalar_equivalence(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            T = int(rng.integers(1, 80))
            curve = BiddingCurve(rng.uniform(1, 6), rng.uniform(1, 4))
            r = int(rng.integers(1, 36))
            sc = Scenario.uniform_curves(np.full((T, 1), r), [curve], soft([0.5], 0.9))
            gamma = rng.uniform(0, T)
            a = solve_budgeted_scalar((r, curve), gamma, T).objective
            b = solve_pb2_subproblem(sc, 0, gamma).objective
            assert abs(a - b) <= 1e-9 * max(1.0, a)


class TestTailMonotonicity:
    def test_tail_nondecreasing_in_budget(self):
        rng = np.random.default_rng(3)
        for case in range(100):
            T = int(rng.integers(1, 11))
            alpha = rng.uniform(0.05, 1.0)
            sc = random_scenario(rng, T, 1, soft([alpha], 0.9), time_varying=bool(case % 2))
            k = k_threshold(T, alpha)
            prev_tail, prev_rho = None, None
            for g in np.linspace(0, T, 22)[1:-1]:
                rho = solve_pb2_subproblem(sc, 0, g).rho
                tail = exact_tail(rho, k)
                if prev_tail is not None:
                    assert tail >= prev_tail
                    if np.all((prev_rho > 0) & (prev_rho < 1)) and prev_tail < 1 - 1e-9:
                        assert tail > prev_tail
                        if prev_tail > 1e-9:
                            assert tail - prev_tail >= 1e-12
                prev_tail, prev_rho = tail, rho

    def test_jensen_step(self):
        rng = np.random.default_rng(4)
        for _ in range(200):
            curve = BiddingCurve(rng.uniform(1, 6), rng.uniform(1, 4))
            col = rng.random(int(rng.integers(1, 50)))
            assert curve.payment(col.mean(), 1) <= np.mean(curve.payment(col, 1)) + 1e-12


class TestCertificates:
    def test_conservative_factor(self):
        sc = identical(70, 1, soft([0.9], 0.95))
        cert = theorem5_certificate(sc)
        lam = solve_pb4(sc).dual[0]
        assert math.isclose(70 - 70 * 0.9 * 0.95 - 1 + 0.95, 10.10, abs_tol=1e-12)
        assert math.isclose(cert.bound, lam * 10.10, rel_tol=1e-10)

    def test_conservative_vanishes(self):
        cert = theorem5_certificate(identical(10, 2, soft([1.0, 1.0], 1 - 1e-12)))
        assert cert.bound <= 1e-9 * cert.dual

    def test_conservative_covers_gap(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            T, L = int(rng.integers(1, 40)), int(rng.integers(1, 4))
            sc = random_scenario(rng, T, L, soft(rng.uniform(0.05, 1, size=L), rng.uniform(0.5, 0.99)))
            gap = solve_pb4(sc).objective - solve_pb3(sc).objective
            assert theorem5_certificate(sc).bound >= gap - 1e-9

    def test_closed_form_half(self):
        sc = identical(40, 1, soft([0.6], 0.5), r=3, scale=2.0)
        cert = theorem6_certificate(sc)
        lam = solve_pb2_subproblem(sc, 0, 40 * 0.6).dual
        assert math.isclose(cert.bound, lam * 0.5 * 40 * 0.6, rel_tol=1e-9)

    def test_closed_form_all_one(self):
        sc = identical(30, 1, soft([1.0], 0.5))
        cert = theorem6_certificate(sc)
        lam = solve_pb2_subproblem(sc, 0, 30.0).dual
        assert math.isclose(cert.bound, lam * 30 * 0.5, rel_tol=1e-12)
        assert closed_form_policy(sc)[0] == PolicyMatrix.constant(30, 1, 1.0)

    def test_closed_form_clamp_flagged(self):
        cert = theorem6_certificate(identical(70, 2, soft([0.9, 0.5], 0.98)))
        assert cert.clamped == (True, False)
        assert cert.to_dict()["clamped"] == [True, False]

    def test_closed_form_covers_gap(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            T, L = int(rng.integers(1, 100)), int(rng.integers(1, 4))
            sc = random_scenario(rng, T, L, soft(rng.uniform(0.05, 1, size=L), rng.uniform(0.5, 0.99)), time_varying=False)
            policy, _ = closed_form_policy(sc)
            gap = total_payment(policy, sc) - solve_pb3(sc).objective
            assert theorem6_certificate(sc).bound >= gap - 1e-9

    def test_closed_form_needs_constant_columns(self):
        rng = np.random.default_rng(7)
        sc = random_scenario(rng, 5, 1, soft([0.5], 0.9))
        with pytest.raises(DomainError):
            closed_form_policy(sc)
        with pytest.raises(DomainError):
            theorem6_certificate(sc)


class TestClosedForm:
    def test_symmetric(self):
        assert closed_form_special_case(50, 0.7, 0.5) == (0.7, False)

    def test_value(self):
        value, clamped = closed_form_special_case(100, 0.5, 0.95)
        assert not clamped
        assert abs(value - 0.61631) <= 1e-4
        assert math.isclose(value, 0.5 + norm.ppf(0.95) * math.sqrt(0.005), rel_tol=1e-12)

    def test_clamped(self):
        raw = 0.9 + norm.ppf(0.98) * math.sqrt(0.9 / 70)
        assert abs(raw - 1.13287) < 1e-4
        assert closed_form_special_case(70, 0.9, 0.98) == (1.0, True)

    def test_exact_slack(self):
        sc = identical(100, 1, soft([0.5], 0.95))
        policy, _ = closed_form_policy(sc)
        (ok, slack), = verify_pb1(policy, sc)
        assert slack >= -0.02
        assert math.isclose(slack, binomial_tail(100, policy.rho[0, 0], 50) - 0.95, abs_tol=1e-12)


class TestVerify:
    def test_all_one(self):
        sc = identical(5, 3, soft([0.2, 0.6, 1.0], 0.9))
        for ok, slack in verify_pb1(PolicyMatrix.constant(5, 3, 1.0), sc):
            assert ok and math.isclose(slack, 0.1)

    def test_all_zero(self):
        sc = identical(5, 2, soft([0.2, 1.0], 0.9))
        assert not any(ok for ok, _ in verify_pb1(PolicyMatrix.constant(5, 2, 0.0), sc))


class TestSearch:
    def test_params_invariants(self):
        for kwargs in (dict(sigma_hi=0.01, sigma_lo=0.02), dict(sigma_lo=0.0), dict(mc_samples=0),
                       dict(max_bisect=0), dict(escalation_factor=1), dict(max_escalations=-1)):
            with pytest.raises(ConfigError):
                SoftSearchParams(**kwargs)

    def test_unreachable_band_rejected(self):
        with pytest.raises(ConfigError):
            algorithm1(identical(10, 1, soft([0.5], 0.995)))

    def test_small_alpha(self):
        sc = identical(10, 1, soft([1e-6], 0.9))
        params = SoftSearchParams(mc_samples=2000, master_seed=3)
        out = algorithm1(sc, params)
        loc = out.per_location[0]
        err = mc_error(loc.samples)
        assert k_threshold(10, 1e-6) == 1
        assert loc.gamma_final < 5
        assert 0.9 + 0.01 - err <= exact_tail(out.policy.rho[:, 0], 1) <= 0.9 + 0.02 + err

    def test_default_settings_terminate(self):
        out = algorithm1(default_soft(0), SoftSearchParams(master_seed=0))
        assert len(out.per_location) == 6
        for loc in out.per_location:
            assert 0.01 <= loc.q_estimate <= 0.02
            assert 0 < loc.gamma_final <= 70

    def test_seeded_snapshot(self):
        sc = identical(10, 1, soft([0.8], 0.9))
        out = algorithm1(sc, SoftSearchParams(mc_samples=10_000, master_seed=42))
        loc = out.per_location[0]
        assert exact_tail(out.policy.rho[:, 0], 8) >= 0.9
        assert loc.gamma_final == pytest.approx(8.90625, abs=1e-12)

    def test_deterministic(self):
        sc = default_soft(1, 0.93)
        a = algorithm1(sc, SoftSearchParams(master_seed=5))
        b = algorithm1(sc, SoftSearchParams(master_seed=5))
        assert a.policy == b.policy and a.per_location == b.per_location

    def test_fresh_draws_flag(self):
        sc = identical(20, 1, soft([0.7], 0.9))
        out = algorithm1(sc, SoftSearchParams(master_seed=1, fresh_upper_draws=True, mc_samples=5000))
        assert 0.01 <= out.per_location[0].q_estimate <= 0.02

    def test_escalation_path(self):
        sc = identical(30, 1, soft([0.8], 0.9))
        params = SoftSearchParams(max_bisect=1, max_escalations=2, escalation_factor=3, mc_samples=100)
        with pytest.raises(NonTerminationError) as info:
            algorithm1(sc, params)
        attempts = info.value.diagnostics["attempts"]
        assert [a["samples"] for a in attempts] == [100, 300, 900]
        assert all(len(a["trajectory"]) >= 1 for a in attempts)

    def test_relaxation_sandwich(self):
        for rep in range(3):
            sc = default_soft(rep)
            out = algorithm1(sc, SoftSearchParams(master_seed=rep))
            assert solve_pb3(sc).objective <= out.objective <= solve_pb4(sc).objective

    def test_upper_side_fails_when_band_needs_full_budget(self):
        # q(T) = 1 - beta = sigma_lo, so the search stops at gamma = T, above T - 1 + beta
        sc = identical(20, 1, soft([0.8], 0.99))
        out = algorithm1(sc)
        assert out.per_location[0].gamma_final == 20
        assert out.objective > solve_pb4(sc).objective

    def test_serialization(self):
        out = algorithm1(identical(10, 1, soft([0.5], 0.9)), SoftSearchParams(master_seed=2, mc_samples=2000))
        d = out.per_location[0].to_dict()
        assert "trajectory" not in d
        assert "trajectory" in out.per_location[0].to_dict(verbose=True)
