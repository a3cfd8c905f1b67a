"""Payoff estimation, best responses, incentive checks, bounds, audits."""
import math

import numpy as np
import pytest
from scipy import special

from poolsim.analysis import (
    BudgetBounds,
    bb_audit,
    best_response,
    br_dynamics,
    chernoff_tail_upper,
    docdic_check,
    expected_payoff_mc,
    floor_payoff,
    g_function,
    ocdic_check,
    pps_expected_reward_closed,
    subsidy_prob_lower,
)
from poolsim.engine import run_simulation
from poolsim.mechanisms import RollingWindow, subsidy_shape
from poolsim.model import (
    CostFunction,
    DemandModel,
    MinerProfile,
    PlatformParams,
    StrategyProfile,
    cost_eval,
)

from conftest import quiet_parse

CHERNOFF_STD_100_80 = 0.09882989575150939  # exp(100*ln(0.8) + 20)
PROB_LOWER_AT_CAPACITY = 0.022877793471864133  # 1 - 0.8*e^0.2
G_AT_D90 = 6767.2056129294915  # 0.5*90 / K(x=8/9)


def linear_miner(i=0, A=1.0, r=1.0):
    return MinerProfile(id=i, capacity_A=A, cost=CostFunction(family="linear", r=r))


class TestClosedForm:
    def test_demand_dominant_branch(self):
        params = PlatformParams(p=1.0, b=1.0, k=2.0)
        assert pps_expected_reward_closed(10.0, 40.0, params, 1000.0) == 20.0

    def test_supply_dominant_branch(self):
        params = PlatformParams(p=1.0, b=1.0, k=2.0)
        assert pps_expected_reward_closed(10.0, 40.0, params, 40.0) == 10.0

    def test_no_allocation(self):
        params = PlatformParams(p=1.0, b=1.0, k=2.0)
        assert pps_expected_reward_closed(0.0, 0.0, params, 100.0) == 0.0

    def test_bad_arguments_rejected(self):
        params = PlatformParams(p=1.0, b=1.0, k=2.0)
        with pytest.raises(ValueError):
            pps_expected_reward_closed(5.0, 4.0, params, 100.0)


class TestExpectedPayoffMc:
    def test_zero_strategy_is_exactly_zero(self):
        params = PlatformParams(p=1.0, b=1.0, k=2.0)
        profs = [linear_miner(0, A=10.0, r=1.0)]
        demand = DemandModel(family="constant", M=100.0)
        est = expected_payoff_mc(
            "pps", 0, StrategyProfile.of([0.0]), params, profs, demand,
            replicas=2000, seed=1,
        )
        assert est.mean == 0.0
        assert est.ci_half_width == 0.0

    def test_single_miner_matches_linear_payoff(self):
        # E[payoff] = b*k*a - r*a = 20 - 10 = 10 in the demand-dominant regime
        params = PlatformParams(p=1.0, b=1.0, k=2.0)
        profs = [linear_miner(0, A=10.0, r=1.0)]
        demand = DemandModel(family="constant", M=1000.0)
        est = expected_payoff_mc(
            "pps", 0, StrategyProfile.of([10.0]), params, profs, demand,
            replicas=40_000, seed=2,
        )
        assert abs(est.mean - 10.0) <= 3 * est.ci_half_width

    def test_two_miner_reward_share(self):
        params = PlatformParams(p=1.0, b=1.0, k=2.0)
        profs = [linear_miner(0, A=10.0, r=1.0), linear_miner(1, A=30.0, r=1.0)]
        demand = DemandModel(family="constant", M=1000.0)
        est = expected_payoff_mc(
            "pps", 0, StrategyProfile.of([10.0, 30.0]), params, profs, demand,
            replicas=40_000, seed=3,
        )
        reward_part = est.mean + cost_eval(profs[0].cost, 10.0)
        assert abs(reward_part - 20.0) <= max(3 * est.ci_half_width, 0.1)

    def test_matches_closed_form_on_random_configs(self):
        # constant demand M = 3*k*sum(A): min inside vs outside agree
        rng = np.random.default_rng(7)
        for trial in range(20):
            n = int(rng.integers(1, 4))
            k = float(rng.uniform(0.5, 4.0))
            b = float(rng.uniform(0.5, 2.0))
            caps = rng.uniform(1.0, 5.0, n)
            allocs = caps * rng.uniform(0.2, 1.0, n)
            params = PlatformParams(p=1.0, b=b, k=k)
            profs = [linear_miner(i, A=float(caps[i]), r=0.5) for i in range(n)]
            demand = DemandModel(family="constant", M=3.0 * k * float(caps.sum()))
            est = expected_payoff_mc(
                "pps", 0, StrategyProfile.of(allocs), params, profs, demand,
                replicas=20_000, seed=100 + trial,
            )
            reward_mc = est.mean + cost_eval(profs[0].cost, float(allocs[0]))
            reward_cf = pps_expected_reward_closed(
                float(allocs[0]), float(allocs.sum()), params, demand.mu_F
            )
            assert abs(reward_mc - reward_cf) <= max(3 * est.ci_half_width, 0.005 * reward_cf)


class TestFloorPayoff:
    def test_power_cost_example(self):
        cost = CostFunction(family="power", c=1.0, q=2.0)
        assert floor_payoff(5.0, 10.0, cost) == 25.0

    def test_zero_allocation(self):
        cost = CostFunction(family="power", c=1.0, q=2.0)
        assert floor_payoff(0.0, 10.0, cost) == 0.0

    def test_linear_cost_cancels(self):
        cost = CostFunction(family="linear", r=3.0)
        for a in np.linspace(0.0, 8.0, 9):
            assert floor_payoff(float(a), 3.0, cost) == 0.0

    def test_nondecreasing_up_to_capacity(self):
        cost = CostFunction(family="power", c=0.7, q=3.0)
        prof = MinerProfile(id=0, capacity_A=4.0, cost=cost)
        ct = 0.7 * 3.0 * 4.0**2
        vals = [floor_payoff(a, ct, cost) for a in np.linspace(0.0, 4.0, 200)]
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


class TestBestResponse:
    def test_pps_cheap_cost_full_capacity(self):
        params = PlatformParams(p=1.0, b=1.0, k=2.0)
        profs = [linear_miner(0, A=10.0, r=0.5)]
        demand = DemandModel(family="constant", M=100.0)
        br = best_response(
            "pps", 0, np.array([10.0]), params, profs, demand,
            grid_points=64, replicas=4000, seed=0,
        )
        assert abs(br.argmax_a - 10.0) <= 2 * br.grid_resolution
        assert br.method == "grid_mc"

    def test_pps_expensive_cost_zero(self):
        params = PlatformParams(p=1.0, b=1.0, k=2.0)
        profs = [linear_miner(0, A=10.0, r=3.0)]
        demand = DemandModel(family="constant", M=100.0)
        br = best_response(
            "pps", 0, np.array([10.0]), params, profs, demand,
            grid_points=64, replicas=4000, seed=0,
        )
        assert abs(br.argmax_a) <= 2 * br.grid_resolution
        assert abs(br.value) <= 0.5

    def test_floor_objective_power_cost(self):
        params = PlatformParams(p=1.0, b=1.0, k=2.0)
        cost = CostFunction(family="power", c=1.0, q=2.0)
        profs = [MinerProfile(id=0, capacity_A=5.0, cost=cost)]
        demand = DemandModel(family="constant", M=100.0)
        br = best_response(
            "ppss", 0, np.array([5.0]), params, profs, demand,
            grid_points=64, replicas=100, seed=0, objective="floor",
        )
        assert br.argmax_a == pytest.approx(5.0, abs=1e-9)
        assert br.value == pytest.approx(25.0, rel=1e-9)
        assert br.method == "closed_form"

    def test_flat_objective_ties_toward_capacity(self):
        # linear cost with c~ = r makes the floor identically zero
        params = PlatformParams(p=1.0, b=1.0, k=2.0)
        profs = [linear_miner(0, A=3.0, r=1.0)]
        demand = DemandModel(family="constant", M=100.0)
        br = best_response(
            "ppss", 0, np.array([3.0]), params, profs, demand,
            grid_points=64, replicas=100, seed=0, objective="floor",
        )
        assert br.argmax_a == pytest.approx(3.0, abs=1e-9)

    def test_curve_shape(self):
        params = PlatformParams(p=1.0, b=1.0, k=2.0)
        profs = [linear_miner(0, A=2.0, r=0.5)]
        demand = DemandModel(family="constant", M=50.0)
        br, curve = best_response(
            "pps", 0, np.array([2.0]), params, profs, demand,
            grid_points=16, replicas=2000, seed=0, return_curve=True,
        )
        assert len(curve) == 16
        assert curve[0][0] == 0.0 and curve[-1][0] == 2.0
        assert all(len(pt) == 3 for pt in curve)

    def test_rejects_bad_arguments(self):
        params = PlatformParams(p=1.0, b=1.0, k=2.0)
        profs = [linear_miner(0)]
        demand = DemandModel(family="constant", M=10.0)
        with pytest.raises(ValueError):
            best_response("pps", 0, np.array([1.0]), params, profs, demand, grid_points=1)
        with pytest.raises(ValueError):
            best_response(
                "pps", 0, np.array([1.0]), params, profs, demand, objective="nonsense"
            )


class TestOcdicCheck:
    PARAMS = PlatformParams(p=1.0, b=1.0, k=2.0)
    DEMAND = DemandModel(family="constant", M=100.0)

    def test_pps_cheap_cost_passes(self):
        profs = [linear_miner(0, A=5.0, r=0.5), linear_miner(1, A=5.0, r=0.5)]
        verdicts = ocdic_check("pps", self.PARAMS, profs, self.DEMAND, replicas=4000, seed=0)
        assert all(v["passed"] for v in verdicts)

    def test_power_cost_boundary_flip(self):
        # C'(A) = 2cA crosses b*k = 2 at c = 1/A = 1
        for c, expect_pass in ((0.8, True), (1.2, False)):
            cost = CostFunction(family="power", c=c, q=2.0)
            profs = [MinerProfile(id=0, capacity_A=1.0, cost=cost)]
            verdicts = ocdic_check(
                "pps", self.PARAMS, profs, self.DEMAND, replicas=8000, seed=0
            )
            assert verdicts[0]["passed"] is expect_pass
            if not expect_pass:
                # marginal-cost crossing b*k at a = bk/(2c) = 0.833
                assert 0.6 <= verdicts[0]["argmax"] <= 0.95

    def test_ppss_uses_floor_objective_by_default(self):
        profs = [linear_miner(0, A=1.0, r=150.0)]
        params = PlatformParams(p=1.0, b=1.0, k=100.0, lam=0.8)
        demand = DemandModel(family="constant", M=300.0)
        verdicts = ocdic_check("ppss", params, profs, demand, replicas=2000, seed=0)
        assert verdicts[0]["objective"] == "floor"
        assert verdicts[0]["passed"]


class TestDocdicCheck:
    def test_pps_shortfall_counterexample(self):
        # two miners, A=1, k=10, b=1, r=1, realized M=2: interior optimum
        params = PlatformParams(p=1.0, b=1.0, k=10.0)
        profs = [linear_miner(0), linear_miner(1)]
        verdicts = docdic_check(
            "pps", params, profs, realized_M=2.0, windows=None,
            replicas=20_000, seed=0,
        )
        for v in verdicts:
            assert not v["passed"]
            assert 0.35 <= v["argmax"] <= 0.50

    def test_pps_demand_dominant_round_passes(self):
        params = PlatformParams(p=1.0, b=1.0, k=2.0)
        profs = [linear_miner(0, A=2.0, r=0.5), linear_miner(1, A=2.0, r=0.5)]
        verdicts = docdic_check(
            "pps", params, profs, realized_M=50.0, windows=None,
            replicas=4000, seed=0,
        )
        assert all(v["passed"] for v in verdicts)

    def test_ppss_warm_windows_pass_with_diagnostic(self):
        params = PlatformParams(p=1.0, b=1.0, k=100.0, lam=0.8, window_N=5)
        profs = [linear_miner(0, A=1.0, r=150.0)]
        windows = [RollingWindow(5)]
        for _ in range(5):
            windows[0].push(100.0)
        verdicts = docdic_check(
            "ppss", params, profs, realized_M=300.0, windows=windows,
            replicas=4000, seed=0, mc_diagnostic=True,
        )
        assert verdicts[0]["passed"]
        assert verdicts[0]["objective"] == "floor"
        assert "mc_argmax" in verdicts[0]
        assert 0.0 <= verdicts[0]["mc_argmax"] <= 1.0

    def test_rejects_nonpositive_demand(self):
        params = PlatformParams(p=1.0, b=1.0, k=2.0)
        with pytest.raises(ValueError):
            docdic_check("pps", params, [linear_miner(0)], realized_M=0.0, windows=None)


class TestChernoff:
    def test_reference_point(self):
        std, paper = chernoff_tail_upper(100.0, 80.0)
        assert std == pytest.approx(CHERNOFF_STD_100_80, rel=1e-12)
        assert paper == pytest.approx(0.8 * math.exp(0.2), rel=1e-12)

    def test_bounds_exact_tail_on_random_pairs(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            s = float(rng.uniform(1.0, 500.0))
            t = float(rng.uniform(0.05, 0.98)) * s
            std, paper = chernoff_tail_upper(s, t)
            exact = float(special.gammainc(s, t))
            assert exact <= std + 1e-12
            assert exact <= paper + 1e-12

    def test_bounds_monte_carlo_tail(self):
        rng = np.random.default_rng(6)
        draws = rng.standard_gamma(100.0, size=1_000_000)
        emp = np.mean(draws <= 80.0)
        std, paper = chernoff_tail_upper(100.0, 80.0)
        assert emp <= std and emp <= paper

    def test_vacuous_limit(self):
        std, _ = chernoff_tail_upper(100.0, 99.999)
        assert std > 0.999

    def test_domain_error(self):
        with pytest.raises(ValueError):
            chernoff_tail_upper(10.0, 10.0)
        with pytest.raises(ValueError):
            chernoff_tail_upper(10.0, 12.0)
        with pytest.raises(ValueError):
            chernoff_tail_upper(10.0, 0.0)


class TestSubsidyProbLower:
    def test_at_capacity(self):
        assert subsidy_prob_lower(1.0, 1.0, 0.8) == pytest.approx(
            PROB_LOWER_AT_CAPACITY, rel=1e-12
        )

    def test_zero_at_threshold_allocation(self):
        assert subsidy_prob_lower(0.8, 1.0, 0.8) == pytest.approx(0.0, abs=1e-15)

    def test_nonnegative_below_threshold(self):
        # u*e^(1-u) <= 1 for all u, so the bound stays in [0, 1)
        u = 0.8 / 0.3
        expected = 1.0 - u * math.exp(1.0 - u)
        assert subsidy_prob_lower(0.3, 1.0, 0.8) == pytest.approx(expected, rel=1e-12)
        assert 0.0 <= subsidy_prob_lower(0.3, 1.0, 0.8) < 1.0

    def test_domain(self):
        with pytest.raises(ValueError):
            subsidy_prob_lower(0.0, 1.0, 0.8)
        with pytest.raises(ValueError):
            subsidy_prob_lower(1.5, 1.0, 0.8)

    def test_identity_with_shape_at_mean_output(self):
        # the bound equals the shape function at D = a*k, for any k
        rng = np.random.default_rng(9)
        for _ in range(100):
            A = float(rng.uniform(0.5, 20.0))
            a = float(rng.uniform(0.1, 1.0)) * A
            lam = float(rng.uniform(0.05, 0.95))
            k = float(rng.uniform(0.5, 200.0))
            params = PlatformParams(p=1.0, b=1.0, k=k, lam=lam)
            prof = linear_miner(0, A=A, r=1.0)
            lhs = subsidy_prob_lower(a, A, lam)
            rhs = max(0.0, float(subsidy_shape(a * k, prof, params)))
            assert abs(lhs - rhs) <= 1e-12


class TestGFunction:
    PARAMS = PlatformParams(p=1.0, b=1.0, k=100.0, lam=0.8)
    PROF = linear_miner(0, A=1.0, r=150.0)

    def test_zero_numerator(self):
        prof = linear_miner(0, A=1.0, r=150.0)
        out = g_function(np.array([50.0, 90.0, 500.0]), 100.0, self.PARAMS, prof)
        assert np.all(out == 0.0)

    def test_chain_value(self):
        assert g_function(90.0, 150.0, self.PARAMS, self.PROF) == pytest.approx(
            G_AT_D90, rel=1e-10
        )

    def test_convex_on_supercritical_domain(self):
        # lam*A*k = 80; scan [84, 500]
        D = np.linspace(1.05 * 80.0, 5 * 100.0, 400)
        g = g_function(D, 150.0, self.PARAMS, self.PROF)
        assert np.all(np.diff(g, 2) >= -1e-9)


class TestBudgetAudit:
    def test_bounds_ordering_enforced(self):
        with pytest.raises(ValueError):
            BudgetBounds(theta=1.0, gamma=0.5)

    def _pps_ledger(self, rounds=500, a=None):
        cfg = quiet_parse({
            "mechanism": "pps",
            "platform": {"p": 1.0, "k": 2.0},
            "miners": [{
                "capacity_A": 3.0,
                "cost": {"family": "linear", "r": 0.5},
                "policy": {"kind": "static", "a": 3.0 if a is None else a},
            }],
            "demand": {"family": "constant", "M": 20.0},
            "rounds": rounds, "seed": 17,
        })
        return run_simulation(cfg)

    def test_pps_ledger_within_theorem_bounds(self):
        report = bb_audit(self._pps_ledger(), PlatformParams(p=1.0, b=1.0, k=2.0),
                          BudgetBounds(theta=0.0, gamma=1.0))
        assert report["per_round_pass"]
        assert report["long_term_pass"]
        assert 0.0 <= report["ratio_min"] <= report["ratio_max"] <= 1.0

    def test_idle_ledger_mean_zero(self):
        report = bb_audit(self._pps_ledger(rounds=50, a=0.0),
                          PlatformParams(p=1.0, b=1.0, k=2.0),
                          BudgetBounds(theta=0.0, gamma=1.0))
        assert report["mean_ratio"] == 0.0
        assert report["long_term_pass"]

    def test_empty_ledger_rejected(self):
        from poolsim.engine import SimulationLedger

        with pytest.raises(ValueError):
            bb_audit(SimulationLedger(), PlatformParams(p=1.0, b=1.0, k=1.0),
                     BudgetBounds(theta=0.0, gamma=1.0))


class TestBrDynamics:
    def test_cheap_cost_converges_to_capacity_immediately(self):
        params = PlatformParams(p=1.0, b=1.0, k=2.0)
        profs = [linear_miner(0, A=3.0, r=0.5), linear_miner(1, A=2.0, r=0.5)]
        demand = DemandModel(family="constant", M=50.0)
        out = br_dynamics("pps", params, profs, demand, replicas=3000, seed=0)
        assert out["converged"]
        assert np.allclose(out["trajectory"][1], [3.0, 2.0], atol=0.1)
        assert np.allclose(out["fixed_point"], [3.0, 2.0], atol=0.1)

    def test_expensive_cost_converges_to_zero(self):
        params = PlatformParams(p=1.0, b=1.0, k=2.0)
        profs = [linear_miner(0, A=3.0, r=3.0), linear_miner(1, A=2.0, r=3.0)]
        demand = DemandModel(family="constant", M=50.0)
        out = br_dynamics(
            "pps", params, profs, demand, start=[3.0, 2.0], replicas=3000, seed=0
        )
        assert out["converged"]
        assert np.allclose(out["fixed_point"], [0.0, 0.0], atol=0.1)

    def test_shortfall_interior_fixed_point(self):
        # symmetric first-order condition M*a_other/(a + a_other)^2 = r
        # at M=2, r=1 gives a = M/(4r) = 0.5 for each miner
        params = PlatformParams(p=1.0, b=1.0, k=10.0)
        profs = [linear_miner(0), linear_miner(1)]
        demand = DemandModel(family="constant", M=2.0)
        out = br_dynamics(
            "pps", params, profs, demand, start=[1.0, 1.0],
            replicas=4000, seed=0,
        )
        assert out["converged"]
        assert np.allclose(out["fixed_point"], [0.5, 0.5], atol=0.05)

    def test_fixed_point_is_mutual_best_response(self):
        params = PlatformParams(p=1.0, b=1.0, k=10.0)
        profs = [linear_miner(0), linear_miner(1)]
        demand = DemandModel(family="constant", M=2.0)
        out = br_dynamics(
            "pps", params, profs, demand, start=[1.0, 1.0],
            replicas=4000, seed=0,
        )
        fp = out["fixed_point"]
        for i in range(2):
            br = best_response(
                "pps", i, fp, params, profs, demand,
                grid_points=64, replicas=4000, seed=0,
            )
            assert abs(br.argmax_a - fp[i]) <= 2 * br.grid_resolution

    def test_non_convergence_reported(self):
        params = PlatformParams(p=1.0, b=1.0, k=10.0)
        profs = [linear_miner(0), linear_miner(1)]
        demand = DemandModel(family="constant", M=2.0)
        out = br_dynamics(
            "pps", params, profs, demand, max_iters=1, start=[1.0, 1.0],
            replicas=2000, seed=0,
        )
        assert not out["converged"]
        assert out["fixed_point"] is None
        assert len(out["trajectory"]) == 2

    def test_rejects_bad_iteration_count(self):
        params = PlatformParams(p=1.0, b=1.0, k=1.0)
        with pytest.raises(ValueError):
            br_dynamics("pps", params, [linear_miner(0)],
                        DemandModel(family="constant", M=5.0), max_iters=0)
