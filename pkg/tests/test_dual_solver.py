import numpy as np
import pytest

from olpsim.core import DualPrice
from olpsim.dual_solver import (DualProblem, SolverConfig, dual_objective,
                                dual_subgradient, lipschitz_bound,
                                offline_dual, offline_optimum,
                                oracle_grid_min, solve_dual)
from olpsim.simplex import solve_packing_lp

from conftest import random_instance

_METHODS = ("epigraph_highs", "epigraph_simplex", "projected_subgradient")


def _random_problem(rng, k=None, m=None):
    k = k if k is not None else int(rng.integers(2, 30))
    m = m if m is not None else int(rng.integers(1, 3))
    rewards = rng.uniform(0.0, 0.9, size=k)
    if rng.random() < 0.3:
        rewards[rng.integers(0, k)] = -0.2
    cons = np.abs(rng.normal(0.5, 1.0, size=(k, m)))
    d = rng.uniform(0.4, 0.8, size=m)
    return DualProblem(rewards=rewards, consumption=cons, d=d, scale=1.0 / k)


class TestObjective:
    def test_single_order_values(self):
        prob = DualProblem(rewards=np.array([2.0]), consumption=np.array([[1.0]]),
                           d=np.array([0.5]), scale=1.0)
        assert dual_objective(prob, np.array([0.0])) == pytest.approx(2.0)
        assert dual_objective(prob, np.array([2.0])) == pytest.approx(1.0)
        assert dual_objective(prob, np.array([3.0])) == pytest.approx(1.5)

    def test_large_capacity_moves_minimum_to_zero(self):
        prob = DualProblem(rewards=np.array([2.0]), consumption=np.array([[1.0]]),
                           d=np.array([1.5]), scale=1.0)
        res = solve_dual(prob)
        assert res.objective == pytest.approx(2.0, abs=1e-9)
        assert res.price.values[0] == pytest.approx(0.0, abs=1e-9)

    def test_convexity_along_segments(self, rng):
        for _ in range(20):
            prob = _random_problem(rng)
            p = rng.uniform(0, 2, prob.m)
            q = rng.uniform(0, 2, prob.m)
            lam = float(rng.uniform(0, 1))
            mid = lam * p + (1 - lam) * q
            assert dual_objective(prob, mid) <= (
                lam * dual_objective(prob, p) + (1 - lam) * dual_objective(prob, q) + 1e-12)

    def test_scale_coherence(self, rng):
        # multiplying d and scale by the same factor scales the objective
        prob = _random_problem(rng)
        factor = 7.5
        scaled = DualProblem(rewards=prob.rewards, consumption=prob.consumption,
                             d=prob.d * factor, scale=prob.scale * factor)
        p = rng.uniform(0, 1, prob.m)
        assert dual_objective(scaled, p) == pytest.approx(
            factor * dual_objective(prob, p), rel=1e-12)
        assert np.allclose(solve_dual(scaled).price.values,
                           solve_dual(prob).price.values, atol=1e-7)


class TestSubgradient:
    def test_matches_directional_finite_differences(self, rng):
        for _ in range(25):
            prob = _random_problem(rng)
            p = rng.uniform(0.05, 1.5, prob.m)
            g = dual_subgradient(prob, p)
            h = 1e-7
            for i in range(prob.m):
                e = np.zeros(prob.m)
                e[i] = h
                forward = (dual_objective(prob, p + e) - dual_objective(prob, p)) / h
                backward = (dual_objective(prob, p) - dual_objective(prob, p - e)) / h
                # convexity sandwiches any subgradient between one-sided slopes
                assert backward - 1e-6 <= g[i] <= forward + 1e-6

    def test_subgradient_inequality(self, rng):
        for _ in range(25):
            prob = _random_problem(rng)
            p = rng.uniform(0, 1.5, prob.m)
            q = rng.uniform(0, 1.5, prob.m)
            g = dual_subgradient(prob, p)
            lhs = dual_objective(prob, q)
            rhs = dual_objective(prob, p) + g @ (q - p)
            assert lhs >= rhs - 1e-10


class TestSolveRoutes:
    def test_routes_agree_with_grid_oracle(self, rng):
        cfg = {m: SolverConfig(method=m) for m in _METHODS}
        for _ in range(15):
            prob = _random_problem(rng, k=int(rng.integers(2, 20)))
            pitch = 1e-3
            grid_val, _ = oracle_grid_min(prob, pitch)
            tol = lipschitz_bound(prob) * pitch + 1e-6
            for method in _METHODS:
                res = solve_dual(prob, cfg[method])
                assert res.objective <= grid_val + tol, method
                # iterative route may sit above the true minimum but
                # never below it beyond arithmetic error
                assert res.objective >= grid_val - tol, method

    def test_exact_routes_agree_tightly(self, rng):
        for _ in range(20):
            prob = _random_problem(rng)
            a = solve_dual(prob, SolverConfig(method="epigraph_highs"))
            b = solve_dual(prob, SolverConfig(method="epigraph_simplex"))
            assert a.objective == pytest.approx(b.objective, abs=1e-8)

    def test_auto_routes_to_exact(self):
        prob = DualProblem(rewards=np.array([2.0]), consumption=np.array([[1.0]]),
                           d=np.array([0.5]), scale=1.0)
        res = solve_dual(prob, SolverConfig(method="auto"))
        assert res.method == "epigraph_highs"
        assert res.converged
        assert res.price.values[0] == pytest.approx(2.0, abs=1e-9)

    def test_solution_in_price_region(self, rng):
        for _ in range(10):
            prob = _random_problem(rng)
            for method in _METHODS:
                res = solve_dual(prob, SolverConfig(method=method))
                assert res.price.values.min() >= -1e-12
                cap = prob.region_cap()
                assert res.price.values.sum() <= cap + 1e-6

    def test_warm_start_deterministic(self, rng):
        prob = _random_problem(rng)
        cfg = SolverConfig(method="projected_subgradient")
        warm = np.full(prob.m, 0.3)
        r1 = solve_dual(prob, cfg, warm=warm)
        r2 = solve_dual(prob, cfg, warm=warm)
        assert np.array_equal(r1.price.values, r2.price.values)
        assert r1.iterations == r2.iterations


class TestGridOracle:
    def test_rejects_three_resources(self):
        prob = DualProblem(rewards=np.array([1.0]), consumption=np.ones((1, 3)),
                           d=np.full(3, 0.5), scale=1.0)
        with pytest.raises(ValueError):
            oracle_grid_min(prob, 0.1)

    def test_finds_breakpoint_on_single_order(self):
        prob = DualProblem(rewards=np.array([2.0]), consumption=np.array([[1.0]]),
                           d=np.array([0.5]), scale=1.0)
        value, price = oracle_grid_min(prob, 1e-3)
        assert value == pytest.approx(1.0, abs=lipschitz_bound(prob) * 1e-3 + 1e-9)
        assert isinstance(price, DualPrice)


class TestOffline:
    def test_strong_duality_against_packing_primal(self, rng):
        for _ in range(25):
            inst = random_instance(rng)
            dual_value = offline_optimum(inst)
            primal_value, _, _ = solve_packing_lp(inst.rewards, inst.consumption,
                                                  inst.b)
            assert dual_value == pytest.approx(primal_value, abs=1e-7)

    def test_two_order_hand_case(self, tiny_instance):
        # rewards (3, 1), unit consumption, b = 1: take the better order
        assert offline_optimum(tiny_instance) == pytest.approx(3.0, abs=1e-9)

    def test_relaxing_capacity_adds_value(self, tiny_instance):
        import dataclasses
        bigger = dataclasses.replace(tiny_instance, b=np.array([1.5]))
        assert offline_optimum(bigger) == pytest.approx(3.5, abs=1e-9)

    def test_certificate_price_reproduces_value(self, rng):
        inst = random_instance(rng, n=10, m=2)
        value, res = offline_dual(inst)
        prob = DualProblem.hindsight(inst)
        assert dual_objective(prob, res.price) == pytest.approx(value, abs=1e-8)
