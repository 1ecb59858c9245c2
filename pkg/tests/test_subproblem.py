from __future__ import annotations

import itertools
import math
from pathlib import Path

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from switchtr.dynamics import DECAY_PRICING, SIR_PRICING, random_admissible
from switchtr.grid import ControlGrid, TimeGrid, sign_l1_distance, sign_pattern
from switchtr.io import load_instance, save_instance
from switchtr.pricing import eval_g, prox_scalar
from switchtr.subproblem import (BudgetError, ModelInstance, brute_force_profile,
                                 brute_force_subproblem, build_tables, extract_solution,
                                 model_offset, model_value, stage_candidate)

FIXTURES = Path(__file__).parent / "fixtures"


def instance(u, grad, delta=1.0, cap=None, tau=1.0, sigma=1.0, pricing=DECAY_PRICING):
    u = np.array(u, dtype=float, ndmin=2)
    grid = TimeGrid(0.0, tau * u.shape[1], u.shape[1])
    cap = u.size if cap is None else cap
    return ModelInstance(ControlGrid(grid, u), grad, delta, tuple(pricing), sigma, cap)


def random_instance(rng, n, n_t, cap=None):
    pricing = DECAY_PRICING if n == 1 else SIR_PRICING
    u = random_admissible(rng, pricing, n_t)
    grad = rng.uniform(-5, 5, u.shape)
    tau = rng.uniform(0.1, 2.0)
    grid = TimeGrid(0.0, tau * n_t, n_t)
    cap = u.size if cap is None else cap
    return ModelInstance(ControlGrid(grid, u), grad, float(rng.uniform(0.01, 10)), pricing,
                         float(rng.uniform(0.0, 2.0)), cap)


def scipy_cell_min(g, q, u, delta):
    """Minimum over the active branch of q*w + g(w) (+ prox term if u is on), by bounded Brent."""
    best = math.inf
    for piece in g.pieces:
        def f(w):
            val = q * w + eval_g(g, w)
            return val + (u - w) ** 2 / (2 * delta) if u > 0 else val
        lo, hi = piece.lo, piece.hi
        res = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
        best = min(best, res.fun, f(lo), f(hi))
    return best


def independent_oracle(inst, budget):
    """Enumerate sign patterns; each active cell minimized numerically by scipy."""
    n, n_t = inst.u.shape
    uv = inst.u.values
    on_cost = np.array([[inst.tau * scipy_cell_min(inst.pricing[i], inst.grad[i, j], uv[i, j],
                                                   inst.delta) for j in range(n_t)]
                        for i in range(n)])
    s_u = sign_pattern(uv)
    best = math.inf
    for bits in itertools.product((0, 1), repeat=n * n_t):
        p = np.array(bits).reshape(n, n_t)
        if np.sum(p != s_u) > budget:
            continue
        padded = np.pad(p, ((0, 0), (1, 1)))
        tv = np.abs(np.diff(padded, axis=1)).sum()
        best = min(best, float(np.sum(on_cost[p == 1])) + inst.sigma_sgn * tv)
    return best


class TestStageCandidate:
    def test_off(self):
        assert stage_candidate(instance([[0.5]], [[1.0]]), 0, 0, 0) == (0.0, 0.0)

    def test_active_on_active(self):
        w, cost = stage_candidate(instance([[0.65]], [[0.0]]), 0, 0, 1)
        assert w == pytest.approx(1.15 / 2.4, abs=1e-15)
        assert w == pytest.approx(0.4791666666, abs=1e-9)
        assert cost == pytest.approx(eval_g(DECAY_PRICING[0], w) + (0.65 - w) ** 2 / 2, abs=1e-15)

    def test_on_from_off(self):
        w, cost = stage_candidate(instance([[0.0]], [[-2.0]], tau=0.5), 0, 0, 1)
        assert w == 1.0
        assert cost == pytest.approx(0.5 * -1.4, abs=1e-15)


class TestTables:
    def test_single_cell_base_case(self):
        t = build_tables(instance([[0.0]], [[-2.0]], cap=1))
        assert t.phi[0, 0, 0] == 0.0
        assert t.phi[0, 1, 1] == pytest.approx(-0.4, abs=1e-14)
        assert math.isinf(t.phi[0, 0, 1]) and math.isinf(t.phi[0, 1, 0])

    def test_one_recursion_step(self):
        t = build_tables(instance([[0.0, 0.0]], [[-2.0, -2.0]], cap=2))
        assert t.phi[1, 1, 2] == pytest.approx(-1.8, abs=1e-14)

    def test_zero_budget_zero_control(self):
        t = build_tables(instance(np.zeros((1, 5)), np.full((1, 5), -3.0), cap=0))
        assert t.phi.shape == (5, 2, 1)
        assert np.all(t.phi[:, 0, 0] == 0.0)
        assert np.all(np.isinf(t.phi[:, 1, 0]))

    def test_reachability(self):
        rng = np.random.default_rng(7)
        inst = random_instance(rng, 1, 6, cap=3)
        t = build_tables(inst)
        s = sign_pattern(inst.u)[0]
        for alpha in (0, 1):
            for b in range(4):
                assert np.isfinite(t.phi[0, alpha, b]) == (int(s[0] != alpha) == b)


class TestExtraction:
    @pytest.mark.parametrize("grad,budget,w,value", [
        ([-2.0, -2.0], 2, [1.0, 1.0], -0.8),
        ([-2.0, 0.0], 2, [0.0, 0.0], 0.0),
        ([-2.0, -2.0], 1, [0.0, 0.0], 0.0),
    ])
    def test_two_cell_examples(self, grad, budget, w, value):
        inst = instance([[0.0, 0.0]], [grad], cap=2)
        sol = extract_solution(build_tables(inst), inst, budget)
        assert sol.w.values.tolist() == [w]
        assert sol.value == pytest.approx(value, abs=1e-14)
        assert independent_oracle(inst, budget) == pytest.approx(value, abs=1e-10)

    def test_budget_above_cap_rejected(self):
        inst = instance([[0.0, 0.0]], [[-2.0, -2.0]], cap=1)
        with pytest.raises(BudgetError):
            extract_solution(build_tables(inst), inst, 2)

    def test_zero_budget_keeps_pattern(self):
        rng = np.random.default_rng(8)
        inst = random_instance(rng, 2, 5)
        sol = extract_solution(build_tables(inst), inst, 0)
        assert sol.flips == 0
        uv = inst.u.values
        for i, j in zip(*np.nonzero(uv)):
            expected = prox_scalar(inst.pricing[i], inst.delta, uv[i, j] - inst.delta * inst.grad[i, j])
            assert sol.w.values[i, j] == expected

    @pytest.mark.parametrize("n,n_t", [(1, 1), (1, 4), (1, 9), (2, 1), (2, 3), (2, 5)])
    def test_matches_enumeration(self, n, n_t):
        rng = np.random.default_rng(100 * n + n_t)
        for _ in range(4):
            inst = random_instance(rng, n, n_t)
            tables = build_tables(inst)
            values, _ = brute_force_profile(inst)
            for b in range(n * n_t + 1):
                sol = extract_solution(tables, inst, b)
                assert sol.value == pytest.approx(values[b], abs=1e-10)
                assert model_value(inst, sol.w) == pytest.approx(sol.value, abs=1e-10)
                assert sol.flips == sign_l1_distance(inst.u, sol.w) <= b

    @pytest.mark.parametrize("n,n_t", [(1, 5), (2, 3)])
    def test_matches_numerical_cell_minimization(self, n, n_t):
        rng = np.random.default_rng(n_t)
        inst = random_instance(rng, n, n_t)
        tables = build_tables(inst)
        for b in range(n * n_t + 1):
            assert extract_solution(tables, inst, b).value == pytest.approx(
                independent_oracle(inst, b), abs=1e-9)

    def test_requery_is_bitwise(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            n = int(rng.integers(1, 3))
            inst = random_instance(rng, n, int(rng.integers(1, 8)))
            big = build_tables(inst)
            for b in range(inst.budget_cap + 1):
                fresh = ModelInstance(inst.u, inst.grad, inst.delta, inst.pricing, inst.sigma_sgn, b)
                assert (extract_solution(big, inst, b).value
                        == extract_solution(build_tables(fresh), fresh, b).value)

    def test_value_nonincreasing_in_budget(self):
        rng = np.random.default_rng(10)
        inst = random_instance(rng, 2, 6)
        t = build_tables(inst)
        vals = [extract_solution(t, inst, b).value for b in range(inst.budget_cap + 1)]
        assert all(b <= a for a, b in zip(vals, vals[1:]))

    def test_ties_prefer_fewer_active_cells(self):
        # both patterns {00} and {11} score 0: -1.0 per cell times 2 plus TV 2
        q = -1.6  # minimizer clamps at w = 1 where q + g(1) = -1
        inst = instance([[0.0, 0.0]], [[q, q]], cap=2)
        _, cost = stage_candidate(inst, 0, 0, 1)
        assert cost == pytest.approx(-1.0, abs=1e-14)
        sol = extract_solution(build_tables(inst), inst, 2)
        assert sol.pattern.tolist() == [[0, 0]]


class TestModelValue:
    def test_zero_and_self(self):
        rng = np.random.default_rng(11)
        inst = random_instance(rng, 2, 4)
        assert model_value(inst, np.zeros((2, 4))) == 0.0
        assert model_offset(inst) == model_value(inst, inst.u)

    def test_inadmissible(self):
        inst = instance([[0.0]], [[0.0]])
        assert math.isinf(model_value(inst, [[0.1]]))


class TestBruteForce:
    def test_refuses_large_instances(self):
        inst = instance(np.zeros((1, 25)), np.zeros((1, 25)), cap=0)
        with pytest.raises(ValueError):
            brute_force_subproblem(inst, 0)

    def test_examples(self):
        w, v = brute_force_subproblem(instance([[0.0, 0.0]], [[-2.0, -2.0]]), 2)
        assert w.tolist() == [[1.0, 1.0]] and v == pytest.approx(-0.8, abs=1e-14)


def test_instance_validation():
    with pytest.raises(ValueError):
        instance([[0.0, 0.0]], [[1.0]])
    with pytest.raises(ValueError):
        instance([[0.0]], [[1.0]], delta=0.0)
    with pytest.raises(ValueError):
        instance([[0.0]], [[1.0]], cap=2)


@pytest.mark.parametrize("name,value", [("dp_both_on", -0.8), ("dp_one_sided_gain", 0.0),
                                        ("dp_budget_one", 0.0)])
def test_fixtures(name, value, tmp_path):
    inst, budget = load_instance(FIXTURES / f"{name}.json")
    sol = extract_solution(build_tables(inst), inst, budget)
    assert sol.value == pytest.approx(value, abs=1e-14)
    save_instance(tmp_path / "copy.json", inst, budget)
    again, b2 = load_instance(tmp_path / "copy.json")
    assert b2 == budget and np.array_equal(again.grad, inst.grad)
