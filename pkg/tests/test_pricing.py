from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from switchtr.dynamics import DECAY_PRICING, SIR_PRICING
from switchtr.pricing import (PricingFunction, continuation_min, eval_g, eval_many, make_pricing,
                              prox_scalar, switching_value)

DECAY_G = DECAY_PRICING[0]
CHEAP_G, EXPENSIVE_G = SIR_PRICING


def grid_argmin(fun, a, b, n=2_000_001):
    xs = np.linspace(a, b, n)
    vals = fun(xs)
    k = int(np.argmin(vals))
    return xs[k], vals[k]


class TestEvaluation:
    def test_zero_is_free(self):
        assert eval_g(DECAY_G, 0.0) == 0.0

    def test_active_branch(self):
        assert eval_g(DECAY_G, 0.5) == pytest.approx(0.325, abs=1e-15)

    def test_outside_is_infinite(self):
        assert math.isinf(eval_g(DECAY_G, 0.1))
        assert math.isinf(eval_g(DECAY_G, 1.2))
        assert math.isinf(eval_g(DECAY_G, -0.5))

    def test_piecewise_cheap_measure_is_continuous_at_kink(self):
        assert eval_g(CHEAP_G, 0.3) == pytest.approx(4.0, abs=1e-12)
        assert eval_g(CHEAP_G, 0.1) == pytest.approx(5.0, abs=1e-12)
        assert eval_g(CHEAP_G, 0.6) == pytest.approx(30 * 0.36 + 0.6 + 1, abs=1e-12)

    def test_vectorized_matches_scalar(self):
        xs = np.array([0.0, 0.05, 0.3, 0.45, 0.6, 0.7])
        assert np.array_equal(eval_many(CHEAP_G, xs), [eval_g(CHEAP_G, x) for x in xs])

    def test_subdifferential_at_kink(self):
        assert CHEAP_G.subdifferential(0.3) == pytest.approx((-5.0, 19.0))
        lo, hi = DECAY_G.subdifferential(DECAY_G.a)
        assert lo == -math.inf and hi == pytest.approx(1.4 * 0.3 - 0.5)

    def test_lipschitz_is_max_abs_slope(self):
        assert DECAY_G.lipschitz == pytest.approx(0.9)
        assert CHEAP_G.lipschitz == pytest.approx(37.0)


class TestValidation:
    def test_tiling_gap_rejected(self):
        with pytest.raises(ValueError):
            PricingFunction.from_config({"a": 0.1, "b": 0.6, "pieces": [
                {"interval": [0.1, 0.3], "quad": [0, 1, 0]},
                {"interval": [0.35, 0.6], "quad": [0, 1, 0]}]})

    def test_discontinuity_rejected(self):
        with pytest.raises(ValueError):
            PricingFunction.from_config({"a": 0.1, "b": 0.6, "pieces": [
                {"interval": [0.1, 0.3], "quad": [0, 1, 0]},
                {"interval": [0.3, 0.6], "quad": [0, 1, 1]}]})

    def test_concave_joint_rejected(self):
        with pytest.raises(ValueError):
            PricingFunction.from_config({"a": 0.1, "b": 0.6, "pieces": [
                {"interval": [0.1, 0.3], "quad": [0, 2, 0]},
                {"interval": [0.3, 0.6], "quad": [0, 1, 0.3]}]})

    def test_concave_piece_rejected(self):
        with pytest.raises(ValueError):
            PricingFunction.quadratic(0.3, 1.0, -0.1, 0.0, 1.0)

    def test_nonpositive_lower_bound_rejected(self):
        with pytest.raises(ValueError):
            PricingFunction.quadratic(0.0, 1.0, 1.0, 0.0, 0.0)

    def test_declared_strong_convexity_checked(self):
        with pytest.raises(ValueError):
            PricingFunction.quadratic(0.3, 1.0, 0.7, -0.5, 0.4, m=2.0)

    def test_config_round_trip(self):
        for g in (DECAY_G, CHEAP_G, EXPENSIVE_G):
            assert PricingFunction.from_config(g.to_config()) == g
        assert make_pricing([DECAY_G.to_config()]) == [DECAY_G]


class TestProx:
    def test_interior_closed_form(self):
        assert prox_scalar(DECAY_G, 1.0, 0.65) == pytest.approx(1.15 / 2.4, abs=1e-15)

    def test_clamped_at_upper_bound(self):
        assert prox_scalar(DECAY_G, 1.0, 5.0) == 1.0

    def test_fixed_point_at_minimizer(self):
        xmin = 5.0 / 14.0
        assert prox_scalar(DECAY_G, 1e6, xmin) == pytest.approx(xmin, abs=1e-6)

    @pytest.mark.parametrize("step,x,expected", [
        # dense-grid minimization of g(w) + (w - x)^2 / (2 step) over [0.1, 0.6]
        (0.01, 0.30, 0.3),
        (0.01, 0.20, 0.25),
        (0.01, 0.80, 0.49375),
        (0.05, 0.70, 0.3),
        (1.00, -3.0, 0.3),
    ])
    def test_kinked_pricing_against_grid_search(self, step, x, expected):
        got = prox_scalar(CHEAP_G, step, x)
        ref, _ = grid_argmin(lambda w: eval_many(CHEAP_G, w) + (w - x) ** 2 / (2 * step), 0.1, 0.6)
        assert got == pytest.approx(expected, abs=1e-12)
        assert got == pytest.approx(ref, abs=1e-6)

    def test_rejects_nonpositive_step(self):
        with pytest.raises(ValueError):
            prox_scalar(DECAY_G, 0.0, 0.5)

    @settings(max_examples=300, deadline=None)
    @given(x=st.floats(-3, 3), y=st.floats(-3, 3), step=st.floats(1e-3, 100))
    def test_nonexpansive(self, x, y, step):
        for g in (DECAY_G, CHEAP_G, EXPENSIVE_G):
            assert abs(prox_scalar(g, step, x) - prox_scalar(g, step, y)) <= abs(x - y) + 1e-12

    @settings(max_examples=200, deadline=None)
    @given(x=st.floats(0.1, 0.6), d=st.floats(-50, 50))
    def test_step_length_monotone(self, x, d):
        rs = np.geomspace(1e-4, 10, 25)
        phi = np.array([abs(prox_scalar(CHEAP_G, r, x - r * d) - x) for r in rs])
        assert np.all(np.diff(phi) >= -1e-12)
        assert np.all(np.diff(phi / rs) <= 1e-12 * (1 + phi[:-1] / rs[:-1]))


class TestContinuation:
    def test_zero_slope(self):
        v, V = continuation_min(DECAY_G, 0.0)
        assert v == pytest.approx(5 / 14, abs=1e-15)
        assert V == pytest.approx(0.4 - 0.25 / 2.8, abs=1e-15)
        assert V == pytest.approx(0.310714285714, abs=1e-12)

    def test_steep_slope_clamps(self):
        v, V = continuation_min(DECAY_G, -2.0)
        assert v == 1.0
        assert V == pytest.approx(-1.4, abs=1e-15)

    def test_tangent_slope_gives_zero_value(self):
        us = switching_value(DECAY_G)
        _, V = continuation_min(DECAY_G, -eval_g(DECAY_G, us) / us)
        assert abs(V) <= 1e-10

    @pytest.mark.parametrize("slope", [-40.0, -25.0, -10.0, 0.0, 7.0])
    def test_kinked_pricing_against_grid_search(self, slope):
        v, V = continuation_min(CHEAP_G, slope)
        ref_v, ref_V = grid_argmin(lambda w: slope * w + eval_many(CHEAP_G, w), 0.1, 0.6)
        assert v == pytest.approx(ref_v, abs=1e-6)
        assert V == pytest.approx(ref_V, abs=1e-9)

    def test_flat_piece_tie_picks_smallest(self):
        g = PricingFunction.from_config({"a": 0.2, "b": 0.8, "pieces": [
            {"interval": [0.2, 0.8], "quad": [0.0, 1.0, 0.0]}]})
        v, V = continuation_min(g, -1.0)
        assert v == 0.2 and V == 0.0


class TestSwitchingValue:
    def test_decay_pricing(self):
        us = switching_value(DECAY_G)
        assert us == pytest.approx(math.sqrt(4 / 7), abs=1e-12)
        ref, _ = grid_argmin(lambda v: eval_many(DECAY_G, v) / v, 0.3, 1.0, n=1_400_001)
        assert us == pytest.approx(ref, abs=1e-6)

    def test_tangent_through_origin(self):
        us = switching_value(DECAY_G)
        assert abs(DECAY_G.derivative(us) * us - eval_g(DECAY_G, us)) <= 1e-9

    def test_boundary_minimizer(self):
        g = PricingFunction.quadratic(1.0, 2.0, 1.0, 0.0, 0.0)
        assert switching_value(g) == 1.0

    def test_sir_measures(self):
        # cheap measure: ratio decreasing on the linear piece, increasing after the kink
        assert switching_value(CHEAP_G) == pytest.approx(0.3, abs=1e-15)
        assert switching_value(EXPENSIVE_G) == pytest.approx(math.sqrt(0.1), abs=1e-12)

    def test_property_accessor(self):
        assert DECAY_G.u_star == switching_value(DECAY_G)


@settings(max_examples=200, deadline=None)
@given(x=st.floats(0.1, 0.6), y=st.floats(0.1, 0.6))
def test_midpoint_convexity(x, y):
    for g in (CHEAP_G, EXPENSIVE_G):
        assert eval_g(g, 0.5 * (x + y)) <= 0.5 * (eval_g(g, x) + eval_g(g, y)) + 1e-9
