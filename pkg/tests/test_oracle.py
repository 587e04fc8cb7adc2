import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bifisgd.errors import ConfigFault, DimensionFault, NumericalFault
from bifisgd.oracle import (
    HIGH,
    LOW,
    DesignVector,
    PenalizedOracle,
    PenaltySpec,
    RandomRealization,
    clamp_box,
    penalty_gradient,
)
from helpers import FunctionOracle


class TestDesignVector:
    def test_bounds_length_checked(self):
        with pytest.raises(DimensionFault):
            DesignVector([1.0, 2.0], lower=[0.0])

    def test_values_must_respect_bounds(self):
        with pytest.raises(ConfigFault):
            DesignVector([2.0], lower=[0.0], upper=[1.0])

    def test_crossed_bounds_rejected(self):
        with pytest.raises(ConfigFault):
            DesignVector([0.5], lower=[1.0], upper=[0.0])


class TestClampBox:
    def test_interior_point_unchanged(self):
        theta = DesignVector([0.5], lower=[-1.0], upper=[1.0])
        assert clamp_box(theta).values == pytest.approx([0.5])

    def test_upper_clamp(self):
        theta = DesignVector([0.5], lower=[-1.0], upper=[1.0])
        shifted = theta.replace_values([1.7])
        assert clamp_box(shifted).values == pytest.approx([1.0])

    def test_both_sides(self):
        theta = DesignVector([0.0, 0.0], lower=[-1.0, -1.0], upper=[1.0, 1.0])
        shifted = theta.replace_values([-3.0, 2.0])
        assert clamp_box(shifted).values == pytest.approx([-1.0, 1.0])

    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=8))
    def test_result_always_within_bounds_and_idempotent(self, raw):
        n = len(raw)
        theta = DesignVector(np.zeros(n), lower=-np.ones(n), upper=np.ones(n))
        clamped = clamp_box(theta.replace_values(raw))
        assert np.all(clamped.values >= -1.0) and np.all(clamped.values <= 1.0)
        assert np.array_equal(clamp_box(clamped).values, clamped.values)


class TestRandomRealization:
    def test_index_one_based(self):
        with pytest.raises(ConfigFault):
            RandomRealization(np.zeros(2), index=0)
        assert RandomRealization(np.zeros(2), index=1).index == 1


def _constant_oracle(vector):
    vector = np.asarray(vector, dtype=float)
    return FunctionOracle(vector.size, lambda t, xi: vector)


class TestPenaltyGradient:
    def test_no_constraints_returns_plain_gradient(self):
        oracle = _constant_oracle([2.0, -1.0])
        penalty = PenaltySpec(kappa=np.zeros(0), constraints=[])
        theta = DesignVector([0.0, 0.0])
        xi = RandomRealization(np.zeros(1))
        out = penalty_gradient(oracle, penalty, theta, xi, HIGH)
        assert out == pytest.approx([2.0, -1.0])

    def test_inactive_constraint_contributes_nothing(self):
        oracle = _constant_oracle([1.0])
        penalty = PenaltySpec(
            kappa=[2.0],
            constraints=[(lambda t, xi: t[0] - 5.0, lambda t, xi: np.ones(1))],
        )
        out = penalty_gradient(oracle, penalty, DesignVector([3.0]),
                               RandomRealization(np.zeros(1)), HIGH)
        assert out == pytest.approx([1.0])

    def test_active_constraint_chain_rule(self):
        # f == 0, g(theta) = theta, kappa = 2 at theta = 3:
        # d/dtheta kappa * g^2 = 2 * kappa * theta = 12
        oracle = _constant_oracle([0.0])
        penalty = PenaltySpec(
            kappa=[2.0],
            constraints=[(lambda t, xi: t[0], lambda t, xi: np.ones(1))],
        )
        out = penalty_gradient(oracle, penalty, DesignVector([3.0]),
                               RandomRealization(np.zeros(1)), HIGH)
        assert out == pytest.approx([12.0])

    def test_nonfinite_gradient_names_component(self):
        oracle = FunctionOracle(2, lambda t, xi: np.array([0.0, np.inf]))
        penalty = PenaltySpec(kappa=np.zeros(0), constraints=[])
        with pytest.raises(NumericalFault) as err:
            penalty_gradient(oracle, penalty, DesignVector([0.0, 0.0]),
                             RandomRealization(np.zeros(1)), HIGH)
        assert err.value.index == 1

    def test_negative_kappa_rejected(self):
        with pytest.raises(ConfigFault):
            PenaltySpec(kappa=[-1.0], constraints=[(lambda t, xi: 0.0,
                                                    lambda t, xi: np.zeros(1))])


class TestPenalizedOracle:
    def test_objective_and_gradient_include_violations(self):
        base = FunctionOracle(1, lambda t, xi: 2.0 * t,
                              objective=lambda t, xi: float(t @ t))
        penalty = PenaltySpec(
            kappa=[3.0],
            constraints=[(lambda t, xi: t[0] - 1.0, lambda t, xi: np.ones(1))],
        )
        wrapped = PenalizedOracle(base, penalty)
        xi = RandomRealization(np.zeros(1))
        theta = np.array([2.0])
        # objective: t^2 + kappa (t-1)^2 = 4 + 3
        assert wrapped.objective(theta, xi, HIGH) == pytest.approx(7.0)
        g, cost = wrapped.grad(theta, xi, HIGH)
        # gradient: 2t + 2 kappa (t-1) = 4 + 6
        assert g == pytest.approx([10.0])
        assert cost == 1.0
        gl, cost_low = wrapped.grad(theta, xi, LOW)
        assert gl == pytest.approx([10.0])
        assert cost_low == base.gamma
