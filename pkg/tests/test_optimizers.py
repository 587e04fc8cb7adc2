import numpy as np
import pytest

from bifisgd.errors import ConfigFault, InsufficientData, NumericalFault
from bifisgd.optimizers import (
    SagGradientTable,
    bfsag_run,
    bfsvrg_run,
    measure_linear_rate,
    sag_run,
    sgd_run,
    svrg_run,
)
from bifisgd.oracle import HIGH, LOW, DesignVector
from bifisgd.problems import quadratic_oracle
from helpers import FunctionOracle, deterministic_quadratic, gradient_descent, zero_oracle

ALL_RUNNERS = [
    ("sgd", lambda o, t, rng: sgd_run(o, t, 0.1, 5, batch=2, rng=rng)),
    ("sag", lambda o, t, rng: sag_run(o, t, 0.1, 5, 6, 2, rng=rng)),
    ("svrg", lambda o, t, rng: svrg_run(o, t, 0.1, 2, 3, 4, rng=rng)),
    ("bfsag", lambda o, t, rng: bfsag_run(o, t, 0.1, 5, 6, 2, 2, rng=rng)),
    ("bfsvrg", lambda o, t, rng: bfsvrg_run(o, t, 0.1, 2, 3, 4, 2, rng=rng)),
]


@pytest.mark.parametrize("name,runner", ALL_RUNNERS)
def test_zero_gradient_is_a_fixed_point(name, runner):
    theta0 = np.array([1.0, -2.0, 0.5])
    trace = runner(zero_oracle(3), theta0, 0)
    for rec in trace.records:
        assert np.array_equal(rec.theta, theta0)


@pytest.mark.parametrize("name,runner", ALL_RUNNERS)
def test_same_seed_reproduces_trace_bitwise(name, runner):
    oracle = quadratic_oracle(n=3, mu=0.5, lipschitz=2.0, seed=4, noise_add=0.3)
    theta0 = oracle.theta_star + 1.0
    a = runner(oracle, theta0, 123)
    b = runner(oracle, theta0, 123)
    assert len(a) == len(b)
    for ra, rb in zip(a.records, b.records):
        assert np.array_equal(ra.theta, rb.theta)
        assert ra.cum_cost == rb.cum_cost


@pytest.mark.parametrize("name,runner", ALL_RUNNERS)
def test_trace_contract(name, runner):
    oracle = quadratic_oracle(n=3, mu=0.5, lipschitz=2.0, seed=4, noise_add=0.1)
    trace = runner(oracle, oracle.theta_star + 1.0, 7)
    costs = trace.cum_costs()
    assert np.all(np.diff(costs) >= 0)
    assert [r.iteration for r in trace.records] == list(range(1, len(trace) + 1))
    assert trace.status == "completed"


class TestSgd:
    def test_unit_curvature_newton_step(self):
        # f = (theta - 3)^2 / 2 with eta = 1 jumps to the minimum in one step
        oracle = deterministic_quadratic([3.0])
        trace = sgd_run(oracle, [0.0], 1.0, 1, rng=0)
        assert trace.theta_final == pytest.approx([3.0])

    def test_cost_is_iters_times_batch(self):
        oracle = deterministic_quadratic([0.0])
        trace = sgd_run(oracle, [1.0], 0.1, 7, batch=3, rng=0)
        last = trace.records[-1]
        assert last.high_calls == 21 and last.low_calls == 0
        assert last.cum_cost == 21.0

    def test_bad_batch(self):
        with pytest.raises(ConfigFault):
            sgd_run(deterministic_quadratic([0.0]), [1.0], 0.1, 3, batch=0, rng=0)

    def test_bad_eta(self):
        with pytest.raises(ConfigFault):
            sgd_run(deterministic_quadratic([0.0]), [1.0], -0.5, 3, rng=0)

    def test_nonfinite_update_raises(self):
        oracle = FunctionOracle(1, lambda t, xi: np.array([np.nan]))
        with pytest.raises(NumericalFault):
            sgd_run(oracle, [0.0], 0.1, 1, rng=0)


class TestSag:
    def test_degenerate_table_equals_sgd_on_fixed_realization(self):
        oracle = FunctionOracle(2, lambda t, xi: t + xi, xi_dim=2, xi_value=[0.3, -0.2])
        sag = sag_run(oracle, [1.0, 1.0], 0.2, 10, 1, 1, rng=5)
        sgd = sgd_run(oracle, [1.0, 1.0], 0.2, 10, batch=1, rng=5)
        assert np.allclose(sag.thetas(), sgd.thetas(), rtol=1e-14, atol=0)

    def test_full_refresh_matches_gradient_descent_after_first_step(self):
        oracle = deterministic_quadratic([2.0, -1.0], scale=1.5)
        trace = sag_run(oracle, [0.0, 0.0], 0.3, 8, 4, 4, rng=0)
        reference = gradient_descent([0.0, 0.0], 0.3,
                                     lambda t: 1.5 * (t - np.array([2.0, -1.0])), 8)
        assert np.allclose(trace.thetas(), np.array(reference), rtol=1e-12)

    def test_batch_bounds_checked(self):
        with pytest.raises(ConfigFault):
            sag_run(deterministic_quadratic([0.0]), [1.0], 0.1, 3, 4, 5, rng=0)

    def test_cost_is_iters_times_batch(self):
        oracle = deterministic_quadratic([0.0])
        trace = sag_run(oracle, [1.0], 0.1, 6, 10, 4, rng=0)
        assert trace.records[-1].high_calls == 24
        assert trace.records[-1].cum_cost == 24.0


class TestSagGradientTable:
    def test_incremental_sum_tracks_recomputed_sum(self):
        rng = np.random.default_rng(0)
        table = SagGradientTable(12, 5)
        for _ in range(300):
            table.update(int(rng.integers(12)), rng.standard_normal(5))
            fresh = table.recomputed_sum()
            scale = max(np.abs(fresh).max(), 1.0)
            assert np.abs(table.running_sum - fresh).max() <= 1e-12 * scale

    def test_mean_of_zero_table_is_zero(self):
        assert np.array_equal(SagGradientTable(4, 2).mean(), np.zeros(2))


class TestBfsag:
    def test_fidelity_collapse_matches_sag_iterate_for_iterate(self):
        # identical fidelities and shared draws: bfsag(n_l, n_h) == sag(n_l + n_h)
        oracle = quadratic_oracle(n=3, mu=0.5, lipschitz=2.0, seed=2,
                                  noise_add=0.4, low_noise_rho=1.0, gamma=1.0)
        a = bfsag_run(oracle, oracle.theta_star + 1.0, 0.2, 12, 8, 3, 2, rng=11)
        b = sag_run(oracle, oracle.theta_star + 1.0, 0.2, 12, 8, 5, rng=11)
        for ra, rb in zip(a.records, b.records):
            assert np.array_equal(ra.theta, rb.theta)

    def test_overdrawn_batches_rejected(self):
        with pytest.raises(ConfigFault):
            bfsag_run(deterministic_quadratic([0.0]), [1.0], 0.1, 3, 4, 3, 2, rng=0)

    def test_cost_split_by_fidelity(self):
        oracle = deterministic_quadratic([0.0])
        trace = bfsag_run(oracle, [1.0], 0.1, 5, 10, 4, 2, rng=0)
        last = trace.records[-1]
        assert last.low_calls == 20 and last.high_calls == 10
        assert last.cum_cost == last.high_calls + oracle.gamma * last.low_calls

    def test_biased_low_fidelity_converges_to_neighborhood(self):
        # 1d quadratic a(theta - 2) with the low model shifted by a fixed bias:
        # the stationary point offset is bias * n_l / ((n_l + n_h) a)
        a, bias = 2.0, 0.1
        oracle = FunctionOracle(
            1,
            high_grad=lambda t, xi: a * (t - 2.0),
            low_grad=lambda t, xi: a * (t - 2.0) + bias,
        )
        n, n_l, n_h = 6, 2, 2
        trace = bfsag_run(oracle, [0.0], 0.25, 400, n, n_l, n_h, rng=3)
        offset = bias * n_l / ((n_l + n_h) * a)
        assert abs(trace.theta_final[0] - 2.0) <= 3 * offset

    def test_matches_brute_force_reference_loop(self):
        # independent re-derivation of the update rule, consuming the rng the
        # same way: realization set first, then one distinct-index draw per
        # iteration
        oracle = quadratic_oracle(n=2, mu=1.0, lipschitz=3.0, seed=9,
                                  noise_add=0.2, low_scale=0.9,
                                  low_bias=[0.05, -0.02], low_noise_rho=0.8)
        theta0 = oracle.theta_star + 1.0
        eta, iters, n, n_l, n_h = 0.15, 25, 7, 3, 2
        trace = bfsag_run(oracle, theta0, eta, iters, n, n_l, n_h, rng=21)

        rng = np.random.default_rng(21)
        reals = oracle.realization_set(n, rng)
        table = np.zeros((n, 2))
        theta = np.asarray(theta0, dtype=float).copy()
        for _ in range(iters):
            idx = rng.choice(n, size=n_l + n_h, replace=False)
            for i in idx[:n_l]:
                table[i] = oracle.grad(theta, reals[i], LOW)[0]
            for i in idx[n_l:]:
                table[i] = oracle.grad(theta, reals[i], HIGH)[0]
            theta = theta - eta * table.mean(axis=0)
        assert np.allclose(trace.theta_final, theta, rtol=1e-12)


class TestSvrg:
    def test_xi_independent_gradient_collapses_to_gradient_descent(self):
        # the control variate cancels exactly, leaving the full gradient
        center = np.array([1.0, -1.0])
        oracle = deterministic_quadratic(center, scale=2.0)
        trace = svrg_run(oracle, [0.0, 0.0], 0.1, 3, 4, 4, rng=0)
        reference = gradient_descent([0.0, 0.0], 0.1, lambda t: 2.0 * (t - center), 12)
        assert np.allclose(trace.thetas(), np.array(reference), rtol=1e-12)

    def test_single_inner_step_uses_anchor_mean(self):
        oracle = FunctionOracle(1, lambda t, xi: 3.0 * t + xi, xi_dim=1, xi_value=[0.5])
        trace = svrg_run(oracle, [1.0], 0.1, 1, 1, 1, rng=0)
        # theta_1 = theta_0 - eta * h(theta_0; xi)
        assert trace.theta_final == pytest.approx([1.0 - 0.1 * 3.5])

    def test_cost_counts_anchor_and_inner_evaluations(self):
        oracle = deterministic_quadratic([0.0])
        trace = svrg_run(oracle, [1.0], 0.1, 3, 5, 8, rng=0)
        assert trace.records[-1].high_calls == 3 * (8 + 2 * 5)

    def test_outer_inner_structure_recorded(self):
        oracle = deterministic_quadratic([0.0])
        trace = svrg_run(oracle, [1.0], 0.1, 2, 3, 2, rng=0)
        assert [(r.outer, r.inner) for r in trace.records] == [
            (1, 1), (1, 2), (1, 3), (2, 1), (2, 2), (2, 3)]


class TestBfsvrg:
    def test_identical_fidelities_and_constant_gradient_match_descent(self):
        center = np.array([0.5, 2.0])
        oracle = deterministic_quadratic(center, scale=1.2)
        trace = bfsvrg_run(oracle, [0.0, 0.0], 0.2, 2, 4, 4, 2, rng=0)
        reference = gradient_descent([0.0, 0.0], 0.2, lambda t: 1.2 * (t - center), 8)
        assert np.allclose(trace.thetas(), np.array(reference), rtol=1e-12)
        assert all(r.direction_variance == 0.0 for r in trace.records)

    def test_variance_reduced_below_plain_batch(self):
        # repeated one-step directions at a fixed design vs the plain batch mean
        oracle = quadratic_oracle(n=4, mu=1.0, lipschitz=3.0, seed=5,
                                  noise_add=0.5, low_noise_rho=1.0)
        theta = oracle.theta_star + 1.0
        rng = np.random.default_rng(17)
        n_h, reps = 4, 10_000
        cv_dirs = np.empty((reps, 4))
        plain_dirs = np.empty((reps, 4))
        exact_mean = oracle.expected_low_grad(theta)
        from bifisgd.control_variates import diagonal_alpha
        for r in range(reps):
            draws = [oracle.sample(rng) for _ in range(n_h)]
            high = np.array([oracle.grad(theta, d, HIGH)[0] for d in draws])
            low = np.array([oracle.grad(theta, d, LOW)[0] for d in draws])
            coeff = diagonal_alpha(high, low, exact_mean)
            cv_dirs[r] = (high - (low - exact_mean) * coeff.value).mean(axis=0)
            plain_dirs[r] = high.mean(axis=0)
        assert np.all(cv_dirs.var(axis=0, ddof=1) <= plain_dirs.var(axis=0, ddof=1))

    def test_alpha_identity_fallback_flagged_for_degenerate_control(self):
        # low fidelity gradient is xi independent: zero control variance everywhere
        oracle = FunctionOracle(
            2,
            high_grad=lambda t, xi: t + xi,
            low_grad=lambda t, xi: t,
            xi_dim=2,
        )
        trace = bfsvrg_run(oracle, [1.0, 1.0], 0.1, 1, 2, 4, 3, rng=0,
                           alpha_mode="diagonal")
        assert all(r.alpha_fallback for r in trace.records)

    def test_exact_anchor_requires_capable_oracle(self):
        oracle = FunctionOracle(1, lambda t, xi: t)
        with pytest.raises(ConfigFault):
            bfsvrg_run(oracle, [1.0], 0.1, 1, 1, 2, 2, rng=0, exact_anchor=True)

    def test_unknown_alpha_mode_rejected(self):
        with pytest.raises(ConfigFault):
            bfsvrg_run(deterministic_quadratic([0.0]), [1.0], 0.1, 1, 1, 2, 2,
                       rng=0, alpha_mode="full")

    def test_cost_ledger_split(self):
        oracle = deterministic_quadratic([0.0])
        outer, m, n_l, n_h = 3, 4, 10, 2
        trace = bfsvrg_run(oracle, [1.0], 0.1, outer, m, n_l, n_h, rng=0)
        last = trace.records[-1]
        assert last.high_calls == outer * m * n_h
        assert last.low_calls == outer * (n_l + m * n_h)


class TestBoundsRespected:
    @pytest.mark.parametrize("name,runner", ALL_RUNNERS)
    def test_every_snapshot_within_box(self, name, runner):
        oracle = quadratic_oracle(n=3, mu=1.0, lipschitz=2.0, seed=1, noise_add=2.0)
        theta0 = DesignVector(np.zeros(3), lower=-0.1 * np.ones(3),
                              upper=0.1 * np.ones(3))
        trace = runner(oracle, theta0, 3)
        for rec in trace.records:
            assert np.all(rec.theta >= -0.1) and np.all(rec.theta <= 0.1)


class TestMeasureLinearRate:
    def test_exact_geometric_series(self):
        rate, quality = measure_linear_rate(0.9 ** np.arange(50), 1.0)
        assert rate == pytest.approx(0.9, abs=1e-12)
        assert quality == pytest.approx(1.0)

    def test_constant_series(self):
        rate, quality = measure_linear_rate(np.full(20, 2.5), 1.0)
        assert rate == pytest.approx(1.0)
        assert quality == pytest.approx(1.0)

    def test_noisy_geometric_series(self):
        rng = np.random.default_rng(8)
        k = np.arange(120)
        series = 0.8**k * (1 + 0.01 * rng.standard_normal(k.size))
        rate, quality = measure_linear_rate(series, 0.5)
        assert 0.79 <= rate <= 0.81
        assert quality > 0.99

    def test_insufficient_tail(self):
        with pytest.raises(InsufficientData):
            measure_linear_rate(np.array([1.0, 0.5, 0.25, 0.125]), 0.5)

    def test_nonpositive_errors_rejected(self):
        with pytest.raises(NumericalFault):
            measure_linear_rate(np.array([1.0, 0.0, 0.1]), 1.0)

    def test_bad_tail_fraction(self):
        with pytest.raises(ConfigFault):
            measure_linear_rate(np.ones(10), 0.0)
