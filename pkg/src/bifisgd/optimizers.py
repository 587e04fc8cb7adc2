"""Stochastic gradient descent variants over bi-fidelity oracles.

Five fixed-step optimizers share the update theta <- theta - eta * h with
different search directions h:

* ``sgd_run``    -- mini-batch average of fresh high-fidelity gradients
* ``sag_run``    -- mean of a per-realization gradient table, a few entries
                    refreshed (high fidelity) per iteration
* ``svrg_run``   -- anchored control-variate direction, all high fidelity
* ``bfsag_run``  -- gradient table refreshed mostly with cheap low-fidelity
                    gradients plus a handful of high-fidelity ones
* ``bfsvrg_run`` -- high-fidelity mini-batch corrected by a low-fidelity
                    control variate with a per-component coefficient

All randomness is drawn from the supplied generator in a fixed order inside
the sequential optimizer loop; gradient evaluations themselves are
deterministic functions of (theta, xi), so identical (config, seed) pairs give
bitwise-identical traces no matter how evaluations are scheduled.  Box bounds,
when present on the initial design, are enforced by clamping after every
update.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .control_variates import DIAGONAL, CvCoefficient, corrected_alpha, diagonal_alpha
from .errors import ConfigFault, InsufficientData, NumericalFault
from .oracle import HIGH, LOW, BiFidelityOracle, DesignVector, clamp_box

#: traces store full parameter snapshots only up to this many parameters
SNAPSHOT_LIMIT = 64


@dataclass
class TraceRecord:
    """State captured after one parameter update."""

    iteration: int
    objective: float
    cum_cost: float
    high_calls: int
    low_calls: int
    theta: np.ndarray | None = None
    ref_distance: float | None = None
    outer: int | None = None
    inner: int | None = None
    direction_variance: float | None = None
    alpha_fallback: bool = False
    degenerate_entries: int = 0
    metrics: dict = field(default_factory=dict)


@dataclass
class OptimizerTrace:
    """Per-iteration history of one optimizer run."""

    algorithm: str
    records: list[TraceRecord] = field(default_factory=list)
    theta_final: np.ndarray | None = None
    status: str = "completed"

    def __len__(self):
        return len(self.records)

    def objectives(self):
        return np.array([r.objective for r in self.records])

    def cum_costs(self):
        return np.array([r.cum_cost for r in self.records])

    def ref_distances(self):
        return np.array([np.nan if r.ref_distance is None else r.ref_distance
                         for r in self.records])

    def thetas(self):
        if any(r.theta is None for r in self.records):
            raise ConfigFault("trace did not store parameter snapshots (too many parameters)")
        return np.array([r.theta for r in self.records])


class _RunState:
    """Shared bookkeeping: cost counters, clamping, trace assembly."""

    def __init__(self, algorithm, oracle, theta0, eta, objective_fn, metrics_fn, theta_ref):
        if eta <= 0:
            raise ConfigFault(f"learning rate must be positive, got {eta}")
        if not isinstance(theta0, DesignVector):
            theta0 = DesignVector(np.asarray(theta0, dtype=float))
        self.oracle = oracle
        self.eta = eta
        self.theta = theta0
        self.objective_fn = objective_fn
        self.metrics_fn = metrics_fn
        self.theta_ref = None if theta_ref is None else np.asarray(theta_ref, dtype=float)
        self.high_calls = 0
        self.low_calls = 0
        self.trace = OptimizerTrace(algorithm=algorithm)
        self.snapshot = theta0.n <= SNAPSHOT_LIMIT

    def grads(self, theta_values, realizations, fidelity):
        g, _cost = self.oracle.grad_many(theta_values, realizations, fidelity)
        if fidelity == HIGH:
            self.high_calls += len(realizations)
        else:
            self.low_calls += len(realizations)
        return g

    def cum_cost(self):
        # single multiply keeps the ledger identity cum == high + gamma*low exact
        return self.high_calls + self.oracle.gamma * self.low_calls

    def step(self, direction, iteration):
        new = self.theta.values - self.eta * direction
        if not np.all(np.isfinite(new)):
            bad = int(np.argmin(np.isfinite(new)))
            raise NumericalFault(
                f"non-finite parameter update at iteration {iteration}, component {bad}",
                index=bad,
            )
        self.theta = self.theta.replace_values(new)
        if self.theta.has_bounds():
            self.theta = clamp_box(self.theta)

    def record(self, iteration, **kw):
        values = self.theta.values
        rec = TraceRecord(
            iteration=iteration,
            objective=self.objective_fn(values) if self.objective_fn else math.nan,
            cum_cost=self.cum_cost(),
            high_calls=self.high_calls,
            low_calls=self.low_calls,
            theta=values.copy() if self.snapshot else None,
            ref_distance=None if self.theta_ref is None
            else float(np.linalg.norm(values - self.theta_ref)),
            metrics=self.metrics_fn(values) if self.metrics_fn else {},
            **kw,
        )
        self.trace.records.append(rec)

    def finish(self):
        self.trace.theta_final = self.theta.values.copy()
        return self.trace


class SagGradientTable:
    """Fixed-size gradient history with an incrementally maintained sum.

    Entries start at zero, exactly as the averaged direction assumes during
    the cold-start iterations.
    """

    def __init__(self, n_entries, n_theta):
        self.table = np.zeros((n_entries, n_theta))
        self.running_sum = np.zeros(n_theta)

    def update(self, index, gradient):
        self.running_sum = self.running_sum + (gradient - self.table[index])
        self.table[index] = gradient

    def mean(self):
        return self.running_sum / self.table.shape[0]

    def recomputed_sum(self):
        return self.table.sum(axis=0)


def sgd_run(oracle, theta0, eta, iters, batch=1, rng=None, *,
            objective_fn=None, metrics_fn=None, theta_ref=None):
    """Plain (mini-batch) stochastic gradient descent, high fidelity only."""
    if batch < 1:
        raise ConfigFault(f"batch must be >= 1, got {batch}")
    rng = np.random.default_rng(rng)
    state = _RunState("sgd", oracle, theta0, eta, objective_fn, metrics_fn, theta_ref)
    for k in range(1, iters + 1):
        draws = [oracle.sample(rng) for _ in range(batch)]
        g = state.grads(state.theta.values, draws, HIGH)
        state.step(g.mean(axis=0), k)
        state.record(k)
    return state.finish()


def _draw_distinct(rng, n, k):
    return rng.choice(n, size=k, replace=False)


def sag_run(oracle, theta0, eta, iters, n_realizations, n_high, rng=None, *,
            objective_fn=None, metrics_fn=None, theta_ref=None):
    """Batch stochastic average gradient over a fixed realization set.

    Each iteration refreshes ``n_high`` table entries (drawn without
    replacement) with high-fidelity gradients at the current design and steps
    along the table mean.
    """
    if not 1 <= n_high <= n_realizations:
        raise ConfigFault(f"need 1 <= n_high <= n_realizations, got {n_high} > {n_realizations}")
    rng = np.random.default_rng(rng)
    state = _RunState("sag", oracle, theta0, eta, objective_fn, metrics_fn, theta_ref)
    realizations = oracle.realization_set(n_realizations, rng)
    table = SagGradientTable(n_realizations, oracle.n_theta)
    for k in range(1, iters + 1):
        idx = _draw_distinct(rng, n_realizations, n_high)
        grads = state.grads(state.theta.values, [realizations[i] for i in idx], HIGH)
        for pos, i in enumerate(idx):
            table.update(i, grads[pos])
        state.step(table.mean(), k)
        state.record(k)
    return state.finish()


def bfsag_run(oracle, theta0, eta, iters, n_realizations, n_low, n_high, rng=None, *,
              objective_fn=None, metrics_fn=None, theta_ref=None):
    """Bi-fidelity SAG: most table refreshes use the cheap low-fidelity model.

    Per iteration, ``n_low + n_high`` distinct indices are drawn; the first
    ``n_low`` entries are refreshed with low-fidelity gradients and the rest
    with high-fidelity ones, so the two index sets never overlap.
    """
    if n_low < 0 or n_high < 0 or n_low + n_high < 1:
        raise ConfigFault("need n_low, n_high >= 0 with n_low + n_high >= 1")
    if n_low + n_high > n_realizations:
        raise ConfigFault(
            f"n_low + n_high = {n_low + n_high} exceeds realization count {n_realizations}"
        )
    rng = np.random.default_rng(rng)
    state = _RunState("bfsag", oracle, theta0, eta, objective_fn, metrics_fn, theta_ref)
    realizations = oracle.realization_set(n_realizations, rng)
    table = SagGradientTable(n_realizations, oracle.n_theta)
    for k in range(1, iters + 1):
        idx = _draw_distinct(rng, n_realizations, n_low + n_high)
        idx_low, idx_high = idx[:n_low], idx[n_low:]
        grads_low = state.grads(state.theta.values, [realizations[i] for i in idx_low], LOW)
        grads_high = state.grads(state.theta.values, [realizations[i] for i in idx_high], HIGH)
        for pos, i in enumerate(idx_low):
            table.update(i, grads_low[pos])
        for pos, i in enumerate(idx_high):
            table.update(i, grads_high[pos])
        state.step(table.mean(), k)
        state.record(k)
    return state.finish()


def svrg_run(oracle, theta0, eta, outer, inner, n_anchor, rng=None, *,
             objective_fn=None, metrics_fn=None, theta_ref=None):
    """Stochastic variance reduced gradient, high fidelity only.

    Each outer iteration freezes an anchor design and an anchor mean gradient
    over ``n_anchor`` realizations; inner steps follow the anchored direction
    h(theta_k; xi_t) - h(theta_prev; xi_t) + anchor_mean for a uniformly drawn
    anchor realization t.
    """
    if inner < 1 or n_anchor < 1 or outer < 1:
        raise ConfigFault("outer, inner and n_anchor must all be >= 1")
    rng = np.random.default_rng(rng)
    state = _RunState("svrg", oracle, theta0, eta, objective_fn, metrics_fn, theta_ref)
    step_count = 0
    for j in range(1, outer + 1):
        theta_prev = state.theta.values.copy()
        anchor = [oracle.sample(rng) for _ in range(n_anchor)]
        anchor_mean = state.grads(theta_prev, anchor, HIGH).mean(axis=0)
        for k in range(1, inner + 1):
            t = int(rng.integers(n_anchor))
            g_now = state.grads(state.theta.values, [anchor[t]], HIGH)[0]
            g_prev = state.grads(theta_prev, [anchor[t]], HIGH)[0]
            step_count += 1
            state.step(g_now - g_prev + anchor_mean, step_count)
            state.record(step_count, outer=j, inner=k)
    return state.finish()


ALPHA_MODES = ("identity", "diagonal", "diagonal_corrected")


def bfsvrg_run(oracle, theta0, eta, outer, inner, n_low, n_high, rng=None, *,
               alpha_mode="diagonal", exact_anchor=False,
               objective_fn=None, metrics_fn=None, theta_ref=None):
    """Bi-fidelity SVRG: a low-fidelity control variate on high-fidelity batches.

    Each outer iteration estimates the control mean from ``n_low`` low-fidelity
    gradients at the anchor design (or queries the oracle's exact mean when
    ``exact_anchor`` is set).  Each inner step draws ``n_high`` fresh
    realizations, evaluates the high-fidelity batch at the current design and
    the low-fidelity batch at the anchor, and steps along

        mean(high) - alpha * (mean(low) - control_mean)

    with a per-component ``alpha`` chosen by ``alpha_mode``.  If the
    coefficient is undecidable (fewer than two samples, or zero control
    variance in every component) the step falls back to alpha = 1 and flags
    the trace record.
    """
    if alpha_mode not in ALPHA_MODES:
        raise ConfigFault(f"alpha_mode must be one of {ALPHA_MODES}, got {alpha_mode!r}")
    if inner < 1 or outer < 1 or n_low < 1 or n_high < 1:
        raise ConfigFault("outer, inner, n_low and n_high must all be >= 1")
    rng = np.random.default_rng(rng)
    state = _RunState("bfsvrg", oracle, theta0, eta, objective_fn, metrics_fn, theta_ref)
    step_count = 0
    for j in range(1, outer + 1):
        theta_prev = state.theta.values.copy()
        if exact_anchor:
            control_mean = oracle.expected_low_grad(theta_prev)
            if control_mean is None:
                raise ConfigFault("oracle does not expose an exact low-fidelity mean")
        else:
            anchor_draws = [oracle.sample(rng) for _ in range(n_low)]
            control_mean = state.grads(theta_prev, anchor_draws, LOW).mean(axis=0)
        for k in range(1, inner + 1):
            draws = [oracle.sample(rng) for _ in range(n_high)]
            high_batch = state.grads(state.theta.values, draws, HIGH)
            low_batch = state.grads(theta_prev, draws, LOW)
            alpha, fallback, degenerate = _resolve_alpha(
                alpha_mode, high_batch, low_batch, control_mean,
                n_high, n_low, exact_anchor, oracle.n_theta)
            low_dev = low_batch - control_mean
            corrected = high_batch - low_dev * alpha
            direction = corrected.mean(axis=0)
            variance = (float(np.mean(np.var(corrected, axis=0, ddof=1))) / n_high
                        if n_high > 1 else None)
            step_count += 1
            state.step(direction, step_count)
            state.record(step_count, outer=j, inner=k,
                         direction_variance=variance,
                         alpha_fallback=fallback,
                         degenerate_entries=degenerate)
    return state.finish()


def _resolve_alpha(mode, high_batch, low_batch, control_mean, n_high, n_low,
                   exact_anchor, n_theta):
    """Coefficient vector for one inner step plus fallback/degeneracy info."""
    if mode == "identity":
        return np.ones(n_theta), False, 0
    try:
        coeff = diagonal_alpha(high_batch, low_batch, control_mean)
    except InsufficientData:
        return np.ones(n_theta), True, n_theta
    if coeff.degenerate.all():
        return np.ones(n_theta), True, n_theta
    if mode == "diagonal_corrected" and not exact_anchor:
        coeff = corrected_alpha(coeff, n_high, n_low)
    return np.asarray(coeff.value, dtype=float), False, int(coeff.degenerate.sum())


def measure_linear_rate(error_series, tail_fraction=0.5):
    """Geometric contraction rate of a positive error series.

    Least-squares slope of log(error) against iteration over the trailing
    window of ``tail_fraction`` of the points.  Returns ``(rate, fit_quality)``
    where rate = exp(slope) and fit_quality is the coefficient of
    determination of the fit.
    """
    e = np.asarray(error_series, dtype=float)
    if not 0.0 < tail_fraction <= 1.0:
        raise ConfigFault(f"tail_fraction must lie in (0, 1], got {tail_fraction}")
    if np.any(e <= 0) or not np.all(np.isfinite(e)):
        raise NumericalFault("error series must be strictly positive and finite")
    n_tail = int(math.ceil(tail_fraction * e.size))
    if n_tail < 3:
        raise InsufficientData(f"need at least 3 tail points, got {n_tail}")
    tail = np.log(e[-n_tail:])
    k = np.arange(n_tail, dtype=float)
    slope, intercept = np.polyfit(k, tail, 1)
    fitted = slope * k + intercept
    ss_res = float(np.sum((tail - fitted) ** 2))
    ss_tot = float(np.sum((tail - tail.mean()) ** 2))
    # an (almost) constant series is fit perfectly by a flat line
    floor = 1e-24 * n_tail * (1.0 + float(np.abs(tail).max())) ** 2
    if ss_tot <= floor:
        quality = 1.0
    else:
        quality = 1.0 - ss_res / ss_tot
    return float(np.exp(slope)), quality
