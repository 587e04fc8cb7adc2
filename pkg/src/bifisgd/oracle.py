"""Bi-fidelity gradient oracle contract and penalty-formulated search directions.

An oracle supplies stochastic gradients of a (possibly penalized) objective at
two fidelities.  Every call takes a design point and a realization of the
random inputs; all stochasticity flows through the realization, so gradient
evaluations are deterministic functions of ``(theta, xi)`` and may safely run
concurrently.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigFault, DimensionFault, NumericalFault

LOW = "low"
HIGH = "high"
FIDELITIES = (LOW, HIGH)


def _as_float_vector(values, name):
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise DimensionFault(f"{name} must be a 1-d vector, got shape {arr.shape}")
    return arr


@dataclass
class DesignVector:
    """Optimization variable with optional elementwise box bounds."""

    values: np.ndarray
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        self.values = _as_float_vector(self.values, "values")
        n = self.values.size
        for name in ("lower", "upper"):
            b = getattr(self, name)
            if b is not None:
                b = _as_float_vector(b, name)
                if b.size != n:
                    raise DimensionFault(f"{name} bound length {b.size} != {n}")
                setattr(self, name, b)
        if self.lower is not None and self.upper is not None:
            if np.any(self.lower > self.upper):
                raise ConfigFault("lower bound exceeds upper bound")
        if not self.within_bounds():
            raise ConfigFault("design values violate their box bounds")

    @property
    def n(self):
        return self.values.size

    def has_bounds(self):
        return self.lower is not None or self.upper is not None

    def within_bounds(self, values=None):
        v = self.values if values is None else values
        if self.lower is not None and np.any(v < self.lower):
            return False
        if self.upper is not None and np.any(v > self.upper):
            return False
        return True

    def replace_values(self, values):
        out = DesignVector.__new__(DesignVector)
        out.values = np.asarray(values, dtype=float)
        out.lower = self.lower
        out.upper = self.upper
        return out


def clamp_box(theta: DesignVector) -> DesignVector:
    """Project the design values onto their box bounds, componentwise."""
    v = theta.values
    if theta.lower is not None:
        v = np.maximum(v, theta.lower)
    if theta.upper is not None:
        v = np.minimum(v, theta.upper)
    return theta.replace_values(v)


@dataclass
class RandomRealization:
    """One realization of the random inputs.

    ``index`` (1-based) identifies which member of a pre-drawn realization set
    this is, when the realization came from such a set.
    """

    xi: np.ndarray
    index: int | None = None

    def __post_init__(self):
        self.xi = np.atleast_1d(np.asarray(self.xi, dtype=float))
        if self.index is not None and self.index < 1:
            raise ConfigFault(f"realization index must be >= 1, got {self.index}")


class BiFidelityOracle:
    """Contract for stochastic gradient sources at two fidelities.

    Subclasses must set ``n_theta``, ``n_xi`` and ``gamma`` (cost of one LOW
    gradient in units of one HIGH gradient) and implement ``sample``, ``grad``
    and ``objective``.  ``grad`` returns ``(gradient, cost)`` where the cost of
    a HIGH call is exactly 1 and of a LOW call exactly ``gamma``.
    """

    n_theta: int
    n_xi: int
    gamma: float

    #: closed-form minimizer when the problem has one, else None
    theta_star: np.ndarray | None = None

    def sample(self, rng) -> RandomRealization:
        raise NotImplementedError

    def grad(self, theta, xi, fidelity):
        raise NotImplementedError

    def objective(self, theta, xi, fidelity):
        raise NotImplementedError

    def realization_set(self, n, rng):
        """Draw ``n`` realizations up front (i.i.d. by default).

        Problems backed by a finite canonical set (e.g. an observation data
        set) override this to hand out that set when ``n`` matches its size.
        Indices are assigned 1..n.
        """
        draws = []
        for i in range(n):
            r = self.sample(rng)
            draws.append(RandomRealization(r.xi, index=i + 1))
        return draws

    def grad_many(self, theta, realizations, fidelity):
        """Gradients for a batch of realizations, stacked row-wise.

        The reduction order is the list order, so results do not depend on
        how a subclass schedules the individual evaluations.  Returns
        ``(matrix of shape (len(realizations), n_theta), total_cost)``.
        """
        grads = np.empty((len(realizations), self.n_theta))
        total = 0.0
        for row, xi in enumerate(realizations):
            g, c = self.grad(theta, xi, fidelity)
            grads[row] = g
            total += c
        return grads, total

    def expected_low_grad(self, theta):
        """Exact mean of the LOW gradient over the random inputs, if known."""
        return None


def check_fidelity(fidelity):
    if fidelity not in FIDELITIES:
        raise ConfigFault(f"fidelity must be one of {FIDELITIES}, got {fidelity!r}")


def require_finite(vector, context):
    """Raise NumericalFault naming the first non-finite component."""
    finite = np.isfinite(vector)
    if not finite.all():
        bad = int(np.argmin(finite))
        raise NumericalFault(f"non-finite value in {context} at component {bad}", index=bad)
    return vector


@dataclass
class PenaltySpec:
    """Quadratic penalty data for constrained problems.

    ``constraints`` is a list of ``(value_fn, grad_fn)`` pairs where
    ``value_fn(theta, xi) -> float`` evaluates one constraint g_j and
    ``grad_fn(theta, xi) -> vector`` its design gradient.  ``kappa`` holds the
    non-negative penalty weights, one per constraint.
    """

    kappa: np.ndarray
    constraints: list = field(default_factory=list)

    def __post_init__(self):
        self.kappa = np.atleast_1d(np.asarray(self.kappa, dtype=float))
        if self.kappa.size != len(self.constraints):
            raise DimensionFault(
                f"{self.kappa.size} penalty weights for {len(self.constraints)} constraints"
            )
        if np.any(self.kappa < 0):
            raise ConfigFault("penalty weights must be non-negative")

    @property
    def n_constraints(self):
        return len(self.constraints)


def _violation_terms(penalty, values, xi):
    """Gradient contribution of the squared constraint violations."""
    total = np.zeros_like(values)
    for j, (value_fn, grad_fn) in enumerate(penalty.constraints):
        violation = value_fn(values, xi)
        if violation > 0.0:
            total += penalty.kappa[j] * 2.0 * violation * np.asarray(grad_fn(values, xi))
    return total


def penalty_gradient(oracle, penalty, theta, xi, fidelity):
    """Search direction of the penalized objective at one realization.

    Adds the gradients of the squared constraint violations to the plain
    objective gradient:  grad f + sum_j kappa_j * 2 * max(g_j, 0) * grad g_j.
    Inactive constraints (g_j <= 0) contribute nothing.
    """
    values = theta.values if isinstance(theta, DesignVector) else np.asarray(theta, float)
    g, _cost = oracle.grad(values, xi, fidelity)
    total = np.array(g, dtype=float, copy=True)
    if penalty is not None:
        total += _violation_terms(penalty, values, xi)
    return require_finite(total, "penalty gradient")


class PenalizedOracle(BiFidelityOracle):
    """Wrap an oracle so its gradients and objectives include penalty terms."""

    def __init__(self, base, penalty):
        self.base = base
        self.penalty = penalty
        self.n_theta = base.n_theta
        self.n_xi = base.n_xi
        self.gamma = base.gamma
        self.theta_star = None

    def sample(self, rng):
        return self.base.sample(rng)

    def realization_set(self, n, rng):
        return self.base.realization_set(n, rng)

    def grad(self, theta, xi, fidelity):
        values = theta.values if isinstance(theta, DesignVector) else np.asarray(theta, float)
        g, cost = self.base.grad(values, xi, fidelity)
        total = g + _violation_terms(self.penalty, values, xi)
        return require_finite(total, "penalty gradient"), cost

    def objective(self, theta, xi, fidelity):
        value = self.base.objective(theta, xi, fidelity)
        values = theta.values if isinstance(theta, DesignVector) else np.asarray(theta, float)
        for j, (value_fn, _grad_fn) in enumerate(self.penalty.constraints):
            violation = value_fn(values, xi)
            if violation > 0.0:
                value += self.penalty.kappa[j] * violation**2
        return value
