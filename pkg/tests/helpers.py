"""Minimal oracles and reference routines shared across tests."""

import numpy as np

from bifisgd.oracle import HIGH, BiFidelityOracle, RandomRealization


class FunctionOracle(BiFidelityOracle):
    """Oracle built from plain callables g(theta, xi) per fidelity.

    ``xi_dim`` realizations are standard normal unless a fixed ``xi_value``
    is supplied, in which case every draw returns it (handy for collapsing
    the stochasticity).
    """

    def __init__(self, n_theta, high_grad, low_grad=None, *, objective=None,
                 xi_dim=1, xi_value=None, gamma=0.25):
        self.n_theta = n_theta
        self.n_xi = xi_dim
        self.gamma = gamma
        self._high = high_grad
        self._low = low_grad if low_grad is not None else high_grad
        self._objective = objective
        self._xi_value = xi_value

    def sample(self, rng):
        if self._xi_value is not None:
            return RandomRealization(np.array(self._xi_value, dtype=float))
        return RandomRealization(rng.standard_normal(self.n_xi))

    def grad(self, theta, xi, fidelity):
        fn = self._high if fidelity == HIGH else self._low
        cost = 1.0 if fidelity == HIGH else self.gamma
        return np.asarray(fn(np.asarray(theta, float), xi.xi), dtype=float), cost

    def objective(self, theta, xi, fidelity):
        if self._objective is None:
            return 0.0
        return float(self._objective(np.asarray(theta, float), xi.xi))


def zero_oracle(n_theta=3):
    return FunctionOracle(n_theta, lambda t, xi: np.zeros(n_theta))


def deterministic_quadratic(center, scale=1.0):
    """xi-independent gradient scale * (theta - center)."""
    center = np.asarray(center, dtype=float)
    return FunctionOracle(
        center.size,
        lambda t, xi: scale * (t - center),
        objective=lambda t, xi: 0.5 * scale * float((t - center) @ (t - center)),
    )


def gradient_descent(theta0, eta, grad, iters):
    """Reference full gradient descent trajectory (list of iterates)."""
    theta = np.asarray(theta0, dtype=float).copy()
    out = []
    for _ in range(iters):
        theta = theta - eta * grad(theta)
        out.append(theta.copy())
    return out
