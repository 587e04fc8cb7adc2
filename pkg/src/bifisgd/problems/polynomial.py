"""Quartic-polynomial regression problem with a Taylor-surrogate low fidelity.

The data model is y = p(x) + e with p a fixed quartic, x uniform on [-1, 1]
and Gaussian noise of variance 0.25.  Fitting a quartic monomial basis to N
noisy observations by least squares gives a stochastic optimization problem
whose per-observation gradients are cheap and exactly known, making it the
reference playground for the optimizers.

The low-fidelity model replaces every basis monomial by its second-order
Taylor expansion about the grid anchor nearest to x (ties resolve toward the
smaller anchor), so low-fidelity predictions agree with the true quartic's
local quadratic expansion when evaluated at the true coefficients.
"""

from functools import cached_property

import numpy as np

from ..errors import ConfigFault, DomainFault
from ..oracle import HIGH, BiFidelityOracle, RandomRealization, check_fidelity

TRUE_COEFFS = np.array([2.0, 5.0, 1.75, 5.0, 6.5])
NOISE_STD = 0.5
ANCHORS = np.linspace(-1.0, 1.0, 9)
_ANCHOR_SPACING = 0.25


def poly_high(x):
    """True quartic evaluated with the fixed coefficients."""
    x = np.asarray(x, dtype=float)
    return TRUE_COEFFS[0] + x * (TRUE_COEFFS[1] + x * (
        TRUE_COEFFS[2] + x * (TRUE_COEFFS[3] + x * TRUE_COEFFS[4])))


def poly_high_d1(x):
    x = np.asarray(x, dtype=float)
    return TRUE_COEFFS[1] + x * (2 * TRUE_COEFFS[2] + x * (
        3 * TRUE_COEFFS[3] + x * 4 * TRUE_COEFFS[4]))


def poly_high_d2(x):
    x = np.asarray(x, dtype=float)
    return 2 * TRUE_COEFFS[2] + x * (6 * TRUE_COEFFS[3] + x * 12 * TRUE_COEFFS[4])


def nearest_anchor(x):
    """Closest anchor on the quarter-unit grid; midpoints pick the smaller one."""
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0):
        raise DomainFault("x must lie in [-1, 1]")
    idx = np.ceil((x + 1.0) / _ANCHOR_SPACING - 0.5).astype(int)
    return ANCHORS[np.clip(idx, 0, ANCHORS.size - 1)]


def taylor_basis(x, x0):
    """Monomial basis with each power expanded to second order about x0.

    Powers 0..2 are reproduced exactly; cubic and quartic terms truncate.
    Accepts scalars or matching arrays and returns shape (..., 5).
    """
    x = np.asarray(x, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    d = x - x0
    return np.stack([
        np.ones_like(d),
        x * np.ones_like(x0),
        x**2 * np.ones_like(x0),
        x0**3 + 3 * x0**2 * d + 3 * x0 * d**2,
        x0**4 + 4 * x0**3 * d + 6 * x0**2 * d**2,
    ], axis=-1)


def monomial_basis(x):
    x = np.asarray(x, dtype=float)
    return np.stack([np.ones_like(x), x, x**2, x**3, x**4], axis=-1)


def poly_low(x, x0):
    """Second-order Taylor expansion of the true quartic about x0."""
    d = np.asarray(x, dtype=float) - x0
    return poly_high(x0) + poly_high_d1(x0) * d + 0.5 * poly_high_d2(x0) * d**2


def gen_observations(seed, n):
    """Noisy quartic samples: x uniform on [-1, 1], noise N(0, 0.25)."""
    if n < 1:
        raise ConfigFault(f"need at least one observation, got {n}")
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.0, 1.0, size=n)
    y = poly_high(x) + rng.normal(0.0, NOISE_STD, size=n)
    return x, y


class PolyRegressionOracle(BiFidelityOracle):
    """Least-squares regression oracle over a fixed observation set.

    A realization is one observation (x_i, y_i); its per-sample objective is
    the squared prediction residual, so the mean over all observations is the
    full regression objective.  High fidelity differentiates the exact
    monomial prediction, low fidelity the anchor-Taylor surrogate.
    """

    n_theta = 5
    n_xi = 2

    def __init__(self, x_obs, y_obs, gamma=0.2):
        self.x_obs = np.asarray(x_obs, dtype=float)
        self.y_obs = np.asarray(y_obs, dtype=float)
        if self.x_obs.shape != self.y_obs.shape or self.x_obs.ndim != 1:
            raise ConfigFault("observations must be matching 1-d arrays")
        self.gamma = float(gamma)
        self.n_obs = self.x_obs.size

    @classmethod
    def from_seed(cls, seed, n, gamma=0.2):
        x, y = gen_observations(seed, n)
        return cls(x, y, gamma=gamma)

    @cached_property
    def _vandermonde(self):
        return monomial_basis(self.x_obs)

    @cached_property
    def theta_star(self):
        """Exact least-squares minimizer over the observation set."""
        return np.linalg.lstsq(self._vandermonde, self.y_obs, rcond=None)[0]

    def mse(self, theta):
        """Mean squared prediction error over all observations."""
        resid = self.y_obs - self._vandermonde @ np.asarray(theta, dtype=float)
        return float(np.mean(resid**2))

    def sample(self, rng):
        i = int(rng.integers(self.n_obs))
        return RandomRealization(np.array([self.x_obs[i], self.y_obs[i]]), index=i + 1)

    def realization_set(self, n, rng):
        if n == self.n_obs:
            return [RandomRealization(np.array([x, y]), index=i + 1)
                    for i, (x, y) in enumerate(zip(self.x_obs, self.y_obs))]
        return super().realization_set(n, rng)

    def _basis_rows(self, x, fidelity):
        check_fidelity(fidelity)
        if fidelity == HIGH:
            return monomial_basis(x)
        return taylor_basis(x, nearest_anchor(x))

    def grad(self, theta, xi, fidelity):
        x, y = xi.xi
        basis = self._basis_rows(x, fidelity)
        resid = y - basis @ np.asarray(theta, dtype=float)
        cost = 1.0 if fidelity == HIGH else self.gamma
        return -2.0 * resid * basis, cost

    def grad_many(self, theta, realizations, fidelity):
        xs = np.array([r.xi[0] for r in realizations])
        ys = np.array([r.xi[1] for r in realizations])
        basis = self._basis_rows(xs, fidelity)
        resid = ys - basis @ np.asarray(theta, dtype=float)
        unit = 1.0 if fidelity == HIGH else self.gamma
        return -2.0 * resid[:, None] * basis, unit * len(realizations)

    def objective(self, theta, xi, fidelity):
        x, y = xi.xi
        basis = self._basis_rows(x, fidelity)
        resid = y - basis @ np.asarray(theta, dtype=float)
        return float(resid**2)
