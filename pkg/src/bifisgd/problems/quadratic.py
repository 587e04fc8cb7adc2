"""Strongly convex quadratic oracle with tunable noise and fidelity coupling.

The noise-free high-fidelity gradient is A (theta - theta_star) for an SPD
matrix with known extremal eigenvalues, so strong convexity and gradient
Lipschitz constants are exact.  Stochasticity enters through the realization
vector only:

* a shared multiplicative factor (1 + noise_mult * xi_0), which keeps the
  gradient magnitude proportional to the distance from the optimum,
* additive noise built from two independent standard-normal blocks mixed so
  the per-direction correlation between the high- and low-fidelity additive
  parts is exactly ``low_noise_rho``.

With low_scale=1, zero bias, rho=1 and equal noise levels the two fidelities
coincide bitwise, the regime used by the contraction-rate checks.
"""

import numpy as np

from ..errors import ConfigFault
from ..oracle import HIGH, BiFidelityOracle, RandomRealization, check_fidelity


class QuadraticOracle(BiFidelityOracle):
    def __init__(self, matrix, theta_star, *, noise_add=0.0, noise_mult=0.0,
                 low_scale=1.0, low_bias=None, low_noise_rho=1.0,
                 low_noise_add=None, gamma=0.2):
        a = np.asarray(matrix, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ConfigFault("matrix must be square")
        if not np.allclose(a, a.T, atol=1e-12):
            raise ConfigFault("matrix must be symmetric")
        eigs = np.linalg.eigvalsh(a)
        if eigs[0] <= 0:
            raise ConfigFault("matrix must be positive definite")
        if abs(low_noise_rho) > 1:
            raise ConfigFault("low_noise_rho must lie in [-1, 1]")
        self.matrix = a
        self.theta_star = np.asarray(theta_star, dtype=float)
        self.mu = float(eigs[0])
        self.lipschitz = float(eigs[-1])
        self.n_theta = a.shape[0]
        self.n_xi = 2 * self.n_theta + 1
        self.noise_add = float(noise_add)
        self.noise_mult = float(noise_mult)
        self.low_scale = float(low_scale)
        self.low_bias = None if low_bias is None else np.asarray(low_bias, dtype=float)
        self.low_noise_rho = float(low_noise_rho)
        self.low_noise_add = self.noise_add if low_noise_add is None else float(low_noise_add)
        self.gamma = float(gamma)

    def sample(self, rng):
        return RandomRealization(rng.standard_normal(self.n_xi))

    def _core(self, theta):
        return self.matrix @ (np.asarray(theta, dtype=float) - self.theta_star)

    def _split(self, xi):
        n = self.n_theta
        return xi[0], xi[1:1 + n], xi[1 + n:]

    def grad(self, theta, xi, fidelity):
        check_fidelity(fidelity)
        mult, noise_h, noise_l = self._split(xi.xi)
        core = (1.0 + self.noise_mult * mult) * self._core(theta)
        if fidelity == HIGH:
            return core + self.noise_add * noise_h, 1.0
        g = self.low_scale * core
        if self.low_bias is not None:
            g = g + self.low_bias
        rho = self.low_noise_rho
        mixed = rho * noise_h + np.sqrt(1.0 - rho**2) * noise_l
        return g + self.low_noise_add * mixed, self.gamma

    def objective(self, theta, xi, fidelity):
        check_fidelity(fidelity)
        mult, noise_h, noise_l = self._split(xi.xi)
        err = np.asarray(theta, dtype=float) - self.theta_star
        value = 0.5 * (1.0 + self.noise_mult * mult) * err @ self.matrix @ err
        if fidelity == HIGH:
            return float(value + self.noise_add * noise_h @ err)
        rho = self.low_noise_rho
        mixed = rho * noise_h + np.sqrt(1.0 - rho**2) * noise_l
        value = self.low_scale * value + self.low_noise_add * mixed @ err
        if self.low_bias is not None:
            value += self.low_bias @ err
        return float(value)

    def expected_low_grad(self, theta):
        g = self.low_scale * self._core(theta)
        if self.low_bias is not None:
            g = g + self.low_bias
        return g


def quadratic_oracle(n=4, mu=1.0, lipschitz=4.0, seed=0, **kwargs) -> QuadraticOracle:
    """Random-orientation SPD quadratic with eigenvalues spread over [mu, L]."""
    if mu <= 0 or lipschitz < mu:
        raise ConfigFault("need 0 < mu <= lipschitz")
    rng = np.random.default_rng(seed)
    if n == 1:
        basis = np.ones((1, 1))
    else:
        basis, _ = np.linalg.qr(rng.standard_normal((n, n)))
    spectrum = np.linspace(mu, lipschitz, n)
    matrix = (basis * spectrum) @ basis.T
    matrix = 0.5 * (matrix + matrix.T)
    theta_star = rng.standard_normal(n)
    return QuadraticOracle(matrix, theta_star, **kwargs)
