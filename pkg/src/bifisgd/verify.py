"""Built-in self-checks runnable from the command line.

Each suite performs a fast independent verification of one subsystem and
returns (passed, detail).  These are smoke checks for installations; the full
test suite lives in the package's tests directory.
"""

import numpy as np

from .control_variates import PairedSamples, optimal_alpha_scalar, predicted_variance
from .costs import cost_bfsag, cost_bfsvrg
from .fem2d import FilterKernel, LoadCase, StructuredMesh, assemble_and_solve, \
    compliance_gradient, mass_gradient
from .optimizers import measure_linear_rate
from .uncertainty import CovarianceSpec, build_kl


def verify_gradients():
    """Adjoint compliance+mass gradient vs central finite differences, 12x4 mesh."""
    rng = np.random.default_rng(7)
    mesh = StructuredMesh(12, 4)
    kernel = FilterKernel(mesh, 1.5)
    lam, beta_p = 0.5, 3.0
    f = np.zeros(mesh.n_dof)
    load_dofs = rng.choice(mesh.n_dof, size=5, replace=False)
    f[load_dofs] = rng.uniform(-1.0, 1.0, size=5)
    fixed = np.array([2 * mesh.node(0, iy) for iy in range(mesh.nely + 1)]
                     + [2 * mesh.node(mesh.nelx, mesh.nely) + 1])
    load = LoadCase(f=f, fixed_dofs=fixed)
    theta = rng.uniform(0.2, 1.0, mesh.n_elements)

    def compliance(t):
        rho = kernel.apply(t)
        return assemble_and_solve(mesh, rho, 1.0, load, beta_p, rtol=1e-12).compliance

    rho = kernel.apply(theta)
    solve = assemble_and_solve(mesh, rho, 1.0, load, beta_p, rtol=1e-12)
    grad = compliance_gradient(mesh, theta, kernel, solve, beta_p, 1.0) \
        + mass_gradient(mesh, kernel, lam)
    step = 1e-6
    worst = 0.0
    for i in rng.choice(mesh.n_elements, size=8, replace=False):
        up, dn = theta.copy(), theta.copy()
        up[i] += step
        dn[i] -= step
        fd = (compliance(up) - compliance(dn)) / (2 * step) + lam * mass_gradient(
            mesh, kernel, 1.0)[i]
        worst = max(worst, abs(grad[i] - fd) / max(abs(fd), 1e-12))
    return worst < 1e-4, f"max relative gradient error {worst:.2e} (tolerance 1e-4)"


def verify_cv():
    """Optimal coefficient and variance law on correlated Gaussian pairs."""
    rng = np.random.default_rng(11)
    rho, n, reps = 0.9, 64, 4000
    z = rng.standard_normal((reps, n, 2))
    x = z[:, :, 0]
    y = rho * z[:, :, 0] + np.sqrt(1 - rho**2) * z[:, :, 1]
    pairs = PairedSamples(x[0][:, None], y[0][:, None], np.zeros(1))
    alpha = optimal_alpha_scalar(pairs)
    alpha_err = abs(alpha - rho)  # analytic alpha* = rho for unit variances
    means = (x - rho * y).mean(axis=1)  # exact-mean CV estimates of E[X] = 0
    mc_var = means.var(ddof=1)
    law = predicted_variance(rho, 1.0, n)
    var_err = abs(mc_var - law) / law
    ok = alpha_err < 0.2 and var_err < 0.2
    return ok, (f"alpha error {alpha_err:.3f} (n=64 draw), "
                f"variance law mismatch {var_err:.1%} (tolerance 20%)")


def verify_kl():
    """Eigen-residuals and the two-point analytic spectrum."""
    spec = CovarianceSpec(1.5, 2.0, 2.0)
    two = build_kl(spec, np.array([[0.0, 0.0], [0.7, 0.0]]), 2)
    lam_ref = spec.sigma**2 * (1 + np.exp(-0.7 / 2.0))
    ok_two = abs(two.eigenvalues[0] - lam_ref) < 1e-12

    mesh = StructuredMesh(16, 8)
    field = build_kl(CovarianceSpec(2.0, 4.0, 4.0), mesh.centroids(), 20)
    cov = field.spec.matrix(field.centroids)
    resid = np.linalg.norm(cov @ field.eigenvectors
                           - field.eigenvectors * field.eigenvalues, axis=0)
    worst = resid.max() / field.eigenvalues[0]
    return ok_two and worst < 1e-8, (
        f"two-point eigenvalue error {abs(two.eigenvalues[0] - lam_ref):.1e}, "
        f"max eigen-residual {worst:.1e} (tolerance 1e-8)")


def verify_costs():
    """Closed-form cost formulas at the reference configurations."""
    sag = cost_bfsag(100, 5, 95, 0.096)
    svrg = cost_bfsvrg(1, 20, 5, 4, 0.096)
    ok = sag == 1412.0 and svrg == 23.84
    return ok, f"bfsag cost {sag!r} (want 1412.0), bfsvrg cost {svrg!r} (want 23.84)"


def verify_rates():
    """Rate measurement on exact and noisy geometric series."""
    k = np.arange(60)
    rate1, q1 = measure_linear_rate(0.9**k, 1.0)
    rng = np.random.default_rng(3)
    noisy = 0.8**k * (1 + 0.01 * rng.standard_normal(60))
    rate2, q2 = measure_linear_rate(noisy, 0.5)
    ok = abs(rate1 - 0.9) < 1e-12 and q1 > 0.999999 and 0.79 < rate2 < 0.81 and q2 > 0.99
    return ok, (f"exact series rate {rate1:.6f} (want 0.9), "
                f"noisy series rate {rate2:.4f} fit {q2:.4f}")


SUITES = {
    "gradients": verify_gradients,
    "cv": verify_cv,
    "kl": verify_kl,
    "costs": verify_costs,
    "rates": verify_rates,
}


def run_suite(name):
    if name not in SUITES:
        raise KeyError(name)
    return SUITES[name]()
