"""Half-beam SIMP topology optimization oracles with a coarse-mesh low fidelity.

The design domain is the right half of a simply supported beam, meshed with
square elements (unit size on the fine mesh).  Symmetry is enforced by
horizontal rollers along the left edge plus a vertical roller at the bottom
right corner.  Three uncertainty variants share the geometry:

* ``a`` -- random magnitude of the downward midspan load,
* ``b`` -- variant a plus a second inclined unit load applied at the top-edge
           node nearest to one quarter of the half-span, with random angle,
* ``c`` -- variant a plus a lognormal modulus field from a truncated
           Karhunen-Loeve expansion (101 random inputs in total).

The high-fidelity gradient is the filtered compliance sensitivity plus the
mass term on the fine mesh.  The low-fidelity gradient restricts the design to
the 2x coarser mesh, solves and differentiates there, rescales the coarse
per-element sensitivity by the child count (the chain factor of the
restriction, which keeps both fidelities on the fine-gradient scale), and
interpolates back with a cubic spline; its mass term is computed exactly on
the fine mesh.  Low-fidelity solves of variant c restrict the Gaussian
log-field before exponentiating.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigFault, SolverDivergence
from ..fem2d import (
    FilterKernel,
    LoadCase,
    StructuredMesh,
    assemble_and_solve,
    compliance_gradient,
    mass_gradient,
    prolong,
    restrict,
)
from ..oracle import HIGH, BiFidelityOracle, DesignVector, RandomRealization, check_fidelity
from ..uncertainty import (
    CovarianceSpec,
    LoadDirectionModel,
    LoadMagnitudeModel,
    build_kl,
    sample_direction,
    sample_load,
    sample_log_field,
)

VARIANTS = ("a", "b", "c")


@dataclass
class TopOptProblem:
    """Configuration of one half-beam variant.

    ``nelx`` x ``nely`` is the fine mesh (must be even in both directions so
    the coarse mesh exists).  The filter radius is ``rf_factor`` element
    widths on each mesh.  The correlation length of the variant-c field is
    1/40 of the full beam span, i.e. nelx/20 fine element widths.
    """

    variant: str = "a"
    nelx: int = 120
    nely: int = 40
    beta_p: float = 3.0
    rf_factor: float = 1.5
    theta_min: float = 1e-3
    lam: float | None = None
    p0: float = 1.0
    gamma: float = 0.096
    nu: float = 0.3
    n_modes: int = 100
    sigma: float = 2.0
    solver_rtol: float = 1e-8

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigFault(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.nelx % 2 or self.nely % 2:
            raise ConfigFault("fine mesh dimensions must be even")
        if self.lam is None:
            self.lam = 1.0 if self.variant == "a" else 0.25
        if not 0.0 < self.theta_min < 1.0:
            raise ConfigFault("theta_min must lie in (0, 1)")

    @property
    def correlation_length(self):
        return self.nelx / 20.0


class TopOptOracle(BiFidelityOracle):
    """Bi-fidelity gradient oracle for one half-beam problem."""

    def __init__(self, problem: TopOptProblem):
        self.problem = problem
        p = problem
        self.fine = StructuredMesh(p.nelx, p.nely, 1.0)
        self.coarse = StructuredMesh(p.nelx // 2, p.nely // 2, 2.0)
        self.fine_kernel = FilterKernel(self.fine, p.rf_factor * self.fine.element_size)
        self.coarse_kernel = FilterKernel(self.coarse, p.rf_factor * self.coarse.element_size)
        self.n_theta = self.fine.n_elements
        self.gamma = p.gamma
        self.load_model = LoadMagnitudeModel(p.p0)
        self.direction_model = LoadDirectionModel()
        if p.variant == "a":
            self.n_xi = 1
        elif p.variant == "b":
            self.n_xi = 2
        else:
            self.n_xi = 1 + p.n_modes
            length = p.correlation_length
            spec = CovarianceSpec(p.sigma, length, length)
            self.kl = build_kl(spec, self.fine.centroids(), p.n_modes)
        # mass gradients are design independent, so precompute them
        self._mass_grad_fine = mass_gradient(self.fine, self.fine_kernel, p.lam)
        self._fine_fixed = self._fixed_dofs(self.fine)
        self._coarse_fixed = self._fixed_dofs(self.coarse)
        self._fine_volume = self.fine.element_volumes().sum()

    @staticmethod
    def _fixed_dofs(mesh):
        left_x = np.array([2 * mesh.node(0, iy) for iy in range(mesh.nely + 1)])
        corner_y = 2 * mesh.node(mesh.nelx, mesh.nely) + 1
        return np.append(left_x, corner_y)

    def default_theta0(self, fill=0.5):
        n = self.n_theta
        return DesignVector(np.full(n, fill),
                            lower=np.full(n, self.problem.theta_min),
                            upper=np.ones(n))

    def sample(self, rng):
        p = self.problem
        if p.variant == "a":
            xi = np.array([rng.uniform(0.0, 1.0)])
        elif p.variant == "b":
            xi = np.array([rng.uniform(0.0, 1.0),
                           rng.uniform(-np.pi / 8, np.pi / 8)])
        else:
            xi = np.concatenate([[rng.uniform(0.0, 1.0)],
                                 rng.standard_normal(p.n_modes)])
        return RandomRealization(xi)

    def _load_case(self, mesh, xi, fixed):
        p = self.problem
        f = np.zeros(mesh.n_dof)
        magnitude = sample_load(self.load_model, xi[0])
        f[2 * mesh.node(0, 0) + 1] = -magnitude
        if p.variant == "b":
            phi = sample_direction(self.direction_model, xi[1])
            node = mesh.node(int(round(mesh.nelx / 4)), 0)
            f[2 * node] = p.p0 * np.cos(phi)
            f[2 * node + 1] = -p.p0 * np.sin(phi)
        return LoadCase(f=f, fixed_dofs=fixed)

    def _log_field(self, xi):
        return sample_log_field(self.kl, xi[1:])

    def _modulus_fields(self, xi, need_coarse):
        if self.problem.variant != "c":
            return 1.0, 1.0
        z = self._log_field(xi)
        coarse = np.exp(restrict(z, self.fine)) if need_coarse else None
        return np.exp(z), coarse

    def _solve(self, mesh, kernel, theta, e_field, load, xi):
        p = self.problem
        rho = np.clip(kernel.apply(theta), p.theta_min, 1.0)
        try:
            return rho, assemble_and_solve(mesh, rho, e_field, load, p.beta_p,
                                           nu=p.nu, rtol=p.solver_rtol)
        except SolverDivergence as exc:
            raise SolverDivergence(str(exc), xi=xi) from exc

    def grad(self, theta, xi, fidelity):
        check_fidelity(fidelity)
        theta = np.asarray(theta, dtype=float)
        p = self.problem
        if fidelity == HIGH:
            e_fine, _ = self._modulus_fields(xi.xi, need_coarse=False)
            load = self._load_case(self.fine, xi.xi, self._fine_fixed)
            _, result = self._solve(self.fine, self.fine_kernel, theta, e_fine, load, xi.xi)
            g = compliance_gradient(self.fine, theta, self.fine_kernel, result,
                                    p.beta_p, e_fine, nu=p.nu)
            return g + self._mass_grad_fine, 1.0

        theta_c = restrict(theta, self.fine)
        _, e_coarse = self._modulus_fields(xi.xi, need_coarse=True)
        load = self._load_case(self.coarse, xi.xi, self._coarse_fixed)
        _, result = self._solve(self.coarse, self.coarse_kernel, theta_c, e_coarse, load, xi.xi)
        g_coarse = compliance_gradient(self.coarse, theta_c, self.coarse_kernel, result,
                                       p.beta_p, e_coarse, nu=p.nu)
        # chain factor of the 4-child averaging, so the interpolated coarse
        # sensitivity estimates the fine per-element sensitivity
        g_fine, _method = prolong(0.25 * g_coarse, self.coarse)
        return g_fine + self._mass_grad_fine, self.gamma

    def objective(self, theta, xi, fidelity):
        check_fidelity(fidelity)
        theta = np.asarray(theta, dtype=float)
        p = self.problem
        if fidelity == HIGH:
            e_fine, _ = self._modulus_fields(xi.xi, need_coarse=False)
            load = self._load_case(self.fine, xi.xi, self._fine_fixed)
            _, result = self._solve(self.fine, self.fine_kernel, theta, e_fine, load, xi.xi)
        else:
            theta_c = restrict(theta, self.fine)
            _, e_coarse = self._modulus_fields(xi.xi, need_coarse=True)
            load = self._load_case(self.coarse, xi.xi, self._coarse_fixed)
            _, result = self._solve(self.coarse, self.coarse_kernel, theta_c,
                                    e_coarse, load, xi.xi)
        return float(result.compliance + p.lam * self.mass(theta))

    def mass(self, theta):
        rho = self.fine_kernel.apply(np.asarray(theta, dtype=float))
        return float(self.fine.element_volumes() @ rho)

    def mass_ratio(self, theta):
        return self.mass(theta) / self._fine_volume

    def density(self, theta):
        """Filtered density field on the fine mesh (for export/plotting)."""
        return self.fine_kernel.apply(np.asarray(theta, dtype=float))


def topopt_oracle(problem: TopOptProblem) -> TopOptOracle:
    return TopOptOracle(problem)
