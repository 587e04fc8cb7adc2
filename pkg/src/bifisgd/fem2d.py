"""Structured-grid plane-stress elasticity with SIMP density interpolation.

The mesh is a regular grid of square 4-node bilinear elements with unit
thickness.  Nodes are numbered column-major (down each column of nodes, left
to right) with the y axis pointing down, the convention of the classic
compliance-minimization codes; each node carries an (x, y) displacement pair,
so dof 2n is horizontal and 2n+1 vertical.

Design variables live on elements.  A radial density filter maps designs to
physical densities, a power law maps densities to element moduli, and the
assembled sparse SPD system is solved with diagonally preconditioned conjugate
gradients.  Design gradients of compliance use the self-adjoint sensitivity
chained through the filter.  Restriction (4-to-1 child averaging) and cubic
spline prolongation transfer element fields between a mesh and its 2x
refinement.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.interpolate import CubicSpline, make_interp_spline

from .errors import DimensionFault, DomainFault, SingularSystem, SolverDivergence


@dataclass(frozen=True)
class StructuredMesh:
    """Regular grid of square plane-stress elements."""

    nelx: int
    nely: int
    element_size: float = 1.0

    def __post_init__(self):
        if self.nelx < 1 or self.nely < 1:
            raise DimensionFault("mesh needs at least one element per direction")
        if self.element_size <= 0:
            raise DomainFault("element size must be positive")

    @property
    def n_elements(self):
        return self.nelx * self.nely

    @property
    def n_nodes(self):
        return (self.nelx + 1) * (self.nely + 1)

    @property
    def n_dof(self):
        return 2 * self.n_nodes

    def node(self, ix, iy):
        """Node id at grid position (ix right, iy down)."""
        return ix * (self.nely + 1) + iy

    @cached_property
    def edof(self):
        """(n_elements, 8) dof indices per element.

        Local node order: top-left, top-right, bottom-right, bottom-left,
        matching the closed-form element stiffness below.
        """
        ex, ey = np.divmod(np.arange(self.n_elements), self.nely)
        n1 = ex * (self.nely + 1) + ey          # top-left node
        n2 = (ex + 1) * (self.nely + 1) + ey    # top-right node
        return np.column_stack([
            2 * n1, 2 * n1 + 1,
            2 * n2, 2 * n2 + 1,
            2 * n2 + 2, 2 * n2 + 3,
            2 * n1 + 2, 2 * n1 + 3,
        ])

    def centroids(self):
        """(n_elements, 2) element centers in physical units."""
        ex, ey = np.divmod(np.arange(self.n_elements), self.nely)
        h = self.element_size
        return np.column_stack([(ex + 0.5) * h, (ey + 0.5) * h])

    def element_volumes(self):
        return np.full(self.n_elements, self.element_size**2)

    def to_grid(self, field):
        """Element vector -> (nely, nelx) array, rows top to bottom."""
        field = np.asarray(field)
        if field.size != self.n_elements:
            raise DimensionFault(f"field length {field.size} != {self.n_elements}")
        return field.reshape(self.nelx, self.nely).T

    def from_grid(self, grid):
        grid = np.asarray(grid)
        if grid.shape != (self.nely, self.nelx):
            raise DimensionFault(f"grid shape {grid.shape} != ({self.nely}, {self.nelx})")
        return grid.T.reshape(-1)


def element_stiffness(nu):
    """Unit-modulus plane-stress stiffness of a square bilinear element.

    Symmetric positive semi-definite with rank 5 (three rigid-body modes);
    independent of the element size.
    """
    if not 0.0 <= nu < 0.5:
        raise DomainFault(f"Poisson ratio must lie in [0, 0.5), got {nu}")
    k = np.array([
        1 / 2 - nu / 6, 1 / 8 + nu / 8, -1 / 4 - nu / 12, -1 / 8 + 3 * nu / 8,
        -1 / 4 + nu / 12, -1 / 8 - nu / 8, nu / 6, 1 / 8 - 3 * nu / 8,
    ]) / (1 - nu**2)
    order = np.array([
        [0, 1, 2, 3, 4, 5, 6, 7],
        [1, 0, 7, 6, 5, 4, 3, 2],
        [2, 7, 0, 5, 6, 3, 4, 1],
        [3, 6, 5, 0, 7, 2, 1, 4],
        [4, 5, 6, 7, 0, 1, 2, 3],
        [5, 4, 3, 2, 1, 0, 7, 6],
        [6, 3, 4, 1, 2, 7, 0, 5],
        [7, 2, 1, 4, 3, 6, 5, 0],
    ])
    return k[order]


def simp_modulus(rho, beta_p, e0):
    """Power-law modulus interpolation rho**beta_p * e0."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0.0):
        raise DomainFault("density must be strictly positive")
    return rho**beta_p * e0


class FilterKernel:
    """Radial density filter on a structured mesh.

    Weights are hat functions max(0, r_f - d) of the centroid distance d,
    normalized per element so each filtered density is a convex combination of
    nearby design values.
    """

    def __init__(self, mesh: StructuredMesh, r_f: float):
        if r_f <= 0:
            raise DomainFault("filter radius must be positive")
        self.mesh = mesh
        self.r_f = float(r_f)
        self.weights = self._build(mesh, self.r_f)
        self.row_sums = np.asarray(self.weights.sum(axis=1)).ravel()

    @staticmethod
    def _build(mesh, r_f):
        h = mesh.element_size
        reach = int(np.ceil(r_f / h))
        ex, ey = np.divmod(np.arange(mesh.n_elements), mesh.nely)
        rows, cols, vals = [], [], []
        for dx in range(-reach, reach + 1):
            for dy in range(-reach, reach + 1):
                w = r_f - h * np.hypot(dx, dy)
                if w <= 0:
                    continue
                nx, ny = ex + dx, ey + dy
                ok = (0 <= nx) & (nx < mesh.nelx) & (0 <= ny) & (ny < mesh.nely)
                rows.append(np.flatnonzero(ok))
                cols.append((nx[ok] * mesh.nely + ny[ok]))
                vals.append(np.full(int(ok.sum()), w))
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        vals = np.concatenate(vals)
        return sp.csr_matrix((vals, (rows, cols)),
                             shape=(mesh.n_elements, mesh.n_elements))

    def apply(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.size != self.mesh.n_elements:
            raise DimensionFault(f"theta length {theta.size} != {self.mesh.n_elements}")
        return (self.weights @ theta) / self.row_sums

    def apply_adjoint(self, sensitivity):
        sensitivity = np.asarray(sensitivity, dtype=float)
        if sensitivity.size != self.mesh.n_elements:
            raise DimensionFault(
                f"sensitivity length {sensitivity.size} != {self.mesh.n_elements}")
        return self.weights.T @ (sensitivity / self.row_sums)


def density_filter(kernel: FilterKernel, theta):
    """Filtered densities: each entry a convex combination of neighbors."""
    return kernel.apply(theta)


@dataclass
class LoadCase:
    """Nodal force vector and fixed degrees of freedom."""

    f: np.ndarray
    fixed_dofs: np.ndarray

    def __post_init__(self):
        self.f = np.asarray(self.f, dtype=float)
        self.fixed_dofs = np.unique(np.asarray(self.fixed_dofs, dtype=int))
        if self.fixed_dofs.size == 0:
            raise SingularSystem("no fixed degrees of freedom")

    def validate(self, mesh: StructuredMesh):
        if self.f.size != mesh.n_dof:
            raise DimensionFault(f"force vector length {self.f.size} != {mesh.n_dof}")
        if self.fixed_dofs.min() < 0 or self.fixed_dofs.max() >= mesh.n_dof:
            raise DimensionFault("fixed dof index out of range")
        has_x = np.any(self.fixed_dofs % 2 == 0)
        has_y = np.any(self.fixed_dofs % 2 == 1)
        if self.fixed_dofs.size < 3 or not (has_x and has_y):
            raise SingularSystem("constraints leave planar rigid-body modes")

    def free_dofs(self, mesh):
        return np.setdiff1d(np.arange(mesh.n_dof), self.fixed_dofs)


@dataclass
class SolveResult:
    """Displacements and compliance of one linear solve."""

    u: np.ndarray
    compliance: float
    iterations: int
    residual: float


def assemble_stiffness(mesh, e_moduli, nu=0.3):
    """Global sparse stiffness for per-element moduli ``e_moduli``."""
    e_moduli = np.broadcast_to(np.asarray(e_moduli, dtype=float), (mesh.n_elements,))
    ke = element_stiffness(nu)
    edof = mesh.edof
    data = (e_moduli[:, None, None] * ke[None]).ravel()
    rows = np.repeat(edof, 8, axis=1).ravel()
    cols = np.tile(edof, (1, 8)).ravel()
    return sp.csr_matrix((data, (rows, cols)), shape=(mesh.n_dof, mesh.n_dof))


def assemble_and_solve(mesh, rho, e_field, load: LoadCase, beta_p,
                       nu=0.3, rtol=1e-8, maxiter=None) -> SolveResult:
    """Solve K(rho) u = f with diagonally preconditioned conjugate gradients.

    The relative residual is driven below ``rtol``; exceeding the iteration
    cap (10x the dof count by default) raises SolverDivergence.
    """
    load.validate(mesh)
    moduli = simp_modulus(rho, beta_p, np.broadcast_to(
        np.asarray(e_field, dtype=float), (mesh.n_elements,)))
    k_full = assemble_stiffness(mesh, moduli, nu)
    free = load.free_dofs(mesh)
    k_free = k_full[free][:, free]
    f_free = load.f[free]
    u = np.zeros(mesh.n_dof)
    f_norm = np.linalg.norm(f_free)
    if f_norm == 0.0:
        return SolveResult(u=u, compliance=0.0, iterations=0, residual=0.0)

    diag = k_free.diagonal()
    if np.any(diag <= 0):
        raise SingularSystem("non-positive stiffness diagonal on free dofs")
    precond = sp.diags(1.0 / diag)
    if maxiter is None:
        maxiter = 10 * mesh.n_dof
    iterations = 0

    def count(_):
        nonlocal iterations
        iterations += 1

    # ask for margin below rtol: the recurrence residual the solver tracks can
    # sit slightly above the true residual we verify against the contract
    u_free, info = spla.cg(k_free, f_free, rtol=0.25 * rtol, atol=0.0,
                           maxiter=maxiter, M=precond, callback=count)
    residual = np.linalg.norm(k_free @ u_free - f_free) / f_norm
    if info != 0 or residual > rtol:
        raise SolverDivergence(
            f"conjugate gradients stopped at relative residual {residual:.3e} "
            f"after {iterations} iterations (target {rtol:.1e})")
    u[free] = u_free
    return SolveResult(u=u, compliance=float(load.f @ u),
                       iterations=iterations, residual=float(residual))


def element_energies(mesh, u, nu=0.3):
    """Per-element u_e^T k0 u_e for a unit-modulus element matrix."""
    ke = element_stiffness(nu)
    ue = u[mesh.edof]
    return np.einsum("ei,ij,ej->e", ue, ke, ue)


def compliance_gradient(mesh, theta, kernel, solve: SolveResult, beta_p,
                        e_field, nu=0.3):
    """Design gradient of the compliance f^T u.

    Self-adjoint element sensitivity -beta_p rho^(beta_p-1) E0 u_e^T k0 u_e
    (never positive), chained through the density filter transpose.
    """
    rho = kernel.apply(theta)
    e0 = np.broadcast_to(np.asarray(e_field, dtype=float), (mesh.n_elements,))
    sens = -beta_p * rho**(beta_p - 1) * e0 * element_energies(mesh, solve.u, nu)
    return kernel.apply_adjoint(sens)


def mass_gradient(mesh, kernel, lam):
    """Design gradient of the mass term lam * sum(v_e rho_e); theta-free."""
    return lam * kernel.apply_adjoint(mesh.element_volumes())


def restrict(field_fine, fine: StructuredMesh):
    """Coarsen an element field by averaging each 2x2 block of children."""
    if fine.nelx % 2 or fine.nely % 2:
        raise DimensionFault(f"fine dims ({fine.nelx}, {fine.nely}) not divisible by 2")
    grid = fine.to_grid(field_fine)
    block_mean = 0.25 * (grid[0::2, 0::2] + grid[1::2, 0::2]
                         + grid[0::2, 1::2] + grid[1::2, 1::2])
    return block_mean.T.reshape(-1)


def prolong(field_coarse, coarse: StructuredMesh):
    """Interpolate a coarse element field onto the 2x refined mesh.

    Tensor-product natural cubic spline through the coarse centroid values,
    evaluated at the fine centroids (which extend half a fine cell beyond the
    coarse centroid range, where the end polynomials extrapolate).  Grids
    thinner than 4 elements in either direction fall back to piecewise-linear
    interpolation.

    Returns ``(field_fine, method)`` with method "cubic" or "bilinear".
    """
    grid = coarse.to_grid(field_coarse)          # (nely_c, nelx_c)
    h_c = coarse.element_size
    h_f = 0.5 * h_c
    xc = (np.arange(coarse.nelx) + 0.5) * h_c
    yc = (np.arange(coarse.nely) + 0.5) * h_c
    xf = (np.arange(2 * coarse.nelx) + 0.5) * h_f
    yf = (np.arange(2 * coarse.nely) + 0.5) * h_f

    cubic = coarse.nelx >= 4 and coarse.nely >= 4
    if cubic:
        along_x = CubicSpline(xc, grid, axis=1, bc_type="natural")(xf)
        fine_grid = CubicSpline(yc, along_x, axis=0, bc_type="natural")(yf)
    else:
        along_x = make_interp_spline(xc, grid, k=min(1, coarse.nelx - 1), axis=1)(xf)
        fine_grid = make_interp_spline(yc, along_x, k=min(1, coarse.nely - 1), axis=0)(yf)
    fine = StructuredMesh(2 * coarse.nelx, 2 * coarse.nely, h_f)
    return fine.from_grid(fine_grid), "cubic" if cubic else "bilinear"


def density_to_csv(field, mesh: StructuredMesh, path):
    """Write an element field as a CSV grid (nely rows x nelx columns)."""
    grid = mesh.to_grid(field)
    lines = [",".join(f"{v:.6g}" for v in row) for row in grid]
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
