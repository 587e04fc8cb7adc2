"""Random-input models: load magnitude, load direction, lognormal modulus field.

The modulus field is a truncated discrete Karhunen-Loeve expansion of a
zero-mean Gaussian log-field with separable exponential covariance

    C(p, q) = sigma^2 exp(-|px - qx| / l1 - |py - qy| / l2)

evaluated at element centroids.  Eigenpairs of the covariance matrix give the
modes; a standard-normal coefficient per retained mode synthesizes log-field
realizations, exponentiated into strictly positive moduli.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla

from .errors import DimensionFault, DomainFault, EigenFailure


@dataclass
class LoadMagnitudeModel:
    """Point-load magnitude P0 * (1 + 0.5 xi) for xi uniform on [0, 1]."""

    p0: float = 1.0

    def __post_init__(self):
        if self.p0 <= 0:
            raise DomainFault("base load must be positive")


def sample_load(model: LoadMagnitudeModel, xi):
    if not 0.0 <= xi <= 1.0:
        raise DomainFault(f"load variable must lie in [0, 1], got {xi}")
    return model.p0 * (1.0 + 0.5 * xi)


@dataclass
class LoadDirectionModel:
    """Load angle pi/4 + xi_phi for xi_phi uniform on [-pi/8, pi/8]."""

    mean_angle: float = np.pi / 4
    half_width: float = np.pi / 8


def sample_direction(model: LoadDirectionModel, xi_phi):
    if abs(xi_phi) > model.half_width:
        raise DomainFault(
            f"direction variable must lie in [-{model.half_width}, {model.half_width}]")
    return model.mean_angle + xi_phi


@dataclass
class CovarianceSpec:
    """Separable exponential covariance of the Gaussian log-field."""

    sigma: float
    l1: float
    l2: float

    def __post_init__(self):
        if self.sigma <= 0 or self.l1 <= 0 or self.l2 <= 0:
            raise DomainFault("sigma and correlation lengths must be positive")

    def matrix(self, centroids):
        pts = np.asarray(centroids, dtype=float)
        dx = np.abs(pts[:, None, 0] - pts[None, :, 0])
        dy = np.abs(pts[:, None, 1] - pts[None, :, 1])
        return self.sigma**2 * np.exp(-dx / self.l1 - dy / self.l2)


@dataclass
class KLField:
    """Truncated Karhunen-Loeve representation of the lognormal modulus field."""

    spec: CovarianceSpec
    centroids: np.ndarray
    eigenvalues: np.ndarray        # descending, length n_max
    eigenvectors: np.ndarray       # (n_points, n_max), orthonormal columns
    captured_fraction: float

    @property
    def n_max(self):
        return self.eigenvalues.size

    def log_field_variance(self):
        """Per-point variance of the truncated log-field, sum lam_i psi_i^2."""
        return (self.eigenvectors**2) @ self.eigenvalues

    def save(self, path):
        np.savez_compressed(
            path,
            sigma=self.spec.sigma, l1=self.spec.l1, l2=self.spec.l2,
            centroids=self.centroids,
            eigenvalues=self.eigenvalues, eigenvectors=self.eigenvectors,
            captured_fraction=self.captured_fraction,
        )

    @staticmethod
    def load(path):
        data = np.load(path)
        spec = CovarianceSpec(float(data["sigma"]), float(data["l1"]), float(data["l2"]))
        return KLField(
            spec=spec,
            centroids=data["centroids"],
            eigenvalues=data["eigenvalues"],
            eigenvectors=data["eigenvectors"],
            captured_fraction=float(data["captured_fraction"]),
        )


def kl_cache_key(grid_dims, sigma, l1, l2, n_max):
    """Stable filename stem for persisting a field across runs."""
    nelx, nely = grid_dims
    return f"kl_{nelx}x{nely}_s{sigma:g}_l{l1:g}x{l2:g}_m{n_max}"


def build_kl(spec: CovarianceSpec, centroids, n_max) -> KLField:
    """Leading eigenpairs of the covariance matrix at the centroids.

    The spectrum is normalized by construction: the full eigenvalue sum equals
    trace(C) = n sigma^2, so the captured fraction is sum(lam_1..n_max) over
    n sigma^2.  Uses Lanczos iteration when n_max is well below the point
    count, dense symmetric decomposition otherwise.
    """
    pts = np.asarray(centroids, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise DimensionFault(f"centroids must be (n, 2), got {pts.shape}")
    n = pts.shape[0]
    if not 1 <= n_max <= n:
        raise DimensionFault(f"need 1 <= n_max <= {n}, got {n_max}")
    if np.unique(pts, axis=0).shape[0] != n:
        raise DimensionFault("centroids must be distinct")

    cov = spec.matrix(pts)
    trace = n * spec.sigma**2
    if n_max < n // 4 and n > 200:
        try:
            vals, vecs = spla.eigsh(cov, k=n_max, which="LA")
        except spla.ArpackError as exc:
            raise EigenFailure(f"Lanczos iteration failed: {exc}") from exc
        order = np.argsort(vals)[::-1]
        vals, vecs = vals[order], vecs[:, order]
    else:
        vals, vecs = scipy.linalg.eigh(cov)
        vals, vecs = vals[::-1][:n_max], vecs[:, ::-1][:, :n_max]
    if not np.all(np.isfinite(vals)):
        raise EigenFailure("eigenvalue solver returned non-finite values")
    vals = np.maximum(vals, 0.0)
    return KLField(
        spec=spec,
        centroids=pts,
        eigenvalues=vals,
        eigenvectors=vecs,
        captured_fraction=float(vals.sum() / trace),
    )


def sample_field(kl: KLField, xi):
    """Modulus realization exp(sum_i sqrt(lam_i) xi_i psi_i); always positive."""
    xi = np.asarray(xi, dtype=float)
    if xi.size != kl.n_max:
        raise DimensionFault(f"xi length {xi.size} != retained modes {kl.n_max}")
    z = kl.eigenvectors @ (np.sqrt(kl.eigenvalues) * xi)
    return np.exp(z)


def sample_log_field(kl: KLField, xi):
    """Gaussian log-field realization (the exponent of ``sample_field``)."""
    xi = np.asarray(xi, dtype=float)
    if xi.size != kl.n_max:
        raise DimensionFault(f"xi length {xi.size} != retained modes {kl.n_max}")
    return kl.eigenvectors @ (np.sqrt(kl.eigenvalues) * xi)
