"""Control-variate estimators and optimal coefficient formulas.

Given paired samples of a primary quantity X and a cheaper correlated control
Y with (approximately) known mean, the estimator averages

    Z = X - alpha * (Y - E[Y])

which is unbiased for E[X] whenever E[Y] is exact, with variance reduced by a
factor depending on the X/Y correlation.  Coefficients may be a scalar, a
diagonal (one entry per vector component), or a full matrix.  All functions
here are pure and operate on immutable sample arrays.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateAlpha,
    DimensionFault,
    DomainFault,
    InsufficientData,
    SingularCovariance,
)

SCALAR = "scalar"
DIAGONAL = "diagonal"
MATRIX = "matrix"


@dataclass
class PairedSamples:
    """n paired draws of (X, Y) plus the control mean.

    ``y_mean_exact`` records whether ``y_mean`` is the true expectation or a
    Monte Carlo estimate from ``n_mean_samples`` independent draws; the
    finite-sample coefficient correction depends on the latter.
    """

    x: np.ndarray
    y: np.ndarray
    y_mean: np.ndarray
    y_mean_exact: bool = True
    n_mean_samples: int | None = None

    def __post_init__(self):
        self.x = np.atleast_2d(np.asarray(self.x, dtype=float))
        self.y = np.atleast_2d(np.asarray(self.y, dtype=float))
        if self.x.shape != self.y.shape:
            raise DimensionFault(f"x shape {self.x.shape} != y shape {self.y.shape}")
        self.y_mean = np.atleast_1d(np.asarray(self.y_mean, dtype=float))
        if self.y_mean.size != self.y.shape[1]:
            raise DimensionFault(
                f"y_mean length {self.y_mean.size} != sample dimension {self.y.shape[1]}"
            )
        if not self.y_mean_exact and self.n_mean_samples is None:
            raise DimensionFault("estimated y_mean requires n_mean_samples")

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def dim(self):
        return self.x.shape[1]


@dataclass
class CvCoefficient:
    """Control-variate coefficient: scalar, per-component vector, or matrix.

    ``degenerate`` flags diagonal entries that were zeroed because the control
    had no variance in that direction.
    """

    kind: str
    value: np.ndarray | float
    degenerate: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in (SCALAR, DIAGONAL, MATRIX):
            raise DimensionFault(f"unknown coefficient kind {self.kind!r}")
        if not np.all(np.isfinite(np.atleast_1d(self.value))):
            raise DomainFault("control-variate coefficient has non-finite entries")


def cv_estimate(pairs: PairedSamples, coeff: CvCoefficient) -> np.ndarray:
    """Sample mean of Z = X - alpha (Y - E[Y]) over the paired draws."""
    centered = pairs.y - pairs.y_mean
    if coeff.kind == SCALAR:
        z = pairs.x - float(coeff.value) * centered
    elif coeff.kind == DIAGONAL:
        alpha = np.asarray(coeff.value, dtype=float)
        if alpha.size != pairs.dim:
            raise DimensionFault(f"diagonal alpha length {alpha.size} != dim {pairs.dim}")
        z = pairs.x - centered * alpha
    else:
        alpha = np.asarray(coeff.value, dtype=float)
        if alpha.shape != (pairs.dim, pairs.dim):
            raise DimensionFault(f"matrix alpha shape {alpha.shape} != ({pairs.dim}, {pairs.dim})")
        z = pairs.x - centered @ alpha.T
    return z.mean(axis=0)


def _require_pairs(pairs, min_n=2):
    if pairs.n < min_n:
        raise InsufficientData(f"need at least {min_n} paired samples, got {pairs.n}")


def optimal_alpha_scalar(pairs: PairedSamples) -> float:
    """Variance-minimizing scalar coefficient cov(X, Y) / var(Y).

    Uses unbiased (1/(n-1)) sample moments; the ratio itself is normalization
    invariant.
    """
    _require_pairs(pairs)
    if pairs.dim != 1:
        raise DimensionFault("scalar coefficient needs scalar samples")
    x = pairs.x[:, 0]
    y = pairs.y[:, 0]
    var_y = np.var(y, ddof=1)
    var_x = np.var(x, ddof=1)
    if var_y <= 1e-14 * var_x or var_y == 0.0:
        raise DegenerateAlpha(f"control variance {var_y:.3e} too small vs {var_x:.3e}")
    cov_xy = np.cov(x, y, ddof=1)[0, 1]
    return float(cov_xy / var_y)


def optimal_alpha_matrix(pairs: PairedSamples) -> CvCoefficient:
    """Matrix coefficient minimizing the trace of the covariance of Z.

    Solves alpha @ Var(Y) = Cov(X, Y) from sample moments, the multivariate
    analogue of cov/var.
    """
    _require_pairs(pairs)
    d = pairs.dim
    xc = pairs.x - pairs.x.mean(axis=0)
    yc = pairs.y - pairs.y.mean(axis=0)
    var_y = yc.T @ yc / (pairs.n - 1)
    cov_xy = xc.T @ yc / (pairs.n - 1)
    if np.linalg.cond(var_y) > 1e12:
        raise SingularCovariance("control covariance condition number exceeds 1e12")
    # alpha = Cov(X,Y) Var(Y)^-1, via the transposed symmetric solve
    alpha = np.linalg.solve(var_y, cov_xy.T).T
    return CvCoefficient(MATRIX, alpha)


def diagonal_alpha(high_grads, low_grads, low_mean) -> CvCoefficient:
    """Per-component coefficient cov(high, low) / var(low) from paired batches.

    ``low_mean`` is the externally supplied control mean (e.g. estimated from
    a much larger sample); low deviations are centered on it while high
    deviations use their own batch mean.  Components where the control has no
    variance get coefficient 0 and a degeneracy flag instead of an error.
    """
    high = np.atleast_2d(np.asarray(high_grads, dtype=float))
    low = np.atleast_2d(np.asarray(low_grads, dtype=float))
    if high.shape != low.shape:
        raise DimensionFault(f"high shape {high.shape} != low shape {low.shape}")
    low_mean = np.atleast_1d(np.asarray(low_mean, dtype=float))
    if low_mean.size != low.shape[1]:
        raise DimensionFault(f"low_mean length {low_mean.size} != dim {low.shape[1]}")
    if high.shape[0] < 2:
        raise InsufficientData("need at least 2 paired gradient samples")

    high_dev = high - high.mean(axis=0)
    low_dev = low - low_mean
    num = np.sum(high_dev * low_dev, axis=0)
    den = np.sum(low_dev * low_dev, axis=0)
    scale = den.max(initial=0.0)
    degenerate = den <= 1e-14 * scale if scale > 0.0 else np.ones_like(den, dtype=bool)
    alpha = np.divide(num, den, out=np.zeros_like(num), where=~degenerate)
    return CvCoefficient(DIAGONAL, alpha, degenerate=degenerate)


def corrected_alpha(diag: CvCoefficient, n_h: int, n_l: int) -> CvCoefficient:
    """Finite-sample correction 1/(1 + n_h/n_l) for an estimated control mean.

    When the control mean itself comes from n_l Monte Carlo draws, the
    variance-optimal coefficient shrinks by this factor; it tends to 1 as
    n_l grows (exact-mean limit).
    """
    if n_h < 1 or n_l < 1:
        raise DomainFault("sample counts must be >= 1")
    factor = 1.0 / (1.0 + n_h / n_l)
    value = np.asarray(diag.value, dtype=float) * factor if diag.kind != SCALAR \
        else float(diag.value) * factor
    return CvCoefficient(diag.kind, value, degenerate=diag.degenerate)


def predicted_variance(rho, var_x, n_h, n_l=None):
    """Variance law for the optimally-weighted estimator mean.

    Exact control mean:      (1 - rho^2) var_x / n_h
    Mean from n_l draws:     (1 - rho^2 / (1 + n_h/n_l)) var_x / n_h
    """
    if abs(rho) > 1.0:
        raise DomainFault(f"correlation must lie in [-1, 1], got {rho}")
    if n_l is None:
        return (1.0 - rho**2) * var_x / n_h
    return (1.0 - rho**2 / (1.0 + n_h / n_l)) * var_x / n_h
