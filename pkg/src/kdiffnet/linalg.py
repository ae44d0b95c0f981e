"""Core dense linear algebra: covariance estimation, the diagonal-loading
soft-threshold operator, checked inversion, and the difference-of-inverses
map that seeds every estimator in this package.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError
from scipy.linalg import lapack

DEFAULT_COND_LIMIT = 1e12

#: Default search grid for the thresholding level: 0.001, 0.002, ..., 1.0.
DEFAULT_V_GRID = tuple(round(0.001 * i, 3) for i in range(1, 1001))


class InvertibilityError(ValueError):
    """Matrix could not be inverted reliably.

    Carries the estimated condition number (``cond``, may be inf when the
    factorization itself failed) and a ``label`` naming the offending input.
    Raising this signals that the thresholding level must be increased.
    """

    def __init__(self, message, cond=float("inf"), label=""):
        super().__init__(message)
        self.cond = cond
        self.label = label


class ThresholdSelectionError(ValueError):
    """No thresholding level in the grid made both matrices invertible."""


def validate_samples(x):
    """Validate an n-by-p sample block and return it as a float array.

    Parameters
    ----------
    x : array-like, shape (n, p)
        Observations in rows, variables in columns.

    Returns
    -------
    ndarray
        The validated data as a 2D float64 array.

    Raises
    ------
    ValueError
        If the array is not 2D, has fewer than two rows, or contains
        non-finite entries.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValueError(f"sample block must be 2D, got shape {x.shape}")
    if x.shape[0] < 2:
        raise ValueError(f"need at least 2 observations, got {x.shape[0]}")
    if not np.all(np.isfinite(x)):
        raise ValueError("sample block contains non-finite entries")
    return x


def validate_covariance(a, name="matrix", rtol=1e-12):
    """Check that ``a`` is a square symmetric matrix with nonnegative diagonal.

    Symmetry is required up to relative tolerance ``rtol`` (scaled by the
    largest absolute entry). Returns the array as float64.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    scale = max(np.abs(a).max(), 1.0)
    if np.abs(a - a.T).max() > rtol * scale:
        raise ValueError(f"{name} is not symmetric within {rtol:g} relative tolerance")
    if np.any(np.diag(a) < 0):
        raise ValueError(f"{name} has negative diagonal entries")
    return a


@dataclass(frozen=True)
class BackwardMap:
    """Difference of thresholded-covariance inverses, plus the level used.

    Attributes
    ----------
    values : ndarray, shape (p, p)
        The symmetric matrix ``inv(T_v(sigma_d)) - inv(T_v(sigma_c))``.
    v_used : float
        Thresholding level that was actually applied.
    """

    values: np.ndarray
    v_used: float

    @property
    def p(self):
        return self.values.shape[0]


def sample_covariance(x, centered=True):
    """Empirical covariance ``X^T X / n`` with optional mean-centering.

    Normalizes by ``n`` (not ``n - 1``); simulated data are drawn from
    zero-mean Gaussians, and the invertibility guarantees downstream are
    stated for the ``1/n`` convention.

    Parameters
    ----------
    x : array-like, shape (n, p)
        Sample block.
    centered : bool, optional
        When True (default), column means are removed first. Required for
        data that is not already zero-mean.

    Returns
    -------
    ndarray, shape (p, p)
        Symmetric covariance estimate.
    """
    x = validate_samples(x)
    n = x.shape[0]
    if centered:
        x = x - x.mean(axis=0)
    cov = x.T @ x / n
    # exact symmetry regardless of BLAS reassociation
    return (cov + cov.T) / 2


def soft_threshold_matrix(a, v):
    """Add ``v`` to the diagonal and soft-threshold off-diagonals at ``v``.

    Off-diagonal entries map to ``sign(a_ij) * max(|a_ij| - v, 0)``; diagonal
    entries grow by exactly ``v``. Symmetry is preserved.

    Parameters
    ----------
    a : array-like, shape (p, p)
        Symmetric input matrix.
    v : float
        Nonnegative thresholding level.

    Returns
    -------
    ndarray, shape (p, p)
    """
    a = validate_covariance(a, name="input to soft_threshold_matrix")
    if v < 0:
        raise ValueError(f"thresholding level must be nonnegative, got {v}")
    out = np.sign(a) * np.maximum(np.abs(a) - v, 0.0)
    np.fill_diagonal(out, np.diag(a) + v)
    return out


def invert_checked(a, cond_limit=DEFAULT_COND_LIMIT, label="matrix"):
    """Invert a symmetric positive definite matrix with safety checks.

    Uses a Cholesky factorization, estimates the 1-norm condition number
    from the factor, and verifies the max-norm residual ``|A A^-1 - I|``
    against ``1e-8 * p``.

    Parameters
    ----------
    a : array-like, shape (p, p)
        Symmetric matrix to invert.
    cond_limit : float, optional
        Maximum admissible condition number estimate.
    label : str, optional
        Name used in error messages (e.g. which covariance failed).

    Returns
    -------
    ndarray, shape (p, p)
        The inverse, symmetrized.

    Raises
    ------
    InvertibilityError
        If the factorization fails, the condition estimate exceeds
        ``cond_limit``, or the inversion residual is too large.
    """
    a = validate_covariance(a, name=label)
    if cond_limit <= 0:
        raise ValueError("cond_limit must be positive")
    p = a.shape[0]
    anorm = np.abs(a).sum(axis=0).max()  # induced 1-norm
    try:
        c, low = cho_factor(a, lower=True)
    except LinAlgError as exc:
        raise InvertibilityError(
            f"{label}: not positive definite, Cholesky failed ({exc}); increase v",
            cond=float("inf"),
            label=label,
        ) from None
    rcond, info = lapack.dpocon(c, anorm, uplo="L")
    if info != 0:  # pragma: no cover - LAPACK argument error
        raise InvertibilityError(f"{label}: condition estimate failed (info={info})", label=label)
    cond = 1.0 / rcond if rcond > 0 else float("inf")
    if cond > cond_limit:
        raise InvertibilityError(
            f"{label}: condition estimate {cond:.3e} exceeds limit {cond_limit:.3e}; increase v",
            cond=cond,
            label=label,
        )
    inv = cho_solve((c, low), np.eye(p))
    inv = (inv + inv.T) / 2
    residual = np.abs(a @ inv - np.eye(p)).max()
    if residual > 1e-8 * p:
        raise InvertibilityError(
            f"{label}: inversion residual {residual:.3e} exceeds {1e-8 * p:.3e}; increase v",
            cond=cond,
            label=label,
        )
    return inv


def proxy_backward_mapping(sigma_c, sigma_d, v, cond_limit=DEFAULT_COND_LIMIT):
    """Difference of inverses of the two thresholded covariance matrices.

    Computes ``inv(T_v(sigma_d)) - inv(T_v(sigma_c))``, the well-defined
    high-dimensional substitute for ``inv(sigma_d) - inv(sigma_c)``.

    Parameters
    ----------
    sigma_c, sigma_d : array-like, shape (p, p)
        Covariance estimates for the two conditions.
    v : float
        Nonnegative thresholding level; with ``v = 0`` and well-conditioned
        inputs this reduces to the plain difference of inverses.
    cond_limit : float, optional
        Condition-number cap passed to :func:`invert_checked`.

    Returns
    -------
    BackwardMap
    """
    sigma_c = validate_covariance(sigma_c, name="sigma_c")
    sigma_d = validate_covariance(sigma_d, name="sigma_d")
    if sigma_c.shape != sigma_d.shape:
        raise ValueError(
            f"covariance shapes differ: {sigma_c.shape} vs {sigma_d.shape}"
        )
    inv_d = invert_checked(soft_threshold_matrix(sigma_d, v), cond_limit, label="T_v(sigma_d)")
    inv_c = invert_checked(soft_threshold_matrix(sigma_c, v), cond_limit, label="T_v(sigma_c)")
    values = inv_d - inv_c
    values = (values + values.T) / 2
    return BackwardMap(values=values, v_used=float(v))


def select_v(sigma_c, sigma_d, grid=None, cond_limit=DEFAULT_COND_LIMIT):
    """Smallest grid value making both thresholded covariances invertible.

    Scans the ascending grid and returns the first level ``v`` for which
    ``T_v(sigma_c)`` and ``T_v(sigma_d)`` both pass :func:`invert_checked`.
    Deterministic: the cheapest perturbation of the covariances wins.

    Parameters
    ----------
    sigma_c, sigma_d : array-like, shape (p, p)
        Covariance estimates.
    grid : sequence of float, optional
        Ascending nonnegative candidate levels. Defaults to
        ``0.001, 0.002, ..., 1.0``.
    cond_limit : float, optional
        Condition-number cap.

    Returns
    -------
    float

    Raises
    ------
    ThresholdSelectionError
        If the grid is empty or no level succeeds.
    """
    sigma_c = validate_covariance(sigma_c, name="sigma_c")
    sigma_d = validate_covariance(sigma_d, name="sigma_d")
    if grid is None:
        grid = DEFAULT_V_GRID
    grid = [float(v) for v in grid]
    if not grid:
        raise ThresholdSelectionError("thresholding-level grid is empty")
    if any(v < 0 for v in grid):
        raise ValueError("grid values must be nonnegative")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("grid must be ascending")
    for v in grid:
        try:
            invert_checked(soft_threshold_matrix(sigma_c, v), cond_limit, label="T_v(sigma_c)")
            invert_checked(soft_threshold_matrix(sigma_d, v), cond_limit, label="T_v(sigma_d)")
        except InvertibilityError:
            continue
        return v
    raise ThresholdSelectionError(
        f"no grid value up to {grid[-1]} made both thresholded covariances invertible"
    )
