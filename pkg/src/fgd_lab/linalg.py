"""Dense symmetric linear algebra on small covariance-sized matrices.

All routines operate on plain float64 numpy arrays. Inputs that are meant
to be symmetric must be exactly symmetric (entry-for-entry); boundaries
enforce this with `check_symmetric`.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NotPositiveDefinite

# A pivot at or below this fraction of the largest diagonal entry marks the
# matrix as numerically indefinite.
_PIVOT_RTOL = 1e-14


def check_symmetric(m) -> np.ndarray:
    """Return m as a float64 array, requiring exact square symmetry."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
    if m.shape[0] < 1:
        raise DimensionMismatch("matrix dimension must be at least 1")
    if not np.array_equal(m, m.T):
        raise ValueError("matrix is not exactly symmetric")
    return m


def check_vector(v, dim: int) -> np.ndarray:
    """Return v as a float64 vector of the given length."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (dim,):
        raise DimensionMismatch(f"expected a vector of length {dim}, got shape {v.shape}")
    return v


@dataclass(frozen=True)
class SpectralSummary:
    """Extreme eigenvalues and condition number of an SPD matrix."""

    lambda_min: float
    lambda_max: float
    condition_number: float


def cholesky(m) -> np.ndarray:
    """Lower-triangular factor L with L @ L.T == m.

    Column-by-column factorization so every pivot is inspected directly;
    raises NotPositiveDefinite as soon as a pivot falls at or below
    1e-14 times the largest diagonal entry of m.
    """
    m = check_symmetric(m)
    d = m.shape[0]
    threshold = _PIVOT_RTOL * float(np.max(np.diag(m)))
    lower = np.zeros((d, d))
    for j in range(d):
        pivot = m[j, j] - lower[j, :j] @ lower[j, :j]
        if pivot <= threshold:
            raise NotPositiveDefinite(
                f"pivot {pivot:.6e} in column {j} at or below threshold {threshold:.6e}"
            )
        lower[j, j] = np.sqrt(pivot)
        if j + 1 < d:
            lower[j + 1 :, j] = (m[j + 1 :, j] - lower[j + 1 :, :j] @ lower[j, :j]) / lower[j, j]
    return lower


def spectral_summary(m) -> SpectralSummary:
    """Smallest/largest eigenvalue and condition number of an SPD matrix.

    Diagonal input short-circuits to the exact min/max of the diagonal.
    Raises NotPositiveDefinite when the smallest eigenvalue is not positive.
    """
    m = check_symmetric(m)
    diag = np.diag(m)
    if np.count_nonzero(m - np.diag(diag)) == 0:
        lo, hi = float(np.min(diag)), float(np.max(diag))
    else:
        eigenvalues = np.linalg.eigvalsh(m)
        lo, hi = float(eigenvalues[0]), float(eigenvalues[-1])
    if lo <= 0.0:
        raise NotPositiveDefinite(f"smallest eigenvalue {lo:.6e} is not positive")
    return SpectralSummary(lambda_min=lo, lambda_max=hi, condition_number=hi / lo)


def quad_form(v, m) -> float:
    """The quadratic form v.T @ m @ v."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
    v = check_vector(v, m.shape[0])
    return float(v @ m @ v)


def trace_product(a, b) -> float:
    """tr(a @ b), i.e. sum over i, j of a[i, j] * b[j, i], without forming a @ b."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected equal square shapes, got {a.shape} and {b.shape}")
    return float(np.einsum("ij,ji->", a, b))
