"""Covariance features: sample covariance, OAS shrinkage, PCA reduction."""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, ShapeError
from .manifold import check_symmetric, sym_eig


def sample_covariance(x):
    """``X X^T / T`` for zero-mean windows.

    Parameters
    ----------
    x : ndarray, shape (..., P, T)
        Multichannel windows. No centering is applied.

    Returns
    -------
    cov : ndarray, shape (..., P, P)
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim < 2:
        raise ShapeError(f"expected (..., P, T) windows, got {x.shape}")
    n_times = x.shape[-1]
    if n_times == 0:
        raise DegenerateInputError("window has no samples (T = 0)")
    if not np.all(np.isfinite(x)):
        raise ShapeError("window contains non-finite values")
    cov = x @ np.swapaxes(x, -1, -2) / n_times
    return 0.5 * (cov + np.swapaxes(cov, -1, -2))


def oas_coefficient(c, n_samples):
    """OAS shrinkage intensity of Chen et al. (2010), clipped to [0, 1]."""
    c = check_symmetric(c)
    if n_samples < 1:
        raise ShapeError("n_samples must be >= 1")
    p = c.shape[-1]
    tr = np.trace(c)
    tr2 = np.sum(c * c)  # tr(C^2) for symmetric C
    if tr <= 0:
        raise DegenerateInputError("covariance has zero trace")
    num = (1.0 - 2.0 / p) * tr2 + tr ** 2
    den = (n_samples + 1.0 - 2.0 / p) * (tr2 - tr ** 2 / p)
    if den <= 0:
        # C is already a multiple of the identity
        return 1.0
    return float(np.clip(num / den, 0.0, 1.0))


def oas_shrinkage(c, n_samples):
    """Shrink ``c`` toward ``tr(c)/P * I`` with the OAS intensity.

    Parameters
    ----------
    c : ndarray, shape (P, P)
        Positive semidefinite sample covariance.
    n_samples : int
        Number of samples the covariance was estimated from.

    Returns
    -------
    shrunk : ndarray, shape (P, P)
        ``(1 - rho) c + rho mu I`` with ``mu = tr(c) / P``.
    """
    c = check_symmetric(c)
    rho = oas_coefficient(c, n_samples)
    mu = np.trace(c) / c.shape[-1]
    return (1.0 - rho) * c + rho * mu * np.eye(c.shape[-1])


@dataclass(frozen=True)
class SpatialReducer:
    """Orthonormal projection from P channels to K components."""

    filters: np.ndarray  # (P, K), orthonormal columns

    @property
    def input_dim(self):
        return self.filters.shape[0]

    @property
    def output_dim(self):
        return self.filters.shape[1]


def pca_reducer(covs, k):
    """Top-``k`` principal axes of the arithmetic mean of ``covs``.

    Eigenvalue ties at the cut are resolved by the descending order the
    eigensolver returns, so only the spanned subspace is stable under ties.
    """
    covs = check_symmetric(covs)
    if covs.ndim == 2:
        covs = covs[None]
    p = covs.shape[-1]
    if not 1 <= k <= p:
        raise ShapeError(f"k must be in [1, {p}], got {k}")
    _, evecs = sym_eig(covs.mean(axis=0))
    return SpatialReducer(filters=np.ascontiguousarray(evecs[:, :k]))


def apply_reducer(c, reducer):
    """``W^T C W`` for a single matrix or a stack."""
    c = np.asarray(c, dtype=np.float64)
    w = reducer.filters
    if c.shape[-1] != w.shape[0] or c.shape[-2] != w.shape[0]:
        raise ShapeError(
            f"reducer expects P={w.shape[0]}, got matrices {c.shape[-2:]}")
    out = w.T @ c @ w
    return 0.5 * (out + np.swapaxes(out, -1, -2))
