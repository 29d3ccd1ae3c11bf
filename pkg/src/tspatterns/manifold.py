"""Affine-invariant geometry of symmetric positive definite matrices.

All functions operate on plain ndarrays. Matrix arguments may be single
matrices of shape ``(P, P)`` or stacks of shape ``(..., P, P)``; tangent
vectors have shape ``(..., P * (P + 1) / 2)``.
"""

import numpy as np

from .errors import (
    ConvergenceError,
    NotPositiveDefiniteError,
    NumericalError,
    ShapeError,
)

SYMMETRY_RTOL = 1e-10


def _as_square(m, name="matrix"):
    m = np.asarray(m, dtype=np.float64)
    if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
        raise ShapeError(f"{name} must be square, got shape {m.shape}")
    return m


def check_symmetric(m, name="matrix"):
    """Return ``m`` as a float array, raising if it is not symmetric."""
    m = _as_square(m, name)
    scale = np.max(np.abs(m), initial=0.0)
    asym = np.max(np.abs(m - np.swapaxes(m, -1, -2)), initial=0.0)
    if asym > SYMMETRY_RTOL * scale:
        raise ShapeError(
            f"{name} is not symmetric (max asymmetry {asym:.3e}, "
            f"max entry {scale:.3e})")
    return m


def _eigh(m):
    try:
        return np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:
        finite = np.all(np.isfinite(m))
        cond = np.linalg.cond(m) if finite and m.ndim == 2 else np.nan
        raise NumericalError(
            f"eigendecomposition failed (finite={finite}, cond={cond:.3e})"
        ) from exc


def sym_eig(m):
    """Eigendecomposition of a symmetric matrix, eigenvalues descending.

    Parameters
    ----------
    m : ndarray, shape (..., P, P)
        Symmetric matrix or stack of matrices.

    Returns
    -------
    eigenvalues : ndarray, shape (..., P)
        Sorted in descending order.
    eigenvectors : ndarray, shape (..., P, P)
        Orthonormal columns, ``eigenvectors[..., :, j]`` pairs with
        ``eigenvalues[..., j]``.
    """
    m = check_symmetric(m)
    evals, evecs = _eigh(m)
    return evals[..., ::-1], evecs[..., ::-1]


def _apply_fn(m, fn, require_positive=False):
    """``V fn(diag) V^T`` without input validation."""
    evals, evecs = _eigh(m)
    if require_positive and np.any(evals <= 0):
        raise NotPositiveDefiniteError(
            f"matrix is not positive definite (min eigenvalue "
            f"{np.min(evals):.3e})")
    out = (evecs * fn(evals)[..., None, :]) @ np.swapaxes(evecs, -1, -2)
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def check_spd(c, name="matrix"):
    """Validate symmetry and positive definiteness, returning a float array."""
    c = check_symmetric(c, name)
    evals = np.linalg.eigvalsh(c)
    if np.any(evals <= 0):
        raise NotPositiveDefiniteError(
            f"{name} is not positive definite (min eigenvalue "
            f"{np.min(evals):.3e})")
    return c


def spd_power(c, exponent):
    """Real matrix power ``C^exponent`` of an SPD matrix."""
    c = check_symmetric(c)
    return _apply_fn(c, lambda x: x ** exponent, require_positive=True)


def spd_log(c):
    """Principal matrix logarithm of an SPD matrix."""
    c = check_symmetric(c)
    return _apply_fn(c, np.log, require_positive=True)


def spd_exp(m):
    """Matrix exponential of a symmetric matrix (always SPD)."""
    m = check_symmetric(m)
    return _apply_fn(m, np.exp)


def _sqrt_invsqrt(c):
    evals, evecs = _eigh(c)
    if np.any(evals <= 0):
        raise NotPositiveDefiniteError(
            f"matrix is not positive definite (min eigenvalue "
            f"{np.min(evals):.3e})")
    vt = np.swapaxes(evecs, -1, -2)
    root = np.sqrt(evals)[..., None, :]
    sqrt = (evecs * root) @ vt
    isqrt = (evecs / root) @ vt
    return (0.5 * (sqrt + np.swapaxes(sqrt, -1, -2)),
            0.5 * (isqrt + np.swapaxes(isqrt, -1, -2)))


def _upper_coeffs(n):
    rows, cols = np.triu_indices(n)
    return rows, cols, np.where(rows == cols, 1.0, np.sqrt(2.0))


def n_channels_from_length(length):
    """Return P such that ``P * (P + 1) / 2 == length``."""
    n = int(round((np.sqrt(8 * length + 1) - 1) / 2))
    if n < 1 or n * (n + 1) // 2 != length:
        raise ShapeError(f"length {length} is not a triangular number")
    return n


def upper(m):
    """Half-vectorize a symmetric matrix, off-diagonals weighted by sqrt(2).

    The traversal is row-major over the upper triangle, i.e. ``(0, 0),
    (0, 1), ..., (0, P-1), (1, 1), ...``. The weighting makes the Euclidean
    norm of the output equal the Frobenius norm of the input.
    """
    m = check_symmetric(m)
    rows, cols, coeffs = _upper_coeffs(m.shape[-1])
    return coeffs * m[..., rows, cols]


def upper_inv(v):
    """Inverse of :func:`upper`."""
    v = np.asarray(v, dtype=np.float64)
    n = n_channels_from_length(v.shape[-1])
    rows, cols, coeffs = _upper_coeffs(n)
    out = np.zeros(v.shape[:-1] + (n, n))
    vals = v / coeffs
    out[..., rows, cols] = vals
    out[..., cols, rows] = vals
    return out


def tangent_project(c, ref):
    """Tangent space embedding ``upper(log(ref^-1/2 C ref^-1/2))``.

    Parameters
    ----------
    c : ndarray, shape (..., P, P)
        SPD matrices to project.
    ref : ndarray, shape (P, P)
        Reference point, usually the geometric mean of the training set.

    Returns
    -------
    v : ndarray, shape (..., P * (P + 1) / 2)
    """
    c = check_symmetric(c)
    ref = check_symmetric(ref, "reference")
    if c.shape[-1] != ref.shape[-1]:
        raise ShapeError(
            f"dimension mismatch: {c.shape[-1]} vs reference {ref.shape[-1]}")
    _, isqrt = _sqrt_invsqrt(ref)
    whitened = isqrt @ c @ isqrt
    logs = _apply_fn(whitened, np.log, require_positive=True)
    rows, cols, coeffs = _upper_coeffs(ref.shape[-1])
    return coeffs * logs[..., rows, cols]


def tangent_unproject(v, ref):
    """Map tangent vectors back: ``ref^1/2 exp(upper_inv(v)) ref^1/2``."""
    ref = check_symmetric(ref, "reference")
    sym = upper_inv(v)
    if sym.shape[-1] != ref.shape[-1]:
        raise ShapeError(
            f"tangent vector encodes P={sym.shape[-1]}, reference has "
            f"P={ref.shape[-1]}")
    sqrt, _ = _sqrt_invsqrt(ref)
    out = sqrt @ _apply_fn(sym, np.exp) @ sqrt
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def geodesic_distance(a, b):
    """Affine-invariant distance ``||log(a^-1/2 b a^-1/2)||_F``."""
    a = check_symmetric(a)
    b = check_symmetric(b)
    if a.shape[-1] != b.shape[-1]:
        raise ShapeError("dimension mismatch")
    _, isqrt = _sqrt_invsqrt(a)
    w = isqrt @ b @ isqrt
    evals = np.linalg.eigvalsh(0.5 * (w + np.swapaxes(w, -1, -2)))
    if np.any(evals <= 0):
        raise NotPositiveDefiniteError("second argument is not SPD")
    return np.sqrt(np.sum(np.log(evals) ** 2, axis=-1))


def karcher_gradient(covs, mean):
    """Mean of the logs of ``covs`` whitened at ``mean``."""
    _, isqrt = _sqrt_invsqrt(mean)
    return _apply_fn(isqrt @ covs @ isqrt, np.log,
                     require_positive=True).mean(axis=0)


def geometric_mean(covs, tol=1e-7, max_iter=50, init=None):
    """Riemannian (Karcher) mean of a set of SPD matrices.

    Fixed-point iteration ``M <- M^1/2 exp(step * G) M^1/2`` where ``G`` is
    the mean log of the matrices whitened at ``M``. Starts from the
    arithmetic mean. After each accepted step the step size is reset from
    the observed change in ``G`` (capped at 1), and it is halved whenever a
    candidate would increase ``||G||_F``.

    Parameters
    ----------
    covs : ndarray, shape (N, P, P)
        SPD matrices.
    tol : float
        Stop once ``||G||_F <= tol``.
    max_iter : int
        Maximum number of candidate evaluations.
    init : ndarray, shape (P, P), optional
        Starting point instead of the arithmetic mean.

    Returns
    -------
    mean : ndarray, shape (P, P)

    Raises
    ------
    ConvergenceError
        If the gradient norm is still above ``tol`` after ``max_iter`` steps.
    """
    covs = check_symmetric(covs)
    if covs.ndim == 2:
        covs = covs[None]
    if covs.ndim != 3 or covs.shape[0] == 0:
        raise ShapeError("expected a nonempty stack of matrices")
    if covs.shape[0] == 1:
        check_spd(covs[0])
        return covs[0].copy()

    mean = covs.mean(axis=0) if init is None else check_spd(init).copy()
    sqrt, isqrt = _sqrt_invsqrt(mean)
    grad = _apply_fn(isqrt @ covs @ isqrt, np.log,
                     require_positive=True).mean(axis=0)
    norm = np.linalg.norm(grad)
    step = 1.0
    for _ in range(max_iter):
        if norm <= tol:
            return mean
        candidate = sqrt @ _apply_fn(step * grad, np.exp) @ sqrt
        candidate = 0.5 * (candidate + candidate.T)
        c_sqrt, c_isqrt = _sqrt_invsqrt(candidate)
        c_grad = _apply_fn(c_isqrt @ covs @ c_isqrt, np.log,
                           require_positive=True).mean(axis=0)
        c_norm = np.linalg.norm(c_grad)
        if c_norm > norm:
            step *= 0.5
            continue
        # curvature along the step; the Karcher cost has Hessian >= I, so
        # the estimated optimal step never exceeds 1
        curv = np.sum((grad - c_grad) * grad)
        if curv > 0:
            step = min(1.0, step * norm ** 2 / curv)
        mean, sqrt, isqrt, grad, norm = candidate, c_sqrt, c_isqrt, c_grad, c_norm
    if norm <= tol:
        return mean
    raise ConvergenceError(
        f"geometric mean did not converge in {max_iter} iterations "
        f"(gradient norm {norm:.3e} > tol {tol:.1e})",
        gradient_norm=norm, n_iter=max_iter)


def gen_eig(a, b):
    """Generalized symmetric eigenproblem ``a V = b V diag(lambda)``.

    Solved by whitening with ``b^-1/2``. Eigenvalues are returned in
    descending order and the eigenvectors are ``b``-orthonormal,
    ``V^T b V = I``.
    """
    a = check_symmetric(a)
    b = check_symmetric(b)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {a.shape} vs {b.shape}")
    _, isqrt = _sqrt_invsqrt(b)
    w = isqrt @ a @ isqrt
    evals, evecs = _eigh(0.5 * (w + np.swapaxes(w, -1, -2)))
    return evals[..., ::-1], isqrt @ evecs[..., ::-1]
