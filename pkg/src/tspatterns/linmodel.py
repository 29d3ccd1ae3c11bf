"""Z-scoring and regularized linear heads (ridge + GCV, L2 logistic + CV)."""

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, ConvergenceError, DegenerateInputError, ShapeError

STD_FLOOR = 1e-12


def regularization_grid(n=25, low=1e-5, high=1e3):
    """Log-spaced candidate regularization strengths."""
    return np.logspace(np.log10(low), np.log10(high), n)


DEFAULT_GRID = regularization_grid()


def _check_grid(grid):
    grid = np.asarray(DEFAULT_GRID if grid is None else grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size == 0:
        raise ContractError("regularization grid must be a nonempty 1-D array")
    if np.any(grid <= 0) or not np.all(np.isfinite(grid)):
        raise ContractError("regularization values must be finite and > 0")
    if np.any(np.diff(grid) <= 0):
        raise ContractError("regularization grid must be strictly increasing")
    return grid


def _check_xy(features, targets):
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(targets)
    if x.ndim != 2:
        raise ShapeError(f"features must be (N, D), got {x.shape}")
    if y.shape != (x.shape[0],):
        raise ShapeError(f"targets must have shape ({x.shape[0]},), got {y.shape}")
    if not np.all(np.isfinite(x)):
        raise ContractError("features contain non-finite values")
    return x, y


@dataclass(frozen=True)
class Standardizer:
    """Column means and (floored) population standard deviations."""

    means: np.ndarray
    stds: np.ndarray

    @property
    def dim(self):
        return self.means.shape[0]

    @property
    def constant(self):
        return self.stds <= STD_FLOOR

    def transform(self, features):
        x = np.asarray(features, dtype=np.float64)
        if x.shape[-1] != self.dim:
            raise ShapeError(f"expected {self.dim} features, got {x.shape[-1]}")
        z = (x - self.means) / self.stds
        z[..., self.constant] = 0.0
        return z


def fit_standardizer(features):
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError(f"features must be (N, D), got {x.shape}")
    if x.shape[0] < 2:
        raise DegenerateInputError("need at least 2 observations to z-score")
    return Standardizer(means=x.mean(axis=0),
                        stds=np.maximum(x.std(axis=0), STD_FLOOR))


@dataclass(frozen=True)
class LinearHead:
    """Fitted linear model ``y_hat = w^T v + bias``.

    For ``kind == "logistic"`` the score is a log-odds for ``classes[1]``.
    """

    weights: np.ndarray
    bias: float
    kind: str
    alpha: float
    classes: tuple = ()
    scores: np.ndarray = field(default=None, repr=False)  # per-grid criterion

    def decision_function(self, features):
        x = np.asarray(features, dtype=np.float64)
        if x.shape[-1] != self.weights.shape[0]:
            raise ShapeError(
                f"expected {self.weights.shape[0]} features, got {x.shape[-1]}")
        return x @ self.weights + self.bias


def sigmoid(x):
    return np.exp(-np.logaddexp(0.0, -x))


def predict(head, features):
    """Real-valued predictions (ridge) or hard labels (logistic)."""
    score = head.decision_function(features)
    if head.kind == "ridge":
        return score
    classes = np.asarray(head.classes)
    return classes[(sigmoid(score) > 0.5).astype(int)]


def predict_proba(head, features):
    """Probability of ``head.classes[1]``."""
    if head.kind != "logistic":
        raise ContractError("probabilities are only defined for logistic heads")
    return sigmoid(head.decision_function(features))


# --- ridge ------------------------------------------------------------------

def ridge_gcv_path(features, targets, grid=None):
    """GCV score and centered-problem solution for every grid value.

    The bias is left unpenalized by centering ``features`` and ``targets``;
    ``tr(H)`` is the trace of the centered hat matrix
    ``Xc (Xc^T Xc + alpha I)^-1 Xc^T``.

    Returns
    -------
    scores : ndarray, shape (n_alphas,)
    coefs : ndarray, shape (n_alphas, D)
    """
    x, y = _check_xy(features, targets)
    y = y.astype(np.float64)
    grid = _check_grid(grid)
    n = x.shape[0]
    if n < 2:
        raise DegenerateInputError("ridge needs at least 2 observations")
    xc = x - x.mean(axis=0)
    yc = y - y.mean()
    u, s, vt = np.linalg.svd(xc, full_matrices=False)
    uty = u.T @ yc
    s2 = s ** 2
    scores = np.empty(grid.size)
    coefs = np.empty((grid.size, x.shape[1]))
    for i, alpha in enumerate(grid):
        shrink = s2 / (s2 + alpha)
        resid = yc - u @ (shrink * uty)
        dof = 1.0 - shrink.sum() / n
        rss = resid @ resid / n
        scores[i] = rss / dof ** 2 if dof > 0 else np.inf
        coefs[i] = vt.T @ (s / (s2 + alpha) * uty)
    return scores, coefs


def fit_ridge_gcv(features, targets, grid=None):
    """Ridge regression with the regularization picked by GCV.

    Parameters
    ----------
    features : ndarray, shape (N, D)
    targets : ndarray, shape (N,)
    grid : ndarray, optional
        Candidate ``alpha`` values; defaults to 25 log-spaced values
        in [1e-5, 1e3].

    Returns
    -------
    LinearHead
        ``kind="ridge"``. Ties in the GCV score go to the smaller alpha.
    """
    x, y = _check_xy(features, targets)
    grid = _check_grid(grid)
    scores, coefs = ridge_gcv_path(x, y, grid)
    best = int(np.argmin(scores))
    return _ridge_head(x, y, coefs[best], grid[best], scores)


def fit_ridge(features, targets, alpha):
    """Ridge regression at a fixed ``alpha`` (no model selection)."""
    x, y = _check_xy(features, targets)
    scores, coefs = ridge_gcv_path(x, y, [alpha])
    return _ridge_head(x, y, coefs[0], float(alpha), scores)


def _ridge_head(x, y, coef, alpha, scores):
    bias = float(np.mean(y) - x.mean(axis=0) @ coef)
    return LinearHead(weights=coef, bias=bias, kind="ridge",
                      alpha=float(alpha), scores=scores)


# --- logistic ---------------------------------------------------------------

NEWTON_TOL = 1e-8
NEWTON_MAX_ITER = 100
# accepted gradient norm once the loss no longer changes in floating point
STALL_FACTOR = 1e2


def logistic_loss(weights, bias, features, t, alpha):
    """Penalized negative log-likelihood, ``t`` in {0, 1}."""
    eta = features @ weights + bias
    return (np.sum(np.logaddexp(0.0, eta) - t * eta)
            + 0.5 * alpha * weights @ weights)


def logistic_gradient(weights, bias, features, t, alpha):
    """Gradient of :func:`logistic_loss` w.r.t. ``(weights, bias)``."""
    r = sigmoid(features @ weights + bias) - t
    return np.append(features.T @ r + alpha * weights, r.sum())


def _newton_logistic(x, t, alpha, tol=NEWTON_TOL, max_iter=NEWTON_MAX_ITER,
                     trace=None):
    n, d = x.shape
    xa = np.hstack([x, np.ones((n, 1))])
    penalty = np.full(d + 1, alpha)
    penalty[-1] = 0.0
    theta = np.zeros(d + 1)
    theta[-1] = np.log(t.mean() / (1.0 - t.mean()))

    def loss(th):
        eta = xa @ th
        return (np.sum(np.logaddexp(0.0, eta) - t * eta)
                + 0.5 * alpha * th[:-1] @ th[:-1])

    current = loss(theta)
    if trace is not None:
        trace.append(current)
    for it in range(max_iter):
        p = sigmoid(xa @ theta)
        grad = xa.T @ (p - t) + penalty * theta
        gnorm = np.linalg.norm(grad)
        if gnorm <= tol:
            return theta[:-1].copy(), float(theta[-1]), it
        hess = (xa.T * (p * (1.0 - p))) @ xa + np.diag(penalty)
        try:
            direction = -np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            direction = -np.linalg.lstsq(hess, grad, rcond=None)[0]
        slope = grad @ direction
        step = 1.0
        for _ in range(60):
            trial = theta + step * direction
            trial_loss = loss(trial)
            if trial_loss <= current + 1e-4 * step * slope:
                break
            step *= 0.5
        else:
            # no decrease representable in floating point
            if gnorm <= STALL_FACTOR * tol:
                return theta[:-1].copy(), float(theta[-1]), it
            raise ConvergenceError(
                f"logistic line search failed (gradient norm {gnorm:.3e})",
                gradient_norm=gnorm, n_iter=it)
        stalled = current - trial_loss <= 1e-15 * abs(current)
        theta, current = trial, trial_loss
        if trace is not None:
            trace.append(current)
        if stalled and gnorm <= STALL_FACTOR * tol:
            return theta[:-1].copy(), float(theta[-1]), it + 1
    p = sigmoid(xa @ theta)
    gnorm = np.linalg.norm(xa.T @ (p - t) + penalty * theta)
    if gnorm <= STALL_FACTOR * tol:
        return theta[:-1].copy(), float(theta[-1]), max_iter
    raise ConvergenceError(
        f"Newton did not converge in {max_iter} iterations "
        f"(gradient norm {gnorm:.3e})", gradient_norm=gnorm, n_iter=max_iter)


def _binary_targets(labels):
    classes = np.unique(labels)
    if classes.size != 2:
        raise ContractError(
            f"logistic regression needs exactly two classes, got {classes.size}")
    return classes, (labels == classes[1]).astype(np.float64)


def stratified_folds(t, n_folds, seed=0):
    """Fold index per observation, classes spread round-robin after shuffling."""
    rng = np.random.default_rng(seed)
    folds = np.empty(t.shape[0], dtype=int)
    for value in np.unique(t):
        idx = np.flatnonzero(t == value)
        idx = idx[rng.permutation(idx.size)]
        folds[idx] = np.arange(idx.size) % n_folds
    return folds


def _balanced_accuracy(t, pred):
    return np.mean([np.mean(pred[t == c] == c) for c in np.unique(t)])


def fit_logistic(features, labels, alpha):
    """L2-penalized logistic regression at a fixed ``alpha``."""
    x, labels = _check_xy(features, labels)
    classes, t = _binary_targets(labels)
    w, b, _ = _newton_logistic(x, t, alpha)
    return LinearHead(weights=w, bias=b, kind="logistic", alpha=float(alpha),
                      classes=tuple(classes.tolist()))


def fit_logistic_l2(features, labels, grid=None, n_folds=5, seed=0):
    """L2 logistic regression, alpha chosen by stratified inner CV.

    Every grid value is scored by mean balanced accuracy over ``n_folds``
    stratified folds (fewer if the minority class is smaller); ties go to the
    larger alpha. The returned head is refit on all data.
    """
    x, labels = _check_xy(features, labels)
    grid = _check_grid(grid)
    classes, t = _binary_targets(labels)
    folds_used = min(n_folds, int(min(np.sum(t == 0), np.sum(t == 1))))
    scores = np.zeros(grid.size)
    if folds_used >= 2:
        folds = stratified_folds(t, folds_used, seed)
        for f in range(folds_used):
            train, test = folds != f, folds == f
            if np.unique(t[train]).size < 2:
                continue
            for i, alpha in enumerate(grid):
                w, b, _ = _newton_logistic(x[train], t[train], alpha)
                pred = (x[test] @ w + b > 0).astype(np.float64)
                scores[i] += _balanced_accuracy(t[test], pred) / folds_used
    # last index attaining the maximum -> largest alpha among ties
    best = grid.size - 1 - int(np.argmax(scores[::-1]))
    w, b, _ = _newton_logistic(x, t, grid[best])
    return LinearHead(weights=w, bias=b, kind="logistic", alpha=float(grid[best]),
                      classes=tuple(classes.tolist()), scores=scores)
