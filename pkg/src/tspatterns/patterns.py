"""Channel-space patterns from fitted linear models.

For the tangent space pipeline, a weight vector ``b_c`` is turned into a
tangent space pattern ``d_c = C_v b_c / (b_c^T C_v b_c)``, mapped back onto
the manifold at the reference mean ``C_ref`` to give ``C_d``, and the
generalized eigendecomposition of ``(C_d, C_ref)`` separates the sources.
It is computed from the whitened tangent matrix, never forming ``C_d``.
Under a linear mixing model ``C_i = A E_i A^T`` the eigenvectors ``V`` are
the columns of ``A^-T`` (filters) and ``C_ref V`` are the columns of ``A``
(patterns), with eigenvalues ``exp(b_j / ||b||^2)`` for the encoding
sources and 1 elsewhere.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DegenerateInputError, ShapeError
from .manifold import spd_power, sym_eig, upper_inv
from .pipelines import fit_pipeline, transform


@dataclass(frozen=True)
class TangentPattern:
    pattern: np.ndarray
    sigma_yhat_sq: float


@dataclass(frozen=True)
class BandPatterns:
    """Patterns of one frequency band, sorted by relevance.

    ``patterns[:, j]`` is the unit-norm channel-space pattern of rank ``j``
    and ``eigenvalues[j]`` its eigenvalue. ``order[j]`` is the column index
    of that source in the eigensolver's output.
    """

    patterns: np.ndarray
    eigenvalues: np.ndarray
    order: np.ndarray
    filters: np.ndarray = None
    q_hat: int = None
    log_eigenvalues: np.ndarray = None  # tangent space models only

    @property
    def n_components(self):
        return self.eigenvalues.shape[0]


@dataclass(frozen=True)
class PatternSet:
    method: str
    bands: tuple

    def __getitem__(self, band):
        return self.bands[band]

    def __len__(self):
        return len(self.bands)


def haufe_tangent_pattern(weights, feature_cov):
    """Pattern of a linear read-out: ``C_v b / (b^T C_v b)``.

    Parameters
    ----------
    weights : ndarray, shape (D,)
    feature_cov : ndarray, shape (D, D)
        Covariance of the (raw) features the weights apply to.

    Returns
    -------
    TangentPattern
        ``weights @ pattern == 1`` up to rounding.
    """
    b = np.asarray(weights, dtype=np.float64)
    cv = np.asarray(feature_cov, dtype=np.float64)
    if cv.shape != (b.size, b.size):
        raise ShapeError(f"feature covariance must be ({b.size}, {b.size})")
    cvb = cv @ b
    var = float(b @ cvb)
    if not var > 0:
        raise DegenerateInputError(
            f"predicted-target variance b^T C_v b = {var:.3e} is not positive")
    return TangentPattern(pattern=cvb / var, sigma_yhat_sq=var)


def relevance(eigenvalues):
    """``max(lambda, 1/lambda)``, invariant to inverting an eigenvalue."""
    lam = np.asarray(eigenvalues, dtype=np.float64)
    return np.maximum(lam, 1.0 / lam)


def _normalize_columns(a):
    a = a / np.linalg.norm(a, axis=0, keepdims=True)
    rows = np.argmax(np.abs(a), axis=0)
    signs = np.sign(a[rows, np.arange(a.shape[1])])
    signs[signs == 0] = 1.0
    return a * signs


def raw_weights(pipeline):
    """Head weights expressed on un-standardized features."""
    scaler = pipeline.standardizer
    w = pipeline.head.weights / scaler.stds
    w[scaler.constant] = 0.0
    return w


def band_tangent_patterns(pipeline, features):
    """Tangent pattern of every band block; ``features`` are raw features."""
    if pipeline.method != "riemann":
        raise ContractError("tangent patterns need a riemann pipeline")
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != pipeline.n_features:
        raise ShapeError(
            f"expected (N, {pipeline.n_features}) training features")
    if features.shape[0] < 2:
        raise DegenerateInputError("need at least 2 training observations")
    weights = raw_weights(pipeline)
    out = []
    for b in range(len(pipeline.bands)):
        sl = pipeline.band_slice(b)
        block = features[:, sl]
        cv = np.cov(block, rowvar=False, bias=True).reshape(block.shape[1], -1)
        out.append(haufe_tangent_pattern(weights[sl], cv))
    return out


def patterns_from_tangent(d_c, reference, reducer=None):
    """Generalized eigendecomposition of the back-projected pattern.

    With ``S = upper_inv(d_c)`` and ``S = U diag(mu) U^T``, the pair
    ``(C_d, C_ref)`` has eigenvalues ``exp(mu)``, filters ``C_ref^-1/2 U``
    and patterns ``C_ref^1/2 U``. Working with ``mu`` avoids overflowing
    ``exp`` for weak models, whose tangent patterns are very long.

    Returns
    -------
    patterns : ndarray, shape (P, K)
        Unit-norm, sign-fixed channel-space patterns sorted by relevance.
    log_eigenvalues : ndarray, shape (K,)
    order : ndarray, shape (K,)
    filters : ndarray, shape (K, K)
        Reference-orthonormal eigenvectors in the same order.
    """
    log_evals, u = sym_eig(upper_inv(d_c))
    if u.shape[0] != reference.shape[0]:
        raise ShapeError("tangent pattern and reference dimensions differ")
    reduced = spd_power(reference, 0.5) @ u
    filters = spd_power(reference, -0.5) @ u
    chan = reduced if reducer is None else reducer.filters @ reduced
    order = np.argsort(-np.abs(log_evals), kind="stable")
    return (_normalize_columns(chan[:, order]), log_evals[order], order,
            filters[:, order])


def extract_patterns(pipeline, training):
    """Channel-space patterns and eigenvalues of a fitted riemann pipeline.

    Parameters
    ----------
    pipeline : FittedPipeline
        ``method == "riemann"``.
    training : CovarianceDataset or ndarray
        The data the pipeline was fitted on; the feature covariance ``C_v``
        is estimated from its raw tangent vectors.

    Returns
    -------
    PatternSet
        One entry per band.
    """
    if pipeline.method != "riemann":
        raise ContractError(
            f"extract_patterns needs a riemann pipeline, got {pipeline.method!r}")
    if training is None:
        raise ContractError("training features are required to form C_v")
    feats = transform(pipeline, training)
    tangent = band_tangent_patterns(pipeline, feats)
    bands = []
    for model, tp in zip(pipeline.bands, tangent):
        pats, log_evals, order, filt = patterns_from_tangent(
            tp.pattern, model.reference, model.reducer)
        with np.errstate(over="ignore"):
            evals = np.exp(log_evals)
        bands.append(BandPatterns(patterns=pats, eigenvalues=evals,
                                  order=order, filters=filt,
                                  log_eigenvalues=log_evals))
    return PatternSet(method="riemann", bands=tuple(bands))


def predict_eigenvalues(weights, n_sources, n_total):
    """Eigenvalues implied by true weights: ``exp(b_j/||b||^2)`` then ones."""
    b = np.asarray(weights, dtype=np.float64)
    if b.size != n_sources or n_sources > n_total:
        raise ShapeError("need len(weights) == n_sources <= n_total")
    norm2 = b @ b
    if not norm2 > 0:
        raise ContractError("weights must not all be zero")
    lam = np.ones(n_total)
    lam[:n_sources] = np.exp(b / norm2)
    return lam


def component_patterns(pipeline, training=None):
    """Patterns of SPoC/CSP filters: ``C W (W^T C W)^-1``.

    ``C`` is the arithmetic mean training covariance; it is recomputed from
    ``training`` when given, otherwise the value stored at fit time is used.
    """
    if pipeline.method not in ("spoc", "csp"):
        raise ContractError(
            f"component patterns need a spoc/csp pipeline, got {pipeline.method!r}")
    covs = None
    if training is not None:
        covs = training.covs if hasattr(training, "covs") else np.asarray(training)
        if covs.ndim == 3:
            covs = covs[:, None]
    bands = []
    for b, model in enumerate(pipeline.bands):
        c_mean = model.reference if covs is None else covs[:, b].mean(axis=0)
        w = model.filters
        inner = w.T @ c_mean @ w
        try:
            a = np.linalg.solve(inner, (c_mean @ w).T).T
        except np.linalg.LinAlgError as exc:
            raise ContractError("filter covariance W^T C W is singular") from exc
        if np.linalg.matrix_rank(inner) < inner.shape[0]:
            raise ContractError("filter covariance W^T C W is singular")
        k = w.shape[1]
        bands.append(BandPatterns(patterns=_normalize_columns(a),
                                  eigenvalues=model.eigenvalues.copy(),
                                  order=np.arange(k), filters=w))
    return PatternSet(method=pipeline.method, bands=tuple(bands))


def pipeline_patterns(pipeline, training):
    """:func:`extract_patterns` or :func:`component_patterns` by method."""
    if pipeline.method == "riemann":
        return extract_patterns(pipeline, training)
    return component_patterns(pipeline, training)


def pattern_distance(a, a_hat):
    """``1 - |a_hat^T a| / (||a_hat|| ||a||)``: 0 iff collinear."""
    a = np.asarray(a, dtype=np.float64).ravel()
    a_hat = np.asarray(a_hat, dtype=np.float64).ravel()
    if a.shape != a_hat.shape:
        raise ShapeError("patterns must have the same length")
    na, nh = np.linalg.norm(a), np.linalg.norm(a_hat)
    if na == 0 or nh == 0:
        raise ContractError("pattern distance is undefined for zero vectors")
    cos = abs(a_hat @ a) / (nh * na)
    return float(max(0.0, 1.0 - min(cos, 1.0)))


# --- significance -----------------------------------------------------------

def source_strength(method, eigenvalues, log_eigenvalues=None):
    """Scale-free coupling strength of every source, in [0, 1].

    For tangent space models the log-eigenvalues are ``b_j / ||b||^2``
    which scale as ``1 / ||b||`` and blow up for weak models, so each source
    is scored by its share ``|log lambda_j| / ||log lambda||``. SPoC uses
    ``|lambda_j| / ||lambda||`` and CSP ``|logit lambda_j|`` shares.
    """
    lam = np.asarray(eigenvalues, dtype=np.float64)
    if method == "riemann":
        s = np.abs(np.log(lam) if log_eigenvalues is None
                   else np.asarray(log_eigenvalues, dtype=np.float64))
    elif method == "spoc":
        s = np.abs(lam)
    elif method == "csp":
        lam = np.clip(lam, 1e-300, 1 - 1e-16)
        s = np.abs(np.log(lam / (1.0 - lam)))
    else:
        raise ContractError(f"no eigenvalue criterion for method {method!r}")
    norm = np.linalg.norm(s)
    return s / norm if norm > 0 else s


def _band_strength(method, band):
    return source_strength(method, band.eigenvalues, band.log_eigenvalues)


@dataclass(frozen=True)
class ShuffleResult:
    q_hat: tuple  # per band
    strengths: tuple  # per band, sorted, of the original model
    null_maxima: np.ndarray  # (n_shuffles, n_bands)
    thresholds: np.ndarray  # (n_bands,)


def estimate_num_sources(pipeline, ds, n_shuffles=50, percentile=95.0, seed=0,
                         reuse_alpha=False):
    """Count sources whose coupling beats a target-permutation null.

    For each shuffle the targets are permuted, the whole pipeline is refit
    with the original hyperparameters, including the regularization search
    (or the original model's alpha when ``reuse_alpha``), and the largest
    :func:`source_strength` is recorded. A full refit keeps the original and
    shuffled fits exchangeable under the null.
    A band's ``q_hat`` is the number of its sources, taken in decreasing
    strength, whose strength exceeds the ``percentile`` of those maxima.

    Returns
    -------
    ShuffleResult
    """
    if n_shuffles < 1:
        raise ContractError("n_shuffles must be >= 1")
    if pipeline.method not in ("riemann", "spoc", "csp"):
        raise ContractError(f"no eigenvalues for method {pipeline.method!r}")
    original = pipeline_patterns(pipeline, ds)
    strengths = [_band_strength(pipeline.method, band) for band in original]
    rng = np.random.default_rng(seed)
    alpha = pipeline.head.alpha if reuse_alpha else None
    maxima = np.empty((n_shuffles, len(original)))
    for i in range(n_shuffles):
        perm = rng.permutation(ds.n_obs)
        shuffled = ds.with_targets(ds.targets[perm])
        try:
            refit = fit_pipeline(shuffled, pipeline.method,
                                 n_components=pipeline.n_components,
                                 head_kind=pipeline.head_kind, alpha=alpha)
            null = pipeline_patterns(refit, shuffled)
        except Exception as exc:
            raise type(exc)(f"shuffle {i}: {exc}") from exc
        for b, band in enumerate(null):
            maxima[i, b] = np.max(_band_strength(pipeline.method, band))
    thresholds = np.percentile(maxima, percentile, axis=0)
    q_hat = []
    for s, thr in zip(strengths, thresholds):
        ranked = np.sort(s)[::-1]
        below = np.flatnonzero(ranked <= thr)
        q_hat.append(int(below[0]) if below.size else int(ranked.size))
    return ShuffleResult(q_hat=tuple(q_hat), strengths=tuple(strengths),
                         null_maxima=maxima, thresholds=thresholds)
