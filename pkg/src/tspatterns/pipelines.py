"""End-to-end decoding pipelines on covariance datasets.

Four methods share the same tail (z-scoring + linear head) and differ in
how each band's covariance matrices become features:

``riemann``
    optional PCA reduction, geometric mean, tangent space embedding.
``spoc``
    supervised spatial filters from the SPoC generalized eigenproblem,
    log-variance of the filtered signals.
``csp``
    common spatial pattern filters, log-variance features.
``diag``
    log-variance of the raw channels.

A ``dummy`` method (no features, predicts the training mean or the majority
class) serves as the normalization baseline.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .covariance import SpatialReducer, apply_reducer, pca_reducer
from .errors import ContractError, DegenerateInputError, ShapeError
from .linmodel import (
    LinearHead,
    Standardizer,
    fit_logistic,
    fit_logistic_l2,
    fit_ridge,
    fit_ridge_gcv,
    fit_standardizer,
    predict,
)
from .manifold import check_spd, gen_eig, geometric_mean, tangent_project

METHODS = ("riemann", "spoc", "csp", "diag", "dummy")
VARIANCE_FLOOR = 1e-20


@dataclass(frozen=True)
class BandModel:
    """Per-band fitted parameters.

    ``riemann`` uses ``reducer`` (may be None) and ``reference`` (geometric
    mean in the reduced space). ``spoc``/``csp`` use ``filters`` (P, k),
    ``eigenvalues`` (k,) in filter order and ``reference`` (arithmetic mean
    of the training covariances).
    """

    reducer: SpatialReducer = None
    reference: np.ndarray = None
    filters: np.ndarray = None
    eigenvalues: np.ndarray = None


@dataclass(frozen=True)
class FittedPipeline:
    method: str
    n_channels: int
    bands: tuple
    standardizer: Standardizer
    head: LinearHead
    offsets: tuple  # start of each band's feature block
    n_components: int = None
    head_kind: str = "ridge"
    floored_variances: int = field(default=0, compare=False)

    @property
    def n_features(self):
        return self.standardizer.dim

    def band_slice(self, band):
        stop = self.offsets[band + 1] if band + 1 < len(self.offsets) else self.n_features
        return slice(self.offsets[band], stop)


def _log_variance(covs, filters=None):
    if filters is None:
        var = np.diagonal(covs, axis1=-2, axis2=-1)
    else:
        var = np.einsum("pk,npq,qk->nk", filters, covs, filters)
    floored = int(np.sum(var <= VARIANCE_FLOOR))
    if floored:
        warnings.warn(f"{floored} variances floored at {VARIANCE_FLOOR:g} "
                      "before taking logs", RuntimeWarning, stacklevel=3)
    return np.log(np.maximum(var, VARIANCE_FLOOR)), floored


def band_features(method, model, covs):
    """Raw (un-standardized) features of one band."""
    if method == "riemann":
        if model.reducer is not None:
            covs = apply_reducer(covs, model.reducer)
        return tangent_project(covs, model.reference)
    if method in ("spoc", "csp"):
        return _log_variance(covs, model.filters)[0]
    if method == "diag":
        return _log_variance(covs)[0]
    if method == "dummy":
        return np.zeros((covs.shape[0], 0))
    raise ContractError(f"unknown method {method!r}")


def _covs_of(data):
    covs = data.covs if hasattr(data, "covs") else np.asarray(data, dtype=np.float64)
    if covs.ndim == 3:
        covs = covs[:, None]
    return covs


def transform(pipeline, data):
    """Raw feature matrix (N, D) of a dataset or (N, [B,] P, P) array."""
    covs = _covs_of(data)
    if covs.shape[1:] != (len(pipeline.bands), pipeline.n_channels,
                          pipeline.n_channels):
        raise ShapeError(
            f"pipeline expects (N, {len(pipeline.bands)}, {pipeline.n_channels}, "
            f"{pipeline.n_channels}) covariances, got {covs.shape}")
    if covs.shape[0] == 0:
        return np.zeros((0, pipeline.n_features))
    blocks = [band_features(pipeline.method, model, covs[:, b])
              for b, model in enumerate(pipeline.bands)]
    return np.concatenate(blocks, axis=1)


def pipeline_predict(pipeline, data):
    """Predictions from stored parameters only (no refitting)."""
    feats = transform(pipeline, data)
    if feats.shape[0] == 0:
        return np.zeros(0)
    return predict(pipeline.head, pipeline.standardizer.transform(feats))


def decision_scores(pipeline, data):
    """Continuous head output (log-odds for logistic heads)."""
    feats = transform(pipeline, data)
    return pipeline.head.decision_function(pipeline.standardizer.transform(feats))


# --- fitting ----------------------------------------------------------------

def default_head_kind(ds):
    return "ridge" if ds.target_kind == "continuous" else "logistic"


def _fit_head(z, targets, head_kind, grid, alpha, seed):
    if head_kind == "ridge":
        if alpha is not None:
            return fit_ridge(z, targets, alpha)
        return fit_ridge_gcv(z, targets, grid)
    if head_kind == "logistic":
        if alpha is not None:
            return fit_logistic(z, targets, alpha)
        return fit_logistic_l2(z, targets, grid, seed=seed)
    raise ContractError(f"unknown head kind {head_kind!r}")


def _assemble(method, ds, bands, blocks, head_kind, grid, alpha, seed,
              n_components, floored=0):
    head_kind = head_kind or default_head_kind(ds)
    if head_kind == "logistic" and ds.target_kind != "binary":
        raise ContractError("logistic head requires binary targets")
    feats = np.concatenate(blocks, axis=1)
    offsets = tuple(int(o) for o in np.cumsum([0] + [b.shape[1] for b in blocks[:-1]]))
    scaler = fit_standardizer(feats)
    head = _fit_head(scaler.transform(feats), ds.targets, head_kind, grid,
                     alpha, seed)
    return FittedPipeline(method=method, n_channels=ds.n_channels,
                          bands=tuple(bands), standardizer=scaler, head=head,
                          offsets=offsets, n_components=n_components,
                          head_kind=head_kind, floored_variances=floored)


def fit_riemann(ds, n_components=None, head_kind=None, grid=None, alpha=None,
                seed=0, mean_tol=1e-7, mean_max_iter=50):
    """Fit the tangent space pipeline.

    Parameters
    ----------
    ds : CovarianceDataset
        Training data.
    n_components : int, optional
        PCA dimension K per band. ``None`` or ``P`` skips the reduction.
    head_kind : {"ridge", "logistic"}, optional
        Defaults from the dataset's target kind.
    grid : array-like, optional
        Regularization candidates for the head.
    alpha : float, optional
        Use this regularization instead of searching the grid.
    seed : int
        Seed for the logistic inner CV folds.

    Returns
    -------
    FittedPipeline
    """
    p = ds.n_channels
    k = p if n_components is None else int(n_components)
    if not 1 <= k <= p:
        raise ShapeError(f"n_components must be in [1, {p}], got {k}")
    bands, blocks = [], []
    for b in range(ds.n_bands):
        covs = ds.covs[:, b]
        reducer = None
        if k < p:
            reducer = pca_reducer(covs, k)
            covs = apply_reducer(covs, reducer)
        ref = geometric_mean(covs, tol=mean_tol, max_iter=mean_max_iter)
        bands.append(BandModel(reducer=reducer, reference=ref))
        blocks.append(tangent_project(covs, ref))
    return _assemble("riemann", ds, bands, blocks, head_kind, grid, alpha,
                     seed, k)


def spoc_filters(covs, targets):
    """SPoC filters: ``gen_eig(mean(z_i C_i), mean(C_i))``.

    Returns eigenvalues and filters sorted by ``|lambda|`` descending, plus
    the arithmetic mean covariance.
    """
    y = np.asarray(targets, dtype=np.float64)
    std = y.std()
    if not std > 0:
        raise DegenerateInputError("SPoC needs a target with nonzero variance")
    z = (y - y.mean()) / std
    c_mean = covs.mean(axis=0)
    c_z = np.einsum("n,npq->pq", z, covs) / covs.shape[0]
    evals, evecs = gen_eig(0.5 * (c_z + c_z.T), c_mean)
    order = np.argsort(-np.abs(evals), kind="stable")
    return evals[order], evecs[:, order], c_mean


def fit_spoc(ds, n_components=None, head_kind=None, grid=None, alpha=None,
             seed=0):
    """SPoC spatial filtering + log-variance features."""
    if ds.target_kind != "continuous":
        raise ContractError("SPoC requires continuous targets")
    p = ds.n_channels
    k = p if n_components is None else int(n_components)
    if not 1 <= k <= p:
        raise ShapeError(f"n_components must be in [1, {p}], got {k}")
    bands, blocks, floored = [], [], 0
    for b in range(ds.n_bands):
        covs = ds.covs[:, b]
        evals, filters, c_mean = spoc_filters(covs, ds.targets)
        model = BandModel(reference=c_mean, filters=filters[:, :k],
                          eigenvalues=evals[:k])
        feats, n_floor = _log_variance(covs, model.filters)
        bands.append(model)
        blocks.append(feats)
        floored += n_floor
    return _assemble("spoc", ds, bands, blocks, head_kind, grid, alpha, seed,
                     k, floored)


def interleave_ends(n):
    """Index order 0, n-1, 1, n-2, ... over a descending spectrum."""
    lo, hi = 0, n - 1
    out = []
    while lo <= hi:
        out.append(lo)
        if lo != hi:
            out.append(hi)
        lo, hi = lo + 1, hi - 1
    return np.array(out, dtype=int)


def csp_filters(covs, labels):
    """CSP filters from ``gen_eig(C_pos, C_pos + C_neg)``.

    ``C_pos`` is the mean covariance of the larger label value. Returns
    eigenvalues/filters in interleaved-ends order and the arithmetic mean
    covariance of all observations.
    """
    classes = np.unique(labels)
    if classes.size != 2:
        raise ContractError(f"CSP needs exactly two classes, got {classes.size}")
    c_neg = covs[labels == classes[0]].mean(axis=0)
    c_pos = covs[labels == classes[1]].mean(axis=0)
    evals, evecs = gen_eig(c_pos, c_pos + c_neg)
    order = interleave_ends(evals.size)
    return evals[order], evecs[:, order], covs.mean(axis=0)


def fit_csp(ds, n_components=None, head_kind=None, grid=None, alpha=None,
            seed=0):
    """CSP spatial filtering + log-variance features."""
    if ds.target_kind != "binary":
        raise ContractError("CSP requires binary targets")
    p = ds.n_channels
    k = (p if p % 2 == 0 else p - 1) if n_components is None else int(n_components)
    if k % 2 or not 2 <= k <= p:
        raise ShapeError(f"CSP needs an even n_components in [2, {p}], got {k}")
    bands, blocks, floored = [], [], 0
    for b in range(ds.n_bands):
        covs = ds.covs[:, b]
        evals, filters, c_mean = csp_filters(covs, ds.targets)
        model = BandModel(reference=c_mean, filters=filters[:, :k],
                          eigenvalues=evals[:k])
        feats, n_floor = _log_variance(covs, model.filters)
        bands.append(model)
        blocks.append(feats)
        floored += n_floor
    return _assemble("csp", ds, bands, blocks, head_kind, grid, alpha, seed,
                     k, floored)


def fit_diag(ds, head_kind=None, grid=None, alpha=None, seed=0):
    """Channel-space log band power features."""
    blocks, floored = [], 0
    for b in range(ds.n_bands):
        feats, n_floor = _log_variance(ds.covs[:, b])
        blocks.append(feats)
        floored += n_floor
    bands = [BandModel() for _ in range(ds.n_bands)]
    return _assemble("diag", ds, bands, blocks, head_kind, grid, alpha, seed,
                     None, floored)


def fit_dummy(ds, head_kind=None, **_):
    """Feature-free baseline: training mean (ridge) or majority class."""
    head_kind = head_kind or default_head_kind(ds)
    scaler = Standardizer(means=np.zeros(0), stds=np.ones(0))
    if head_kind == "ridge":
        head = LinearHead(weights=np.zeros(0), bias=float(np.mean(ds.targets)),
                          kind="ridge", alpha=0.0)
    else:
        classes, counts = np.unique(ds.targets, return_counts=True)
        if classes.size != 2:
            raise ContractError("binary dummy needs two classes")
        # log-odds of +-inf would not serialize; +-1 keeps the hard label
        bias = 1.0 if counts[1] > counts[0] else -1.0
        head = LinearHead(weights=np.zeros(0), bias=bias, kind="logistic",
                          alpha=0.0, classes=tuple(classes.tolist()))
    bands = tuple(BandModel() for _ in range(ds.n_bands))
    return FittedPipeline(method="dummy", n_channels=ds.n_channels, bands=bands,
                          standardizer=scaler, head=head,
                          offsets=tuple(0 for _ in bands), head_kind=head_kind)


def fit_pipeline(ds, method, n_components=None, head_kind=None, grid=None,
                 alpha=None, seed=0):
    """Dispatch to ``fit_<method>``."""
    if method == "riemann":
        return fit_riemann(ds, n_components, head_kind, grid, alpha, seed)
    if method == "spoc":
        return fit_spoc(ds, n_components, head_kind, grid, alpha, seed)
    if method == "csp":
        return fit_csp(ds, n_components, head_kind, grid, alpha, seed)
    if method == "diag":
        return fit_diag(ds, head_kind, grid, alpha, seed)
    if method == "dummy":
        return fit_dummy(ds, head_kind)
    raise ContractError(f"unknown method {method!r}; expected one of {METHODS}")


def check_reference(pipeline):
    """Assert every stored reference matrix is SPD."""
    for model in pipeline.bands:
        if model.reference is not None:
            check_spd(model.reference, "reference")
