"""Synthetic covariance datasets from a linear mixing model.

Each observation has ``P`` latent sources with log-normal powers ``p_i``;
the first ``Q`` of them drive the target ``y_i = b^T log p_i[:Q] + b0 + eps``
and all of them are mixed into channel space by ``A`` (optionally perturbed
per observation).
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from .covariance import sample_covariance
from .dataset import CovarianceDataset, GroundTruth
from .errors import ContractError

logger = logging.getLogger(__name__)

SPD_RIDGE = 1e-10


@dataclass(frozen=True)
class SimulationParams:
    n_channels: int = 5
    n_sources: int = 1
    n_obs: int = 1000
    weights: tuple = (1.0,)
    bias: float = 0.0
    target_noise: float = 0.0  # sigma
    pattern_noise: float = 0.0  # alpha
    log_power_std: float = 1.0
    mixing: str = "random"  # "random" (A = expm(B)) or "identity"
    mixing_scale: float = 1.0  # std of the entries of B
    mode: str = "covariance"  # or "timeseries"
    n_times: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.n_channels < 1 or self.n_obs < 1:
            raise ContractError("n_channels and n_obs must be >= 1")
        if not 1 <= self.n_sources <= self.n_channels:
            raise ContractError(
                f"n_sources must be in [1, n_channels={self.n_channels}], "
                f"got {self.n_sources}")
        if len(self.weights) != self.n_sources:
            raise ContractError(
                f"{len(self.weights)} weights given for {self.n_sources} sources")
        if self.target_noise < 0 or self.pattern_noise < 0:
            raise ContractError("noise levels must be nonnegative")
        if self.mixing not in ("random", "identity"):
            raise ContractError(f"unknown mixing {self.mixing!r}")
        if self.mode not in ("covariance", "timeseries"):
            raise ContractError(f"unknown mode {self.mode!r}")
        if self.mode == "timeseries" and self.n_times < 1:
            raise ContractError("n_times must be >= 1")
        object.__setattr__(self, "weights",
                           tuple(float(w) for w in self.weights))


def gen_mixing(n_channels, rng, scale=1.0):
    """``A = expm(B)`` with ``B_jk ~ N(0, scale^2)``; invertible."""
    if n_channels < 1:
        raise ContractError("n_channels must be >= 1")
    b = scale * rng.standard_normal((n_channels, n_channels))
    return scipy.linalg.expm(b)


def gen_dataset(params, rng=None):
    """Draw a dataset from the generative model.

    Parameters
    ----------
    params : SimulationParams
    rng : numpy.random.Generator, optional
        Overrides ``params.seed``.

    Returns
    -------
    CovarianceDataset
        Single band, continuous targets, ground truth attached.
    """
    rng = np.random.default_rng(params.seed) if rng is None else rng
    p, q, n = params.n_channels, params.n_sources, params.n_obs
    if params.mixing == "identity":
        mixing = np.eye(p)
    else:
        mixing = gen_mixing(p, rng, params.mixing_scale)
    log_powers = params.log_power_std * rng.standard_normal((n, p))
    powers = np.exp(log_powers)
    if params.pattern_noise > 0:
        mixings = mixing + params.pattern_noise * rng.standard_normal((n, p, p))
    else:
        mixings = np.broadcast_to(mixing, (n, p, p))

    if params.mode == "covariance":
        covs = (mixings * powers[:, None, :]) @ np.swapaxes(mixings, -1, -2)
    else:
        latent = rng.standard_normal((n, p, params.n_times))
        latent *= np.sqrt(powers)[:, :, None]
        covs = sample_covariance(mixings @ latent)
    covs = 0.5 * (covs + np.swapaxes(covs, -1, -2))

    min_eig = np.linalg.eigvalsh(covs)[:, 0]
    bad = min_eig <= 0
    if np.any(bad):
        logger.info("%d covariance matrices outside the SPD cone; adding a "
                    "%g ridge", int(bad.sum()), SPD_RIDGE)
        covs[bad] += SPD_RIDGE * np.eye(p)

    weights = np.asarray(params.weights)
    targets = log_powers[:, :q] @ weights + params.bias
    if params.target_noise > 0:
        targets = targets + params.target_noise * rng.standard_normal(n)
    truth = GroundTruth(mixing=mixing, weights=weights, bias=params.bias,
                        n_sources=q)
    ds = CovarianceDataset(covs=covs, targets=targets, truth=truth)
    return ds


def latent_powers(params):
    """Regenerate the latent powers (N, P) drawn by :func:`gen_dataset`."""
    rng = np.random.default_rng(params.seed)
    if params.mixing != "identity":
        rng.standard_normal((params.n_channels, params.n_channels))
    return np.exp(params.log_power_std
                  * rng.standard_normal((params.n_obs, params.n_channels)))


# --- noise sweeps -----------------------------------------------------------

SWEEP_AXES = {"target_noise": 0, "pattern_noise": 1}
SWEEP_COLUMNS = ("method", "axis", "value", "seed", "fold", "normalized_mae",
                 "pattern_distance", "status")
DEFAULT_GRIDS = {
    "target_noise": (0.0, 0.125, 0.25, 0.5, 1.0, 2.0, 4.0),
    "pattern_noise": (0.0, 0.125, 0.25, 0.5, 1.0, 2.0),
}
DEFAULT_METHODS = ("riemann", "spoc", "diag", "dummy")


def cell_seed(seed, axis, grid_index):
    """Independent integer seed for one (seed, axis, grid point) cell."""
    ss = np.random.SeedSequence([int(seed), SWEEP_AXES[axis], int(grid_index)])
    return int(ss.generate_state(1)[0])


def _top_pattern_distance(method, model, ds_train, truth):
    from .patterns import pattern_distance, pipeline_patterns

    if method not in ("riemann", "spoc", "csp"):
        return float("nan")
    band = pipeline_patterns(model, ds_train)[0]
    return pattern_distance(truth.source_patterns[:, 0], band.patterns[:, 0])


def _run_cell(axis, index, value, seed, methods, n_folds, base, n_components):
    from .evaluation import MethodConfig, fold_metrics, make_splits

    cseed = cell_seed(seed, axis, index)
    params = replace(base, seed=cseed, **{axis: float(value)})
    ds = gen_dataset(params)
    plan = make_splits(ds.n_obs, "kfold", k=n_folds, seed=cseed)
    rows = []
    for method in methods:
        config = MethodConfig(method=method, n_components=n_components.get(method))
        for fold, (train, test) in enumerate(plan.split()):
            row = {"method": method, "axis": axis, "value": float(value),
                   "seed": int(seed), "fold": fold,
                   "normalized_mae": float("nan"),
                   "pattern_distance": float("nan"), "status": "ok"}
            try:
                ds_train, ds_test = ds.subset(train), ds.subset(test)
                model = config.fit(ds_train)
                metrics, _ = fold_metrics(ds_train, ds_test, model)
                row["normalized_mae"] = metrics["normalized_mae"]
                row["pattern_distance"] = _top_pattern_distance(
                    method, model, ds_train, ds.truth)
            except Exception as exc:  # recorded, not dropped
                row["status"] = f"error:{type(exc).__name__}:{exc}"
            rows.append(row)
    return rows


def run_sweep(axis, grid=None, methods=DEFAULT_METHODS, n_folds=10,
              seeds=range(10), base=None, n_components=None, n_jobs=1):
    """Cross-validated scores along a noise axis.

    Parameters
    ----------
    axis : {"target_noise", "pattern_noise"}
        Which noise level the grid replaces in ``base``.
    grid : sequence of float, optional
        Noise levels; defaults to ``DEFAULT_GRIDS[axis]``.
    methods : sequence of str
        Pipelines to evaluate (``"dummy"`` predicts the training mean).
    n_folds : int
        K-fold CV per cell.
    seeds : iterable of int
        Repetitions; each (seed, grid point) draws its own dataset.
    base : SimulationParams, optional
        All other generative parameters.
    n_components : dict, optional
        Per-method ``n_components`` (default: all channels).
    n_jobs : int
        Worker threads over cells.

    Returns
    -------
    list of dict
        One row per (grid point, seed, method, fold) with keys
        ``SWEEP_COLUMNS``. Failed fits have a ``status`` starting with
        ``"error"`` and NaN scores.
    """
    if axis not in SWEEP_AXES:
        raise ContractError(f"axis must be one of {tuple(SWEEP_AXES)}")
    grid = DEFAULT_GRIDS[axis] if grid is None else tuple(grid)
    seeds = tuple(seeds)
    if not grid or not seeds:
        raise ContractError("sweep needs a nonempty grid and at least one seed")
    base = SimulationParams() if base is None else base
    n_components = dict(n_components or {})
    cells = [(axis, i, v, s, tuple(methods), n_folds, base, n_components)
             for i, v in enumerate(grid) for s in seeds]
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(lambda c: _run_cell(*c), cells))
    else:
        results = [_run_cell(*c) for c in cells]
    return [row for cell in results for row in cell]


def summarize_sweep(rows, metric="normalized_mae"):
    """Mean of ``metric`` per (method, value) over seeds and folds.

    Returns ``{method: (values, means)}`` with values ascending.
    """
    out = {}
    for method in dict.fromkeys(r["method"] for r in rows):
        values = sorted({r["value"] for r in rows if r["method"] == method})
        means = []
        for v in values:
            x = [r[metric] for r in rows
                 if r["method"] == method and r["value"] == v and r["status"] == "ok"]
            means.append(float(np.mean(x)) if x else float("nan"))
        out[method] = (np.array(values), np.array(means))
    return out


def seed_means(rows, method, value, metric="normalized_mae"):
    """Per-seed mean of ``metric`` (averaged over folds) at one grid value."""
    seeds = sorted({r["seed"] for r in rows})
    out = []
    for s in seeds:
        x = [r[metric] for r in rows if r["method"] == method
             and r["value"] == value and r["seed"] == s and r["status"] == "ok"]
        out.append(float(np.mean(x)) if x else float("nan"))
    return np.array(out)
