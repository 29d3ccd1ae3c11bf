"""Splitters, metrics and the cross-validation harness."""

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, DegenerateInputError, ShapeError
from .linmodel import DEFAULT_GRID
from .pipelines import decision_scores, fit_pipeline, pipeline_predict


@dataclass(frozen=True)
class SplitPlan:
    """Assignment of observations to test folds.

    ``folds[i]`` is the fold in which observation ``i`` is tested; ``-1``
    marks observations that are only ever used for training.
    """

    scheme: str
    folds: np.ndarray
    seed: int = None

    @property
    def n_folds(self):
        return int(self.folds.max()) + 1 if self.folds.size else 0

    @property
    def tested(self):
        return self.folds >= 0

    def split(self):
        """Yield ``(train_idx, test_idx)`` per fold, in fold order."""
        for f in range(self.n_folds):
            test = np.flatnonzero(self.folds == f)
            train = np.flatnonzero(self.folds != f)
            yield train, test


def train_test_plan(n, test):
    """Single-fold plan: ``test`` indices held out, the rest trained on."""
    folds = np.full(n, -1)
    folds[np.asarray(test, dtype=int)] = 0
    if not 0 < np.sum(folds == 0) < n:
        raise ContractError("train/test split needs nonempty train and test sets")
    return SplitPlan(scheme="holdout", folds=folds)


def make_splits(n, scheme="kfold", k=10, groups=None, seed=0):
    """Build a :class:`SplitPlan`.

    ``"kfold"`` permutes ``range(n)`` with ``seed`` and cuts it into ``k``
    nearly equal chunks. ``"group"`` makes one fold per distinct label in
    order of first appearance.
    """
    if scheme == "kfold":
        if not 1 <= k <= n:
            raise ContractError(f"k-fold needs 1 <= k <= N, got k={k}, N={n}")
        perm = np.random.default_rng(seed).permutation(n)
        folds = np.empty(n, dtype=int)
        for f, chunk in enumerate(np.array_split(perm, k)):
            folds[chunk] = f
        return SplitPlan(scheme="kfold", folds=folds, seed=seed)
    if scheme == "group":
        if groups is None:
            raise ContractError("group scheme requires group labels")
        groups = np.asarray(groups)
        if groups.shape != (n,):
            raise ShapeError(f"need {n} group labels, got {groups.shape}")
        _, first, inverse = np.unique(groups, return_index=True,
                                      return_inverse=True)
        rank = np.argsort(np.argsort(first))
        return SplitPlan(scheme="group", folds=rank[inverse.ravel()], seed=None)
    raise ContractError(f"unknown split scheme {scheme!r}")


def _paired(y, y_hat):
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape:
        raise ShapeError("targets and predictions differ in shape")
    if y.size == 0:
        raise DegenerateInputError("empty input")
    return y, y_hat


def mae(y, y_hat):
    y, y_hat = _paired(y, y_hat)
    return float(np.mean(np.abs(y - y_hat)))


def normalized_mae(y, y_hat, y_train_mean):
    """MAE divided by the MAE of predicting ``y_train_mean`` everywhere."""
    y, y_hat = _paired(y, y_hat)
    dummy = np.mean(np.abs(y - y_train_mean))
    if dummy == 0:
        raise DegenerateInputError("dummy MAE is zero (constant targets)")
    return float(np.mean(np.abs(y - y_hat)) / dummy)


def r_squared(y, y_hat):
    y, y_hat = _paired(y, y_hat)
    ss_tot = np.sum((y - y.mean()) ** 2)
    if ss_tot == 0:
        raise DegenerateInputError("R^2 undefined for constant targets")
    return float(1.0 - np.sum((y - y_hat) ** 2) / ss_tot)


def balanced_accuracy(labels, predicted, classes=None):
    """Mean per-class recall over ``classes`` (default: labels present)."""
    labels = np.asarray(labels)
    predicted = np.asarray(predicted)
    if labels.shape != predicted.shape:
        raise ShapeError("labels and predictions differ in shape")
    classes = np.unique(labels) if classes is None else np.asarray(classes)
    recalls = []
    for c in classes:
        mask = labels == c
        if not mask.any():
            raise ContractError(f"class {c!r} absent from labels")
        recalls.append(np.mean(predicted[mask] == c))
    return float(np.mean(recalls))


@dataclass(frozen=True)
class MethodConfig:
    method: str = "riemann"
    n_components: int = None
    head_kind: str = None
    grid: np.ndarray = field(default_factory=lambda: DEFAULT_GRID.copy())
    seed: int = 0

    def fit(self, ds):
        return fit_pipeline(ds, self.method, n_components=self.n_components,
                            head_kind=self.head_kind, grid=self.grid,
                            seed=self.seed)


@dataclass
class CVResult:
    """Per-fold metrics, out-of-fold predictions and fitted models."""

    rows: list
    predictions: np.ndarray
    models: list

    def column(self, name):
        return np.array([row[name] for row in self.rows])


def fold_metrics(ds_train, ds_test, pipeline):
    y_pred = pipeline_predict(pipeline, ds_test)
    row = {"n_train": ds_train.n_obs, "n_test": ds_test.n_obs}
    if ds_test.target_kind == "continuous":
        y = ds_test.targets
        row["mae"] = mae(y, y_pred)
        row["normalized_mae"] = normalized_mae(y, y_pred, ds_train.targets.mean())
        row["r2"] = r_squared(y, y_pred) if np.ptp(y) > 0 else np.nan
    else:
        row["balanced_accuracy"] = balanced_accuracy(ds_test.targets, y_pred)
    return row, y_pred


def cross_validate(ds, config, plan, keep_models=True):
    """Fit on each fold's training indices, evaluate on its test indices.

    Every fitted statistic (PCA, reference mean, filters, scaler, head) is
    estimated from the training subset only; the test subset is passed to
    the frozen pipeline's predict path and nothing else.

    Returns
    -------
    CVResult
        ``rows[f]`` holds fold ``f``'s metrics; ``predictions`` are the
        out-of-fold predictions in observation order (NaN or None where an
        observation is never tested).
    """
    if plan.folds.shape != (ds.n_obs,):
        raise ShapeError("split plan does not match the dataset size")
    if ds.target_kind == "continuous":
        predictions = np.full(ds.n_obs, np.nan)
    elif plan.tested.all():
        predictions = np.empty(ds.n_obs, dtype=ds.targets.dtype)
    else:
        predictions = np.full(ds.n_obs, None, dtype=object)
    rows, models = [], []
    for f, (train, test) in enumerate(plan.split()):
        ds_train, ds_test = ds.subset(train), ds.subset(test)
        try:
            model = config.fit(ds_train)
            row, y_pred = fold_metrics(ds_train, ds_test, model)
        except Exception as exc:
            raise type(exc)(f"fold {f}: {exc}") from exc
        row = {"fold": f, **row}
        rows.append(row)
        predictions[test] = y_pred
        models.append(model if keep_models else None)
    return CVResult(rows=rows, predictions=predictions, models=models)


def fold_scores(ds, config, plan):
    """Out-of-fold continuous decision scores (useful for leakage checks)."""
    scores = np.full(ds.n_obs, np.nan)
    for train, test in plan.split():
        model = config.fit(ds.subset(train))
        scores[test] = decision_scores(model, ds.subset(test))
    return scores
