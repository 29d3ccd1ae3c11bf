"""Container for multi-band covariance datasets."""

from dataclasses import dataclass, replace

import numpy as np

from .errors import ContractError, ShapeError

TARGET_KINDS = ("continuous", "binary")


@dataclass(frozen=True)
class GroundTruth:
    """Generative parameters behind a simulated dataset."""

    mixing: np.ndarray  # (P, P); the first n_sources columns encode the target
    weights: np.ndarray  # (n_sources,)
    bias: float
    n_sources: int

    @property
    def source_patterns(self):
        return self.mixing[:, :self.n_sources]


@dataclass(frozen=True)
class CovarianceDataset:
    """``N`` observations of ``B`` covariance matrices plus targets.

    ``covs`` has shape (N, B, P, P); a (N, P, P) array is accepted and
    treated as a single band.
    """

    covs: np.ndarray
    targets: np.ndarray
    target_kind: str = "continuous"
    groups: np.ndarray = None
    truth: GroundTruth = None

    def __post_init__(self):
        covs = np.asarray(self.covs, dtype=np.float64)
        if covs.ndim == 3:
            covs = covs[:, None]
        if covs.ndim != 4 or covs.shape[-1] != covs.shape[-2]:
            raise ShapeError(f"covs must be (N, B, P, P), got {covs.shape}")
        targets = np.asarray(self.targets)
        if targets.shape != (covs.shape[0],):
            raise ShapeError(
                f"targets must have shape ({covs.shape[0]},), got {targets.shape}")
        if self.target_kind not in TARGET_KINDS:
            raise ContractError(f"unknown target kind {self.target_kind!r}")
        if self.target_kind == "binary":
            if np.unique(targets).size > 2:
                raise ContractError("binary targets take more than two values")
        else:
            targets = targets.astype(np.float64)
        groups = self.groups
        if groups is not None:
            groups = np.asarray(groups)
            if groups.shape != targets.shape:
                raise ShapeError("groups must have one label per observation")
        object.__setattr__(self, "covs", covs)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "groups", groups)

    @property
    def n_obs(self):
        return self.covs.shape[0]

    @property
    def n_bands(self):
        return self.covs.shape[1]

    @property
    def n_channels(self):
        return self.covs.shape[-1]

    def subset(self, indices):
        indices = np.asarray(indices, dtype=int)
        return replace(
            self,
            covs=self.covs[indices],
            targets=self.targets[indices],
            groups=None if self.groups is None else self.groups[indices],
        )

    def with_targets(self, targets):
        return replace(self, targets=np.asarray(targets))
