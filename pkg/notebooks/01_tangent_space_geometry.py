"""
Covariance matrices as points on a curved space
===============================================

Covariance matrices are symmetric positive definite (SPD). Under the
affine-invariant metric they form a curved space in which distances do not
change when every matrix is transformed by the same invertible mixing. This
script walks through the basic operations used by the tangent space pipeline.
"""

import numpy as np

from tspatterns import (
    geodesic_distance,
    geometric_mean,
    tangent_project,
    tangent_unproject,
    upper,
)

rng = np.random.default_rng(0)

# a handful of random 4x4 covariance matrices
x = rng.standard_normal((6, 4, 200))
covs = x @ x.transpose(0, 2, 1) / 200

###############################################################################
# Distances ignore the mixing
# ---------------------------
# Mixing every signal with the same invertible matrix ``g`` leaves the
# affine-invariant distance unchanged, while the Euclidean one moves.

g = rng.standard_normal((4, 4))
mixed = g @ covs @ g.T
print("riemannian distance  before %.6f  after %.6f"
      % (geodesic_distance(covs[0], covs[1]), geodesic_distance(mixed[0], mixed[1])))
print("euclidean distance   before %.6f  after %.6f"
      % (np.linalg.norm(covs[0] - covs[1]), np.linalg.norm(mixed[0] - mixed[1])))

###############################################################################
# The geometric mean moves with the data
# --------------------------------------
# The Karcher mean of the mixed matrices is the mixed mean.

mean = geometric_mean(covs)
print("equivariance error", np.abs(geometric_mean(mixed) - g @ mean @ g.T).max())

###############################################################################
# Tangent vectors
# ---------------
# Whitening by the mean and taking the matrix logarithm flattens the space
# around the mean. The upper triangle, with off-diagonal entries scaled by
# sqrt(2), is a vector whose Euclidean norm equals the Frobenius norm.

v = tangent_project(covs, mean)
print("tangent features", v.shape)
print("norm check", np.linalg.norm(v[0]), geodesic_distance(covs[0], mean))
print("round trip error", np.abs(tangent_unproject(v[0], mean) - covs[0]).max())

sym = rng.standard_normal((4, 4))
sym = sym + sym.T
print("isometry", np.linalg.norm(upper(sym)), np.linalg.norm(sym))
