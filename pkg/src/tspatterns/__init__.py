"""Interpretable patterns for linear models in Riemannian tangent space."""

from .covariance import (
    SpatialReducer,
    apply_reducer,
    oas_coefficient,
    oas_shrinkage,
    pca_reducer,
    sample_covariance,
)
from .dataset import CovarianceDataset, GroundTruth
from .errors import (
    ContractError,
    ConvergenceError,
    DegenerateInputError,
    NotPositiveDefiniteError,
    NumericalError,
    ShapeError,
)
from .evaluation import (
    MethodConfig,
    SplitPlan,
    balanced_accuracy,
    cross_validate,
    mae,
    make_splits,
    normalized_mae,
    r_squared,
    train_test_plan,
)
from .linmodel import (
    LinearHead,
    Standardizer,
    fit_logistic_l2,
    fit_ridge_gcv,
    fit_standardizer,
    predict,
    predict_proba,
    regularization_grid,
)
from .manifold import (
    gen_eig,
    geodesic_distance,
    geometric_mean,
    spd_exp,
    spd_log,
    spd_power,
    sym_eig,
    tangent_project,
    tangent_unproject,
    upper,
    upper_inv,
)
from .patterns import (
    PatternSet,
    component_patterns,
    estimate_num_sources,
    extract_patterns,
    haufe_tangent_pattern,
    pattern_distance,
    predict_eigenvalues,
)
from .pipelines import (
    FittedPipeline,
    fit_csp,
    fit_diag,
    fit_pipeline,
    fit_riemann,
    fit_spoc,
    pipeline_predict,
)
from .simulation import (
    SimulationParams,
    gen_dataset,
    gen_mixing,
    run_sweep,
    summarize_sweep,
)

__version__ = "0.1.0"
