"""Desk-scale toolkit for shortcut/residual network loss surfaces."""

from .activations import Activation, ActivationTriple, IDENTITY_TRIPLE, activation
from .constructor import (
    ColumnMoverUnit,
    ConstructionRecord,
    ConstructionReport,
    SpherePath,
    build_small_norm_network,
    check_sphere_path,
    dataset_min_distance,
    make_column_mover,
    min_distance,
    plan_sphere_path,
    verify_construction,
)
from .datasets import pca_whiten_csv, sphere_onehot_dataset, whitened_synthetic_dataset
from .experiments import (
    ExperimentConfig,
    InitScheme,
    SweepResult,
    TrainingTrace,
    init_network,
    sweep,
    train,
)
from .hessian import (
    SpectrumReport,
    finite_difference_hessian,
    high_order_zero_hessian,
    moment_matrix,
    residual_cross_moment,
    spectrum,
    stationarity_order_probe,
    zero_point_hessian,
)
from .linalg import (
    EigenDecomposition,
    abs_percentile,
    frobenius_norm,
    jacobi_eigh,
    matmul,
    random_orthogonal,
    sym_eig,
    vec_transpose_permutation,
)
from .network import (
    Dataset,
    ShortcutNetwork,
    batch_forward,
    end_to_end_map,
    flatten,
    forward,
    gradient,
    load_network,
    loss,
    loss_and_gradient,
    save_network,
    unflatten,
    zero_network,
)
from .rng import Rng

__version__ = "0.1.0"
