"""Greedy forward subnetwork selection for mean-field two-layer networks,
layer-wise pruning for deep MLPs, and the polytope geometry that certifies
the selection rates.
"""

from .activations import ACTIVATION_KINDS, RELU, SIGMOID, TANH, Activation, get_activation
from .deepprune import (
    LayerPruneConfig,
    LayerReport,
    fold_layer,
    prune_all_layers,
    prune_layer,
    score_candidates,
)
from .estimators import (
    GreedySubnetSelector,
    LayerwiseMLPPruner,
    TwoLayerRegressor,
    subnet_from_counts,
)
from .geometry import (
    CheckResult,
    GammaResult,
    PolytopeStats,
    SimplexSolution,
    check_prop1_bound,
    check_step_recursion,
    check_w_bound,
    diameter,
    gamma_estimate,
    gamma_exact_2d,
    lstar_binary,
    lstar_solve,
    membership,
    polytope_stats,
)
from .model import (
    Dataset,
    DeepMLP,
    FeatureInstance,
    MLPBlock,
    Neuron,
    TwoLayerNet,
    build_feature_instance,
    feature_map,
    forward_two_layer,
    gen_toy_data,
    init_random_mlp,
    init_random_net,
    loss_mean,
    mlp_from_two_layer,
    two_layer_from_mlp,
    vec_loss,
)
from .rates import RateFit, SweepConfig, emit_plot, fit_loglog_slope, sweep_rate
from .selection import (
    EpsGap,
    MaxSize,
    PruneReport,
    SelectionState,
    counterexample_instance,
    forward_step_nearest,
    forward_step_scan,
    run_backward,
    run_forward,
    run_frank_wolfe,
    run_random_subset,
)
from .serialize import (
    ModelFormatError,
    atomic_write,
    load_dataset_csv,
    load_model,
    save_dataset_csv,
    save_model,
)
from .training import (
    TrainConfig,
    TrainingDivergence,
    gd_train,
    grad_loss,
    mean_field_grad,
    sgd_finetune,
    train_scratch,
    train_to_convergence,
)

__version__ = "0.1.0"

__all__ = [
    "ACTIVATION_KINDS",
    "Activation",
    "CheckResult",
    "Dataset",
    "DeepMLP",
    "EpsGap",
    "FeatureInstance",
    "GammaResult",
    "GreedySubnetSelector",
    "LayerPruneConfig",
    "LayerReport",
    "LayerwiseMLPPruner",
    "MLPBlock",
    "MaxSize",
    "ModelFormatError",
    "Neuron",
    "PolytopeStats",
    "PruneReport",
    "RateFit",
    "RELU",
    "SIGMOID",
    "SelectionState",
    "SimplexSolution",
    "SweepConfig",
    "TANH",
    "TrainConfig",
    "TrainingDivergence",
    "TwoLayerNet",
    "TwoLayerRegressor",
    "atomic_write",
    "build_feature_instance",
    "check_prop1_bound",
    "check_step_recursion",
    "check_w_bound",
    "counterexample_instance",
    "diameter",
    "emit_plot",
    "feature_map",
    "fit_loglog_slope",
    "fold_layer",
    "forward_step_nearest",
    "forward_step_scan",
    "forward_two_layer",
    "gamma_estimate",
    "gamma_exact_2d",
    "gd_train",
    "gen_toy_data",
    "get_activation",
    "grad_loss",
    "init_random_mlp",
    "init_random_net",
    "load_dataset_csv",
    "load_model",
    "loss_mean",
    "lstar_binary",
    "lstar_solve",
    "mean_field_grad",
    "membership",
    "mlp_from_two_layer",
    "polytope_stats",
    "prune_all_layers",
    "prune_layer",
    "run_backward",
    "run_forward",
    "run_frank_wolfe",
    "run_random_subset",
    "save_dataset_csv",
    "save_model",
    "score_candidates",
    "sgd_finetune",
    "subnet_from_counts",
    "sweep_rate",
    "train_scratch",
    "train_to_convergence",
    "two_layer_from_mlp",
    "vec_loss",
    "__version__",
]
