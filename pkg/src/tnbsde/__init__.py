"""Deep-BSDE solver for high-dimensional parabolic PDEs with dense or
tensorized (matrix-product-operator) network layers.

The pieces compose bottom-up: `autodiff` is a small reverse-mode engine
with second-order support, `nn` builds two-hidden-layer networks whose
middle layer is dense or a 2-core MPO, `fbsde` rolls networks along
Euler-Maruyama paths and scores the backward residuals, `problems` holds
the benchmark equations, `training` runs Adam with a plateau detector,
and `experiments` / `cli` drive seeded comparison studies.
"""

from .autodiff import ExprGraph, GraphError, ShapeError, VarRef, grad
from .fbsde import (
    DivergedRollout,
    FBSDEProblem,
    PathBatch,
    Rollout,
    loss_hybrid,
    loss_mse,
    rollout,
    sample_paths,
    simulate_forward,
)
from .nn import (
    ArchitectureError,
    ArchitectureSpec,
    DenseLayer,
    Network,
    NetworkBinding,
    TNLayer,
    bind,
    build_network,
    layer_forward,
    load_weights,
    network_eval,
    param_count,
    save_weights,
    tn_contract_weight,
)
from .problems import (
    BSBParams,
    HJBParams,
    MCEstimate,
    bsb_problem,
    hjb_exact_mc,
    hjb_problem,
)
from .training import (
    AdamState,
    ConvergenceParams,
    MetricsLog,
    TrainConfig,
    adam_step,
    convergence_epoch,
    derive_path_seed,
    ema_smooth,
    train,
)
from .experiments import (
    ArchSummary,
    ExperimentError,
    ExperimentPlan,
    MatchReport,
    RunResult,
    aggregate,
    best_dnn,
    bsb_loss_probe,
    convergence_gap_pct,
    default_convergence,
    default_threshold,
    dnn_cohort,
    emit_csv,
    emit_series_csv,
    enumerate_dnn_matches,
    experiment_bond_sweep,
    experiment_match_dnn,
    experiment_train,
    experiment_width_sweep,
    get_problem,
    load_results_csv,
    match_dnn,
    reference_value,
    run_many,
    run_single,
    write_meta,
)

__all__ = [
    "AdamState",
    "ArchSummary",
    "ArchitectureError",
    "ArchitectureSpec",
    "BSBParams",
    "ConvergenceParams",
    "DenseLayer",
    "DivergedRollout",
    "ExperimentError",
    "ExperimentPlan",
    "ExprGraph",
    "FBSDEProblem",
    "GraphError",
    "HJBParams",
    "MCEstimate",
    "MatchReport",
    "MetricsLog",
    "Network",
    "NetworkBinding",
    "PathBatch",
    "Rollout",
    "RunResult",
    "ShapeError",
    "TNLayer",
    "TrainConfig",
    "VarRef",
    "adam_step",
    "aggregate",
    "best_dnn",
    "bind",
    "bsb_loss_probe",
    "bsb_problem",
    "build_network",
    "convergence_epoch",
    "convergence_gap_pct",
    "default_convergence",
    "default_threshold",
    "derive_path_seed",
    "dnn_cohort",
    "ema_smooth",
    "emit_csv",
    "emit_series_csv",
    "enumerate_dnn_matches",
    "experiment_bond_sweep",
    "experiment_match_dnn",
    "experiment_train",
    "experiment_width_sweep",
    "get_problem",
    "grad",
    "hjb_exact_mc",
    "hjb_problem",
    "layer_forward",
    "load_results_csv",
    "load_weights",
    "loss_hybrid",
    "loss_mse",
    "match_dnn",
    "network_eval",
    "param_count",
    "reference_value",
    "rollout",
    "run_many",
    "run_single",
    "sample_paths",
    "save_weights",
    "simulate_forward",
    "tn_contract_weight",
    "train",
    "write_meta",
]
