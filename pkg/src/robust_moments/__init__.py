"""Group-robust regression via adversarial moment violations.

Minimizes the worst-group adversarial moment violation over featurized
hypothesis classes with no-regret dynamics, alongside groupDRO and
minmax-regret baselines, metrics, and a runtime-scaling benchmark.
"""

__version__ = "0.1.0"

from .baselines import BaselineResult, group_erm, solve_baseline
from .data import (
    DatasetFormatError,
    GroundTruth,
    GroupedDataset,
    SyntheticSpec,
    generate_synthetic,
    load_dataset,
    save_dataset,
)
from .estimators import (
    AdversarialMomentRegressor,
    GroupDRORegressor,
    MinmaxRegretRegressor,
)
from .evaluation import (
    EvalReport,
    TestFunctionBall,
    brute_force_minmax,
    enumerate_adversarial_value,
    evaluate_hypothesis,
    multiaccuracy_error,
    mse_to_h0,
)
from .features import (
    FunctionFeatures,
    GroupKernelMatrices,
    LinearFeatures,
    NystromFeatures,
    apply_features,
    build_group_kernels,
    fit_nystrom,
    rbf_kernel,
)
from .game import (
    GameCoefficients,
    SolverConfig,
    SolverResult,
    best_response,
    build_linear_coefficients,
    build_rkhs_coefficients,
    moment_violation,
    mw_update,
    optimal_rkhs_violation,
    predict,
    predict_rkhs,
    solve,
)
from .oracle import (
    LinearBallOracles,
    OracleGameState,
    OracleSolveResult,
    ftl_adversary_update,
    oracle_best_response,
    oracle_solve,
)

__all__ = [
    "AdversarialMomentRegressor",
    "BaselineResult",
    "DatasetFormatError",
    "EvalReport",
    "FunctionFeatures",
    "GameCoefficients",
    "GroundTruth",
    "GroupDRORegressor",
    "GroupKernelMatrices",
    "GroupedDataset",
    "LinearBallOracles",
    "LinearFeatures",
    "MinmaxRegretRegressor",
    "NystromFeatures",
    "OracleGameState",
    "OracleSolveResult",
    "SolverConfig",
    "SolverResult",
    "SyntheticSpec",
    "TestFunctionBall",
    "apply_features",
    "best_response",
    "brute_force_minmax",
    "build_group_kernels",
    "build_linear_coefficients",
    "build_rkhs_coefficients",
    "enumerate_adversarial_value",
    "evaluate_hypothesis",
    "fit_nystrom",
    "ftl_adversary_update",
    "generate_synthetic",
    "group_erm",
    "load_dataset",
    "moment_violation",
    "mse_to_h0",
    "multiaccuracy_error",
    "mw_update",
    "optimal_rkhs_violation",
    "oracle_best_response",
    "oracle_solve",
    "predict",
    "predict_rkhs",
    "rbf_kernel",
    "save_dataset",
    "solve",
    "solve_baseline",
]
