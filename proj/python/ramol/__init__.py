"""Online MLP learner with a kNN replay memory, plus the prequential harness."""

from ramol._core import (
    Buffer,
    ConfigError,
    DataError,
    DimensionError,
    Learner,
    LearnerConfig,
    MlpParams,
    NumericError,
    __version__,
    ablation_suite,
    cross_entropy,
    drift_budget,
    forward,
    generate,
    init_params,
    prequential_run,
    read_csv,
    regret_run,
    run_seeds,
    softmax,
    standardize_stream,
    weighted_grad,
)

__all__ = [
    "Buffer",
    "ConfigError",
    "DataError",
    "DimensionError",
    "Learner",
    "LearnerConfig",
    "MlpParams",
    "NumericError",
    "__version__",
    "ablation_suite",
    "cross_entropy",
    "drift_budget",
    "forward",
    "generate",
    "init_params",
    "prequential_run",
    "read_csv",
    "regret_run",
    "run_seeds",
    "softmax",
    "standardize_stream",
    "weighted_grad",
]
