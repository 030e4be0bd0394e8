"""Balancing-weights causal estimation with percentile-bootstrap
sensitivity analysis under the marginal sensitivity model."""

from .core import (
    Dataset,
    Estimand,
    Interval,
    Scaling,
    SensConfig,
    flip_treatment,
    odds_ratio,
    standardize,
    validate,
)
from .balancer import (
    BalanceSpec,
    Method,
    TargetGroup,
    WeightFit,
    point_estimate,
    solve_entropy,
    solve_sbw_dual,
)
from .sensitivity import (
    ExtremaResult,
    ShiftSpec,
    combine_ate,
    extrema,
    shift_weights,
    shifted_estimate,
)
from .bootstrap import (
    BootstrapEngine,
    BootstrapPlan,
    LambdaStar,
    SensitivityResult,
    lambda_star,
    percentile_ci,
    resample,
    sensitivity_interval,
)
from .amplification import (
    AmplificationResult,
    Benchmark,
    Verdict,
    amplify,
    classify,
    contour,
    decompose,
    error_bounds,
    oracle_weights,
)
from .simulate import DGPSpec, SimReport, coverage_experiment, generate, split_compare

__version__ = "0.1.0"

__all__ = [
    "AmplificationResult",
    "BalanceSpec",
    "Benchmark",
    "BootstrapEngine",
    "BootstrapPlan",
    "DGPSpec",
    "Dataset",
    "Estimand",
    "ExtremaResult",
    "Interval",
    "LambdaStar",
    "Method",
    "Scaling",
    "SensConfig",
    "SensitivityResult",
    "ShiftSpec",
    "SimReport",
    "TargetGroup",
    "Verdict",
    "WeightFit",
    "amplify",
    "classify",
    "combine_ate",
    "contour",
    "coverage_experiment",
    "decompose",
    "error_bounds",
    "extrema",
    "flip_treatment",
    "generate",
    "lambda_star",
    "odds_ratio",
    "oracle_weights",
    "percentile_ci",
    "point_estimate",
    "resample",
    "sensitivity_interval",
    "shift_weights",
    "shifted_estimate",
    "solve_entropy",
    "solve_sbw_dual",
    "split_compare",
    "standardize",
    "validate",
]
