"""D-optimal replicate allocations for two-level factorials with binary response."""

from .model import (
    LINKS,
    ModelSpec,
    build_design_matrix,
    level_matrix,
    main_effects,
    nu,
    weight_range,
    weights,
)
from .dcrit import (
    det_objective,
    det_oracle,
    exchange_restriction,
    info_matrix,
    lift_one_restriction,
    maximize_exchange_int,
    maximize_exchange_real,
    maximize_lift_one,
    uniqueness_rank,
)
from .optimize import (
    DesignReport,
    OptimizerConfig,
    VerificationResult,
    exchange_int,
    exchange_real,
    lift_one,
    lift_one_modified,
    verify_minimally_supported,
    verify_optimal,
)
from .ewbayes import (
    EfficiencyReport,
    Normal,
    PriorSpec,
    QuadratureConfig,
    Uniform,
    bayes_design,
    bayes_objective,
    ew_design,
    expected_weights,
    relative_efficiency,
)
from .fractions import (
    FractionSpec,
    RobustnessReport,
    best_half_fraction,
    disjoint_twin,
    fraction_select,
    most_robust_minsupport,
    regular_fraction_optimal_23,
    regular_fraction_region_logit_23,
    relative_loss,
    robustness_scan,
)

__version__ = "0.1.0"
