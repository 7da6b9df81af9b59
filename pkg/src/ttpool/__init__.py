"""Equivalence test-then-pool with kernel MMD two-sample tests."""

from .causality import (
    CausalityConfig,
    CausalityOutcome,
    DiagnosticsReport,
    Method,
    consistency_diagnostics,
    normal_approx_test,
    partial_bootstrap_test,
    partial_permutation_test,
    standard_permutation_test,
)
from .errors import (
    ConfigError,
    DataError,
    DegenerateSample,
    DimensionMismatch,
    IndexOutOfRange,
    NonVStatEstimator,
    SampleTooSmall,
    TTPoolError,
)
from .estimators import Estimator, MMDValue, mmd2, mmd2_fused, mmd2_u, mmd2_v, mmd2_v_fused
from .fusion import FusionConfig, FusionMode, FusionOutcome, classic_fusion, equivalence_fusion
from .kernels import (
    Arm,
    GramCache,
    KernelFamily,
    KernelSpec,
    Sample,
    build_gram,
    eval_kernel,
    resolve_bandwidth,
)
from .pipeline import TTPConfig, TTPReport, derive_stage_seeds, run_classic_ttp, run_equivalence_ttp
from .simulate import (
    CampaignResult,
    MeanShift,
    NullStudyRow,
    Scenario,
    VarShift,
    null_distribution_study,
    run_campaign,
)

__version__ = "0.1.0"
