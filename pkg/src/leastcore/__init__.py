"""Least-core credit assignment toolkit.

Solves for (egalitarian) least-core value-sharing schemes of coalitional
games via constraint generation and the ellipsoid method, with pluggable
separation oracles, sensitivity analysis, and benchmark metrics.
"""

from .bench import (
    HoldoutSet,
    MetricsReport,
    attach_holdout,
    calls_to_target,
    classification_rates,
    compute_metrics,
    full_lattice_holdout,
    holdout_epsilon,
    kendall_tau_b,
    make_holdout,
    run_yp,
    run_zs,
)
from .cg import CgConfig, run_cg, run_cg_mwc
from .config import DEFAULT_TOLS, Tolerances
from .ellipsoid import (
    Ellipsoid,
    EllipsoidConfig,
    ellipsoid_cut,
    run_ellipsoid_lp,
    run_ellipsoid_qp,
)
from .estimators import (
    ConstraintGenerationAllocator,
    EllipsoidAllocator,
    ExactAllocator,
    SampleThenSolveAllocator,
)
from .games import (
    Allocation,
    CachedOracle,
    Coalition,
    GameInstance,
    TableOracle,
    ValueOracle,
    build_oracle,
    cached,
    coalition_from_indices,
    load_instance,
    make_example_pair,
    make_mwc_game,
    make_power_game,
    make_random_game,
    make_veto_game,
    save_instance,
)
from .lp import (
    ConstraintSet,
    LpSolution,
    SolveStatus,
    enumerate_constraints,
    solve_full_lp,
    solve_full_qp,
    solve_restricted_lp,
    solve_restricted_qp,
)
from .plugin import ExternalValueOracle, PluginSession, plugin_session
from .sensitivity import (
    BalancedDistribution,
    SensitivityReport,
    binary_disagreement_bound,
    chain_allocation,
    check_containment,
    dual_bound,
    is_supermodular,
    sensitivity_report,
    tv_along_chain,
)
from .separation import (
    ExternalSeeds,
    MwcSeeds,
    RandomSeeds,
    SamplingSpec,
    SeparationOracle,
    SingletonSeeds,
    exhaustive_oracle,
    external_oracle,
    required_samples,
    sampling_oracle,
    seed_constraints,
)
from .trace import RoundRecord, SolveTrace, read_trace, write_trace

__version__ = "0.1.0"

__all__ = [
    "Allocation",
    "BalancedDistribution",
    "CachedOracle",
    "CgConfig",
    "Coalition",
    "ConstraintGenerationAllocator",
    "ConstraintSet",
    "DEFAULT_TOLS",
    "Ellipsoid",
    "EllipsoidAllocator",
    "EllipsoidConfig",
    "ExactAllocator",
    "ExternalSeeds",
    "ExternalValueOracle",
    "GameInstance",
    "HoldoutSet",
    "LpSolution",
    "MetricsReport",
    "MwcSeeds",
    "PluginSession",
    "RandomSeeds",
    "RoundRecord",
    "SampleThenSolveAllocator",
    "SamplingSpec",
    "SensitivityReport",
    "SeparationOracle",
    "SingletonSeeds",
    "SolveStatus",
    "SolveTrace",
    "TableOracle",
    "Tolerances",
    "ValueOracle",
    "attach_holdout",
    "binary_disagreement_bound",
    "build_oracle",
    "cached",
    "calls_to_target",
    "chain_allocation",
    "check_containment",
    "classification_rates",
    "coalition_from_indices",
    "compute_metrics",
    "dual_bound",
    "ellipsoid_cut",
    "enumerate_constraints",
    "exhaustive_oracle",
    "external_oracle",
    "full_lattice_holdout",
    "holdout_epsilon",
    "is_supermodular",
    "kendall_tau_b",
    "load_instance",
    "make_example_pair",
    "make_holdout",
    "make_mwc_game",
    "make_power_game",
    "make_random_game",
    "make_veto_game",
    "plugin_session",
    "read_trace",
    "required_samples",
    "run_cg",
    "run_cg_mwc",
    "run_ellipsoid_lp",
    "run_ellipsoid_qp",
    "run_yp",
    "run_zs",
    "sampling_oracle",
    "save_instance",
    "seed_constraints",
    "sensitivity_report",
    "solve_full_lp",
    "solve_full_qp",
    "solve_restricted_lp",
    "solve_restricted_qp",
    "tv_along_chain",
    "write_trace",
    "__version__",
]
