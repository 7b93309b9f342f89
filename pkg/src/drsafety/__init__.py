"""Distributionally robust p-safety verification for finite MDPs.

Given a nominal transition kernel, a fixed evaluation policy, and a
Wasserstein ball of kernel perturbations, the package computes an upper
bound on the worst-case probability of reaching a forbidden state
before a goal state, and certifies whether that bound stays under a
safety level p.
"""
from .backup import BackupSolution, robust_backup, robust_backup_epigraph, value_vector
from .estimator import RobustSafetyVerifier
from .iteration import (
    InvalidP,
    IterationConfig,
    NotConverged,
    QTable,
    SafetyReport,
    largest_certified_delta,
    robust_q_iteration,
    safety_upper_bound,
    solve_delta,
    sweep_delta,
    verify_p_safety,
)
from .linprog import IterationLimit, LinearProgram, LpSolution, LpStatus, solve_lp
from .metric import (
    AmbiguitySpec,
    Coupling,
    DimensionMismatch,
    GroundMetric,
    in_ambiguity_ball,
    wasserstein_distance,
)
from .model import (
    DuplicateState,
    EmptyTaboo,
    KernelOnTerminal,
    MdpModel,
    MissingKernelRow,
    ModelError,
    NegativeProbability,
    PolicyTable,
    RowSumError,
    SingularSystem,
    StateClass,
    one_step_cost,
    standard_safety,
    uniform_policy,
    validate_model,
    validate_policy,
)
from .modelfile import (
    Defaults,
    DuplicateEntry,
    ModelSyntaxError,
    ParsedModel,
    bundled_model_path,
    parse_model,
    parse_model_text,
    serialize_model,
)
from .oracle import (
    AdversarialRow,
    HittingEstimate,
    NoCandidate,
    Trajectory,
    monte_carlo_hitting,
    primal_inner_sup,
    random_instance,
    reconcile_baseline,
    sample_trajectory,
    worst_case_kernel,
)

__version__ = "0.1.0"
