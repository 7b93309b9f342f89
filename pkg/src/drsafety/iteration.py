"""Robust Q-iteration to a fixed point and p-safety verdicts.

Q starts at zero and each sweep applies the robust backup to every
(taboo state, action) pair; the backup operator is monotone and Q = 0
sits below the fixed point, so iterates increase componentwise until
the sup-norm change drops under the threshold.  The per-state upper
bound on the robust safety function is the policy average of the fixed
point, and a state is certified p-safe when that bound is at most p.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .backup import BackupSolution, robust_backup
from .metric import AmbiguitySpec, GroundMetric
from .model import MdpModel, PolicyTable


class InvalidP(ValueError):
    """Safety level outside (0, 1)."""


class NotConverged(RuntimeError):
    """Sweep budget exhausted before the residual dropped under theta.

    ``last_delta`` is the final sup-norm residual; ``radius`` is the
    ambiguity radius of the failing run when raised from a sweep.
    """

    def __init__(self, sweeps: int, last_delta: float, radius: float | None = None):
        self.sweeps = sweeps
        self.last_delta = last_delta
        self.radius = radius
        tag = "" if radius is None else f" (ambiguity radius {radius})"
        super().__init__(
            f"no fixed point after {sweeps} sweeps{tag}; "
            f"last residual {last_delta:.3e}"
        )


@dataclass(frozen=True)
class IterationConfig:
    theta: float = 1e-8
    max_sweeps: int = 100_000
    update_scheme: str = "jacobi"

    def __post_init__(self):
        if not (self.theta > 0):
            raise ValueError("theta must be positive")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be at least 1")
        if self.update_scheme not in ("jacobi", "gauss-seidel"):
            raise ValueError(f"unknown update scheme {self.update_scheme!r}")


@dataclass(frozen=True, eq=False)
class QTable:
    """Robust Q values over (taboo state, action) pairs."""

    entries: Mapping[tuple[int, int], float]

    def __getitem__(self, pair: tuple[int, int]) -> float:
        return self.entries[pair]

    def items(self):
        return self.entries.items()


@dataclass(frozen=True, eq=False)
class FixedPointResult:
    """Converged table plus iteration diagnostics."""

    q_table: QTable
    sweeps_used: int
    final_residual: float
    lambda_star: Mapping[tuple[int, int], float]
    monotone_slack: float  # most negative componentwise step seen; >= 0 ideally


@dataclass(frozen=True, eq=False)
class SafetyReport:
    """Verdicts and diagnostics for one ambiguity radius."""

    delta: float
    p: float
    J: Mapping[int, float]
    state_verdicts: Mapping[int, bool]
    mdp_verdict: bool
    sweeps_used: int
    final_delta_residual: float
    lambda_star: Mapping[tuple[int, int], float]


def run_iteration(
    model: MdpModel,
    policy: PolicyTable,
    spec: AmbiguitySpec,
    cfg: IterationConfig = IterationConfig(),
) -> FixedPointResult:
    """Iterate the robust backup from Q = 0 until the residual is < theta."""
    pairs = model.pairs()
    rows = [model.row(x, a) for (x, a) in pairs]
    n = model.n_states

    # v = v_base + W q reconstructs cost-plus-continuation from the table.
    v_base = model.forbidden_mask.astype(float)
    W = np.zeros((n, len(pairs)))
    for k, (x, a) in enumerate(pairs):
        W[model.index_of(x), k] = policy.prob(x, a)

    q = np.zeros(len(pairs))
    gauss_seidel = cfg.update_scheme == "gauss-seidel"
    mono_slack = 0.0

    for sweep in range(1, cfg.max_sweeps + 1):
        v = v_base + W @ q
        q_new = q.copy()
        solutions: list[BackupSolution] = []
        for k, row in enumerate(rows):
            sol = robust_backup(row, v, spec)
            solutions.append(sol)
            q_new[k] = sol.value
            if gauss_seidel:
                v += W[:, k] * (q_new[k] - q[k])
        step = q_new - q
        residual = float(np.abs(step).max())
        mono_slack = min(mono_slack, float(step.min()))
        q = q_new
        if residual < cfg.theta:
            return FixedPointResult(
                q_table=QTable(dict(zip(pairs, map(float, q)))),
                sweeps_used=sweep,
                final_residual=residual,
                lambda_star={
                    pair: sol.lambda_star for pair, sol in zip(pairs, solutions)
                },
                monotone_slack=mono_slack,
            )
    raise NotConverged(cfg.max_sweeps, residual)


def robust_q_iteration(
    model: MdpModel,
    policy: PolicyTable,
    spec: AmbiguitySpec,
    cfg: IterationConfig = IterationConfig(),
) -> QTable:
    """Fixed point of the robust backup over all (taboo, action) pairs."""
    return run_iteration(model, policy, spec, cfg).q_table


def safety_upper_bound(q: QTable, policy: PolicyTable) -> dict[int, float]:
    """Per-state bound: policy average of the robust Q values."""
    J: dict[int, float] = {}
    for (x, a), value in q.items():
        J[x] = J.get(x, 0.0) + policy.prob(x, a) * value
    return J


@dataclass(frozen=True)
class PSafetyVerdict:
    per_state: Mapping[int, bool]
    mdp_safe: bool


def verify_p_safety(J: Mapping[int, float], p: float) -> PSafetyVerdict:
    """Inclusive comparison of each bound against the safety level.

    The comparison itself is exact; conservatism comes from J being an
    upper bound, so "unsafe" means "not certified".
    """
    if not (0.0 < p < 1.0):
        raise InvalidP(f"p must lie in (0, 1), got {p}")
    per_state = {x: bound <= p for x, bound in J.items()}
    return PSafetyVerdict(per_state=per_state, mdp_safe=all(per_state.values()))


def _report(
    model: MdpModel,
    policy: PolicyTable,
    spec: AmbiguitySpec,
    p: float,
    cfg: IterationConfig,
) -> SafetyReport:
    result = run_iteration(model, policy, spec, cfg)
    J = safety_upper_bound(result.q_table, policy)
    J = {x: J[x] for x in model.taboo_labels}
    verdict = verify_p_safety(J, p)
    return SafetyReport(
        delta=spec.delta,
        p=p,
        J=J,
        state_verdicts=verdict.per_state,
        mdp_verdict=verdict.mdp_safe,
        sweeps_used=result.sweeps_used,
        final_delta_residual=result.final_residual,
        lambda_star=dict(result.lambda_star),
    )


def solve_delta(
    model: MdpModel,
    policy: PolicyTable,
    delta: float,
    p: float,
    cfg: IterationConfig = IterationConfig(),
    metric: GroundMetric | None = None,
) -> SafetyReport:
    """One radius end to end: iterate, bound, verdict."""
    metric = metric or GroundMetric.abs_diff(model.labels)
    return _report(model, policy, AmbiguitySpec(delta, metric), p, cfg)


def sweep_delta(
    model: MdpModel,
    policy: PolicyTable,
    deltas: Sequence[float],
    p: float,
    cfg: IterationConfig = IterationConfig(),
    metric: GroundMetric | None = None,
) -> list[SafetyReport]:
    """Independent runs over an ascending radius grid, fresh Q = 0 each."""
    metric = metric or GroundMetric.abs_diff(model.labels)
    reports = []
    for delta in deltas:
        try:
            reports.append(_report(model, policy, AmbiguitySpec(delta, metric), p, cfg))
        except NotConverged as err:
            raise NotConverged(err.sweeps, err.last_delta, radius=delta) from None
    return reports


def largest_certified_delta(reports: Sequence[SafetyReport]) -> float | None:
    """Largest swept radius whose report certifies the MDP, if any."""
    safe = [r.delta for r in reports if r.mdp_verdict]
    return max(safe) if safe else None
