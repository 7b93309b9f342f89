"""Ground metric on states and exact 1-Wasserstein distance.

The default metric is absolute label distance, for which the distance
has a closed form in terms of cumulative distributions; general metrics
go through the transportation LP.  For the label metric both routes are
computed and must agree, which gives the verifier a built-in
cross-check on every distance evaluation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linprog import LinearProgram, LpStatus, solve_lp

MARGINAL_TOL = 1e-9
BALL_TOL = 1e-9


class DimensionMismatch(ValueError):
    """Distribution lengths do not match the metric's state count."""


class MetricError(ValueError):
    """The supplied distance matrix is not a metric."""


@dataclass(frozen=True, eq=False)
class GroundMetric:
    """Distance between states used as per-unit transport cost.

    Construct with :meth:`abs_diff` (absolute label distance, the
    default ground metric) or :meth:`from_matrix` (explicit distances).
    """

    matrix: np.ndarray
    labels: tuple[int, ...] | None = None

    @classmethod
    def abs_diff(cls, labels) -> "GroundMetric":
        labels = tuple(int(x) for x in labels)
        if len(set(labels)) != len(labels):
            raise MetricError("labels must be unique")
        arr = np.asarray(labels, dtype=float)
        matrix = np.abs(arr[:, None] - arr[None, :])
        matrix.setflags(write=False)
        return cls(matrix=matrix, labels=labels)

    @classmethod
    def from_matrix(cls, matrix) -> "GroundMetric":
        m = np.asarray(matrix, dtype=float)
        n = m.shape[0]
        if m.shape != (n, n):
            raise MetricError("distance matrix must be square")
        if not np.allclose(m, m.T, atol=0):
            raise MetricError("distance matrix must be symmetric")
        if np.any(np.diag(m) != 0):
            raise MetricError("distance matrix must have a zero diagonal")
        off = m + np.diag(np.full(n, np.inf))
        if np.any(off <= 0):
            raise MetricError("off-diagonal distances must be strictly positive")
        # Triangle inequality, checked over all (i, k, j) triples.
        detour = m[:, :, None] + m[None, :, :]
        if np.any(m[:, None, :] > detour + 1e-12):
            raise MetricError("distance matrix violates the triangle inequality")
        m = m.copy()
        m.setflags(write=False)
        return cls(matrix=m, labels=None)

    @property
    def n_states(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_abs_diff(self) -> bool:
        return self.labels is not None


@dataclass(frozen=True, eq=False)
class AmbiguitySpec:
    """Wasserstein ball radius and ground metric, shared by every
    (state, action) pair."""

    delta: float
    metric: GroundMetric

    def __post_init__(self):
        if not (self.delta >= 0):
            raise ValueError(f"delta must be nonnegative, got {self.delta}")


@dataclass(frozen=True, eq=False)
class Coupling:
    """Transport plan between two distributions over the same states."""

    matrix: np.ndarray

    def marginals(self) -> tuple[np.ndarray, np.ndarray]:
        return self.matrix.sum(axis=1), self.matrix.sum(axis=0)


def _check_distribution(p: np.ndarray, n: int, what: str) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape != (n,):
        raise DimensionMismatch(f"{what} has length {p.shape}, expected {n}")
    if np.any(p < 0) or abs(float(p.sum()) - 1.0) > MARGINAL_TOL:
        raise ValueError(f"{what} is not a probability distribution")
    return p


def _cdf_distance(p_tilde: np.ndarray, p: np.ndarray, labels) -> float:
    """Closed-form W1 on the real line: integral of |CDF difference|."""
    pos = np.asarray(labels, dtype=float)
    order = np.argsort(pos)
    gaps = np.diff(pos[order])
    cdf_diff = np.cumsum(p_tilde[order] - p[order])[:-1]
    return float(np.abs(cdf_diff) @ gaps)


def wasserstein_distance(
    p_tilde, p, metric: GroundMetric
) -> tuple[float, Coupling]:
    """Exact minimum transport cost and an optimal coupling.

    For the label metric the LP result is cross-checked against the
    cumulative-distribution closed form on every call.
    """
    n = metric.n_states
    p_tilde = _check_distribution(p_tilde, n, "first distribution")
    p = _check_distribution(p, n, "second distribution")

    cost = metric.matrix.reshape(-1)
    # Row marginals fix p_tilde, column marginals fix p; the last column
    # constraint is implied by the rest but keeping it preserves the
    # symmetric statement of the program.
    A = np.zeros((2 * n, n * n))
    b = np.concatenate([p_tilde, p])
    for y in range(n):
        A[y, y * n:(y + 1) * n] = 1.0
    for z in range(n):
        A[n + z, z::n] = 1.0
    sol = solve_lp(LinearProgram("min", cost, A, ("=",) * (2 * n), b))
    if sol.status is not LpStatus.OPTIMAL:  # pragma: no cover - always feasible
        raise RuntimeError(f"transport program returned {sol.status}")
    gamma = sol.x.reshape(n, n)
    distance = float(sol.objective)

    if metric.is_abs_diff:
        closed_form = _cdf_distance(p_tilde, p, metric.labels)
        assert abs(distance - closed_form) < 1e-9, (
            f"coupling LP ({distance!r}) disagrees with CDF form "
            f"({closed_form!r})"
        )

    return distance, Coupling(matrix=gamma)


def in_ambiguity_ball(p_tilde, p, spec: AmbiguitySpec) -> bool:
    """Inclusive ball membership: W(p_tilde, p) <= delta (+ tolerance)."""
    distance, _ = wasserstein_distance(p_tilde, p, spec.metric)
    return distance <= spec.delta + BALL_TOL
