"""Dense two-phase simplex for small linear programs.

Built for desk-scale problems (up to roughly 150 variables and
constraints): deterministic pivoting with Bland's anti-cycling rule,
general row senses, per-variable bounds, and dual multipliers that
certify the reported optimum.  Every optimal solve is self-checked for
primal feasibility, complementary slackness and strong duality before
it is returned.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

PIVOT_TOL = 1e-10
FEAS_TOL = 1e-8
CERT_TOL = 1e-7


class LpError(RuntimeError):
    """Numerical failure inside the solver."""


class IterationLimit(LpError):
    """Pivot budget exhausted; signals numerical pathology."""


class LpStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """min/max ``c @ x`` subject to ``A x (<=,=,>=) b`` and variable bounds.

    Bounds default to ``[0, +inf)`` per variable.
    """

    sense: str
    c: np.ndarray
    A: np.ndarray
    row_senses: tuple[str, ...]
    b: np.ndarray
    lower: np.ndarray = None
    upper: np.ndarray = None

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        A = np.asarray(self.A, dtype=float).reshape(-1, c.size)
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        lower = (np.zeros(c.size) if self.lower is None
                 else np.asarray(self.lower, dtype=float))
        upper = (np.full(c.size, np.inf) if self.upper is None
                 else np.asarray(self.upper, dtype=float))
        if self.sense not in ("min", "max"):
            raise ValueError(f"sense must be 'min' or 'max', got {self.sense!r}")
        if A.shape != (b.size, c.size) or len(self.row_senses) != b.size:
            raise ValueError("inconsistent program dimensions")
        if any(s not in ("<=", "=", ">=") for s in self.row_senses):
            raise ValueError("row senses must be one of '<=', '=', '>='")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(A))
                and np.all(np.isfinite(b))):
            raise ValueError("objective, matrix and rhs must be finite")
        if lower.shape != c.shape or upper.shape != c.shape:
            raise ValueError("bounds must match the number of variables")
        if np.any(lower > upper):
            raise ValueError("lower bound exceeds upper bound")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "row_senses", tuple(self.row_senses))

    @property
    def n_vars(self) -> int:
        return self.c.size

    @property
    def n_rows(self) -> int:
        return self.b.size


@dataclass(frozen=True, eq=False)
class LpSolution:
    """Solver outcome; ``x``/``duals``/``objective`` are None unless optimal.

    ``duals[i]`` is the sensitivity of the optimal objective to ``b[i]``
    (shadow price in the user's min/max orientation).
    """

    status: LpStatus
    objective: float | None = None
    x: np.ndarray | None = None
    duals: np.ndarray | None = None
    pivots: int = 0


def _pivot(T: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    for r in range(T.shape[0]):
        if r != row and T[r, col] != 0.0:
            T[r] -= T[r, col] * T[row]
    basis[row] = col


def _bland_entering(cost_row: np.ndarray, eligible: np.ndarray) -> int | None:
    neg = np.flatnonzero(eligible & (cost_row < -PIVOT_TOL))
    return int(neg[0]) if neg.size else None


def _bland_leaving(T: np.ndarray, basis: np.ndarray, m: int, col: int) -> int | None:
    pos = T[:m, col] > PIVOT_TOL
    if not np.any(pos):
        return None
    ratios = np.full(m, np.inf)
    ratios[pos] = T[:m, -1][pos] / T[:m, col][pos]
    best = ratios.min()
    ties = np.flatnonzero(ratios <= best + PIVOT_TOL)
    return int(ties[np.argmin(basis[ties])])


def solve_lp(lp: LinearProgram, max_pivots: int | None = None) -> LpSolution:
    """Solve exactly via two-phase dense simplex with Bland's rule.

    Deterministic for identical input.  Raises :class:`IterationLimit`
    after ``max_pivots`` pivots (default ``10 * (m + n) ** 2``) and
    :class:`LpError` if the optimum fails its own dual certificate;
    neither is ever silently reported as optimal.
    """
    if max_pivots is None:
        max_pivots = 10 * (lp.n_rows + lp.n_vars) ** 2

    sense_sign = 1.0 if lp.sense == "min" else -1.0
    c_user = sense_sign * lp.c

    # Canonical variables t >= 0: x_j = offset_j + sum(mult * t_col).
    # col_of[j] holds (canonical column, multiplier) pairs for user var j.
    cols: list[np.ndarray] = []
    c_can: list[float] = []
    col_of: list[list[tuple[int, float]]] = []
    offsets = np.zeros(lp.n_vars)
    extra_rows: list[tuple[int, float]] = []  # (canonical col, cap) for u-l caps
    for j in range(lp.n_vars):
        lo, hi = lp.lower[j], lp.upper[j]
        a_col = lp.A[:, j]
        if np.isneginf(lo) and np.isposinf(hi):
            cols.append(a_col)
            cols.append(-a_col)
            c_can.extend([c_user[j], -c_user[j]])
            col_of.append([(len(cols) - 2, 1.0), (len(cols) - 1, -1.0)])
        elif np.isneginf(lo):
            offsets[j] = hi
            cols.append(-a_col)
            c_can.append(-c_user[j])
            col_of.append([(len(cols) - 1, -1.0)])
        else:
            offsets[j] = lo
            cols.append(a_col)
            c_can.append(c_user[j])
            col_of.append([(len(cols) - 1, 1.0)])
            if np.isfinite(hi):
                extra_rows.append((len(cols) - 1, hi - lo))

    n_struct = len(cols)
    A0 = np.column_stack(cols) if n_struct else np.zeros((lp.n_rows, 0))
    b0 = lp.b - lp.A @ offsets
    senses = list(lp.row_senses)
    for col, cap in extra_rows:
        row = np.zeros(n_struct)
        row[col] = 1.0
        A0 = np.vstack([A0, row])
        b0 = np.append(b0, cap)
        senses.append("<=")

    m = A0.shape[0]
    n_slack = sum(1 for s in senses if s != "=")
    A_full = np.hstack([A0, np.zeros((m, n_slack))])
    k = n_struct
    for i, s in enumerate(senses):
        if s == "<=":
            A_full[i, k] = 1.0
            k += 1
        elif s == ">=":
            A_full[i, k] = -1.0
            k += 1
    c_full = np.concatenate([np.asarray(c_can), np.zeros(n_slack)])

    row_sign = np.ones(m)
    neg = b0 < 0
    A_full[neg] *= -1.0
    b0 = np.where(neg, -b0, b0)
    row_sign[neg] = -1.0

    # Tableau: [A | I_artificial | b]; last two rows are the phase-2 and
    # phase-1 cost rows.  Artificial columns stay in the tableau (barred
    # from entering) so the final duals can be read off the cost row.
    n_total = n_struct + n_slack + m
    art0 = n_struct + n_slack
    T = np.zeros((m + 2, n_total + 1))
    T[:m, :art0] = A_full
    T[:m, art0:art0 + m] = np.eye(m)
    T[:m, -1] = b0
    T[m, :art0] = c_full
    T[m + 1, :art0] = -A_full.sum(axis=0)
    T[m + 1, -1] = -b0.sum()
    basis = np.arange(art0, art0 + m)

    pivots = 0
    eligible = np.ones(n_total, dtype=bool)

    def run_phase(cost_row_idx: int, rows: int) -> int | None:
        """Pivot until optimal; returns an entering col on unboundedness."""
        nonlocal pivots
        while True:
            col = _bland_entering(T[cost_row_idx, :-1], eligible)
            if col is None:
                return None
            row = _bland_leaving(T, basis, rows, col)
            if row is None:
                return col
            if pivots >= max_pivots:
                raise IterationLimit(
                    f"simplex exceeded {max_pivots} pivots "
                    f"({lp.n_rows} rows, {lp.n_vars} vars)"
                )
            leaving = basis[row]
            _pivot(T, basis, row, col)
            if leaving >= art0:  # artificials never re-enter
                eligible[leaving] = False
            pivots += 1

    # Phase 1: drive the artificial infeasibility to zero.
    if run_phase(m + 1, m) is not None:  # pragma: no cover - phase 1 is bounded
        raise LpError("phase 1 reported unbounded")
    if -T[m + 1, -1] > FEAS_TOL:
        return LpSolution(status=LpStatus.INFEASIBLE, pivots=pivots)

    # Remove artificials still basic: pivot them out where the row has
    # structure; rows without any are redundant and stay parked at zero.
    eligible[art0:] = False
    for i in range(m):
        if basis[i] >= art0 and T[i, -1] <= FEAS_TOL:
            nz = np.flatnonzero(np.abs(T[i, :art0]) > PIVOT_TOL)
            if nz.size:
                _pivot(T, basis, i, int(nz[0]))
                pivots += 1

    if run_phase(m, m) is not None:
        return LpSolution(status=LpStatus.UNBOUNDED, pivots=pivots)

    t = np.zeros(n_total)
    t[basis] = T[:m, -1]
    if np.any(t[art0:] > FEAS_TOL):
        # A parked artificial regained value: its row was not actually
        # satisfiable by structural variables.
        return LpSolution(status=LpStatus.INFEASIBLE, pivots=pivots)

    x = offsets.copy()
    for j, parts in enumerate(col_of):
        for col_idx, mult in parts:
            x[j] += mult * t[col_idx]
    objective = float(lp.c @ x)

    # Internal duals from the artificial columns of the phase-2 cost row.
    y = -T[m, art0:art0 + m]
    _certify(A_full, b0, c_full, t[:art0], y)
    duals = row_sign[:lp.n_rows] * y[:lp.n_rows] * sense_sign

    return LpSolution(
        status=LpStatus.OPTIMAL,
        objective=objective,
        x=x,
        duals=duals,
        pivots=pivots,
    )


def _certify(A, b, c, t, y) -> None:
    """Dual certificate on the canonical equality form; raise on failure."""
    scale = max(1.0, float(np.abs(b).max(initial=0.0)), float(np.abs(c).max(initial=0.0)))
    primal_res = float(np.abs(A @ t - b).max(initial=0.0))
    if primal_res > FEAS_TOL * scale or float(t.min(initial=0.0)) < -FEAS_TOL:
        raise LpError(f"optimal basis fails primal feasibility ({primal_res:.2e})")
    reduced = c - A.T @ y
    if float(reduced.min(initial=0.0)) < -CERT_TOL * scale:
        raise LpError("optimal basis fails dual feasibility")
    slack = float(np.abs(t * reduced).max(initial=0.0))
    if slack > CERT_TOL * scale:
        raise LpError(f"complementary slackness violated ({slack:.2e})")
    gap = abs(float(c @ t) - float(y @ b))
    if gap > CERT_TOL * scale:
        raise LpError(f"strong duality gap {gap:.2e}")
