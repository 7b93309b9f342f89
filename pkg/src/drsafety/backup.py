"""One distributionally robust Bellman backup, solved exactly.

The worst-case expectation of cost-plus-continuation over a Wasserstein
ball dualizes into a one-dimensional convex program over a multiplier
``lam >= 0``:

    F(lam) = lam * delta + sum_y P(y) * max_l (v(l) - lam * d(l, y))

F is piecewise-linear convex, so its minimum sits at 0 or at a crossing
of two of the inner affine pieces.  Enumerating those crossings gives
the exact optimum with no line-search tolerance.  An independent route
solves the equivalent epigraph LP; both must agree.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .linprog import LinearProgram, LpStatus, solve_lp
from .metric import MARGINAL_TOL, AmbiguitySpec
from .model import MdpModel, PolicyTable, StateClass

VALUE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class BackupSolution:
    """Optimal backup value with its dual multiplier and witnesses.

    ``argmax_map[i]`` is the state index the adversary would send mass at
    state index ``i`` to; ``h[i]`` is the attained inner maximum there
    (the epigraph variable of the LP formulation).
    """

    value: float
    lambda_star: float
    argmax_map: tuple[int, ...]
    h: np.ndarray


def value_vector(model: MdpModel, policy: PolicyTable,
                 q: Mapping[tuple[int, int], float]) -> np.ndarray:
    """Cost-plus-continuation per state: 1 on forbidden, 0 on goal,
    policy-averaged Q on taboo states."""
    v = np.zeros(model.n_states)
    for i, (lab, cls) in enumerate(zip(model.labels, model.classes)):
        if cls is StateClass.FORBIDDEN:
            v[i] = 1.0
        elif cls is StateClass.TABOO:
            v[i] = sum(
                policy.prob(lab, a) * q[(lab, a)] for a in model.actions_at(lab)
            )
    return v


def _check_backup_inputs(kernel_row, values, spec: AmbiguitySpec):
    n = spec.metric.n_states
    row = np.asarray(kernel_row, dtype=float)
    v = np.asarray(values, dtype=float)
    if row.shape != (n,) or v.shape != (n,):
        raise ValueError(f"row and values must have length {n}")
    if np.any(row < 0) or abs(float(row.sum()) - 1.0) > MARGINAL_TOL:
        raise ValueError("kernel row is not a probability distribution")
    if np.any(v < -VALUE_TOL) or np.any(v > 1 + VALUE_TOL):
        raise ValueError("values must lie in [0, 1]")
    return row, v


def _clip_unit(value: float) -> float:
    if value < -VALUE_TOL or value > 1 + VALUE_TOL:
        raise AssertionError(f"backup value {value!r} escaped [0, 1]")
    return min(max(value, 0.0), 1.0)


def candidate_multipliers(row: np.ndarray, values: np.ndarray,
                          distances: np.ndarray) -> np.ndarray:
    """Sorted candidate set for the outer minimization: 0 plus every
    positive crossing of two inner pieces, for each supported y."""
    support = np.flatnonzero(row > 0.0)
    dv = values[:, None] - values[None, :]
    cands = [np.zeros(1)]
    for y in support:
        dy = distances[:, y]
        dd = dy[:, None] - dy[None, :]
        # dd is (l1, l2): equal distances never cross.
        with np.errstate(divide="ignore", invalid="ignore"):
            lam = np.where(dd != 0.0, dv / dd, -1.0)
        cands.append(lam[lam > 0.0])
    return np.unique(np.concatenate(cands))


def robust_backup(kernel_row, values, spec: AmbiguitySpec) -> BackupSolution:
    """Exact backup by breakpoint enumeration.

    Among multipliers attaining the minimum, the smallest is reported;
    inner maxima break ties toward the lowest state index.  The flat
    tail of F beyond the last crossing realizes the ``delta = 0``
    reduction (plain expectation) exactly.
    """
    row, v = _check_backup_inputs(kernel_row, values, spec)
    D = spec.metric.matrix
    support = np.flatnonzero(row > 0.0)
    lams = candidate_multipliers(row, v, D)

    # g[t, s] = max_l (v(l) - lam_t * d(l, support_s))
    g = (v[None, :, None] - lams[:, None, None] * D[None, :, support]).max(axis=1)
    F = lams * spec.delta + g @ row[support]
    k = int(np.argmin(F))  # first occurrence = smallest minimizing lam
    lam_star = float(lams[k])

    scores = v[:, None] - lam_star * D
    return BackupSolution(
        value=_clip_unit(float(F[k])),
        lambda_star=lam_star,
        argmax_map=tuple(int(i) for i in scores.argmax(axis=0)),
        h=scores.max(axis=0),
    )


def robust_backup_epigraph(kernel_row, values, spec: AmbiguitySpec) -> BackupSolution:
    """Same backup through the epigraph linear program.

    Variables are the multiplier and one upper bound ``h(y)`` per state;
    one constraint per (y, l) pair keeps ``h(y)`` above every inner
    affine piece.  Agrees with :func:`robust_backup` to LP tolerance.
    """
    row, v = _check_backup_inputs(kernel_row, values, spec)
    D = spec.metric.matrix
    n = D.shape[0]

    c = np.concatenate([[spec.delta], row])
    A = np.zeros((n * n, n + 1))
    b = np.zeros(n * n)
    for y in range(n):
        block = slice(y * n, (y + 1) * n)
        A[block, 0] = -D[:, y]
        A[block, 1 + y] = -1.0
        b[block] = -v
    lower = np.concatenate([[0.0], np.full(n, -np.inf)])
    upper = np.full(n + 1, np.inf)
    sol = solve_lp(LinearProgram("min", c, A, ("<=",) * (n * n), b,
                                 lower=lower, upper=upper))
    if sol.status is not LpStatus.OPTIMAL:  # pragma: no cover - always feasible
        raise RuntimeError(f"epigraph program returned {sol.status}")

    lam_star = float(sol.x[0])
    scores = v[:, None] - lam_star * D
    return BackupSolution(
        value=_clip_unit(float(sol.objective)),
        lambda_star=lam_star,
        argmax_map=tuple(int(i) for i in scores.argmax(axis=0)),
        h=sol.x[1:].copy(),
    )
