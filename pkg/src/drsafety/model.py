"""Finite MDP domain model with a goal/forbidden/taboo partition.

States carry integer labels that double as their position on the real
line (the ground metric for transition ambiguity is label distance by
default).  Goal and forbidden states are terminal; kernel rows exist
exactly for (taboo state, action) pairs.  The module also provides the
exact nominal-kernel safety baseline via a direct linear solve.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Mapping

import numpy as np

ROW_SUM_TOL = 1e-9


class ModelError(ValueError):
    """Base class for model and policy validation failures."""


class RowSumError(ModelError):
    """A kernel or policy row does not sum to 1 within tolerance."""


class NegativeProbability(ModelError):
    """A probability entry is negative."""


class DuplicateState(ModelError):
    """Two states share the same label."""


class KernelOnTerminal(ModelError):
    """A kernel row was supplied for a goal or forbidden state."""


class MissingKernelRow(ModelError):
    """A taboo state has no kernel row for a required action."""


class EmptyTaboo(ModelError):
    """The model has no taboo states."""


class SingularSystem(ModelError):
    """The nominal safety system has no unique solution.

    Raised when some taboo states cannot reach any terminal state, which
    makes the hitting probability underdetermined.
    """

    def __init__(self, states):
        self.states = tuple(states)
        super().__init__(
            "safety system is singular; no terminal state reachable from "
            f"taboo states {list(self.states)}"
        )


class UnreachableTerminalWarning(UserWarning):
    """Some taboo state cannot reach a terminal state under the nominal kernel."""


class StateClass(Enum):
    GOAL = "goal"
    FORBIDDEN = "forbidden"
    TABOO = "taboo"


@dataclass(frozen=True, eq=False)
class MdpModel:
    """Canonical, immutable MDP: states sorted by label, validated kernel.

    Build instances through :func:`validate_model`; the constructor does
    not re-check invariants.
    """

    labels: tuple[int, ...]
    classes: tuple[StateClass, ...]
    actions: tuple[int, ...]
    kernel: Mapping[tuple[int, int], np.ndarray]

    @property
    def n_states(self) -> int:
        return len(self.labels)

    def index_of(self, label: int) -> int:
        return self._index[label]

    @property
    def _index(self) -> dict[int, int]:
        cached = self.__dict__.get("_index_cache")
        if cached is None:
            cached = {lab: i for i, lab in enumerate(self.labels)}
            self.__dict__["_index_cache"] = cached
        return cached

    def state_class(self, label: int) -> StateClass:
        return self.classes[self.index_of(label)]

    @property
    def taboo_labels(self) -> tuple[int, ...]:
        return tuple(
            lab for lab, cls in zip(self.labels, self.classes) if cls is StateClass.TABOO
        )

    @property
    def goal_mask(self) -> np.ndarray:
        return np.array([c is StateClass.GOAL for c in self.classes])

    @property
    def forbidden_mask(self) -> np.ndarray:
        return np.array([c is StateClass.FORBIDDEN for c in self.classes])

    @property
    def taboo_mask(self) -> np.ndarray:
        return np.array([c is StateClass.TABOO for c in self.classes])

    def actions_at(self, label: int) -> tuple[int, ...]:
        return tuple(a for a in self.actions if (label, a) in self.kernel)

    def pairs(self) -> tuple[tuple[int, int], ...]:
        """All (taboo label, action) pairs in the canonical sweep order."""
        return tuple(
            (x, a) for x in self.taboo_labels for a in self.actions_at(x)
        )

    def row(self, x: int, a: int) -> np.ndarray:
        return self.kernel[(x, a)]

    def with_kernel(self, kernel: Mapping[tuple[int, int], np.ndarray]) -> "MdpModel":
        """Same state space and actions with replacement kernel rows.

        Rows are validated like in :func:`validate_model`; used to install
        adversarial kernels produced by the transport oracle.
        """
        rows = {}
        for (x, a) in self.pairs():
            row = np.asarray(kernel[(x, a)], dtype=float)
            if row.shape != (self.n_states,):
                raise ModelError(f"kernel row for ({x},{a}) has wrong length")
            _check_row(row, f"kernel row for state {x}, action {a}")
            row = row.copy()
            row.setflags(write=False)
            rows[(x, a)] = row
        return MdpModel(self.labels, self.classes, self.actions, rows)


@dataclass(frozen=True, eq=False)
class PolicyTable:
    """Stationary stochastic evaluation policy on taboo states."""

    probs: Mapping[tuple[int, int], float]

    def prob(self, x: int, a: int) -> float:
        return self.probs.get((x, a), 0.0)

    def dist_at(self, model: MdpModel, x: int) -> np.ndarray:
        """Probability per available action of taboo state x."""
        return np.array([self.prob(x, a) for a in model.actions_at(x)])


def _check_row(row: np.ndarray, what: str) -> None:
    if np.any(row < 0):
        bad = float(row[row < 0].min())
        raise NegativeProbability(f"{what} has negative entry {bad}")
    total = float(row.sum())
    if abs(total - 1.0) > ROW_SUM_TOL:
        raise RowSumError(f"{what} sums to {total!r}, not 1 within {ROW_SUM_TOL}")


def validate_model(raw_model: Mapping) -> MdpModel:
    """Canonicalize and validate an untyped model description.

    ``raw_model`` is a mapping with keys ``states`` (iterable of
    ``(label, class)`` where class is a :class:`StateClass` or its string
    value), ``actions`` (iterable of ints) and ``kernel`` (mapping
    ``(from_label, action) -> {to_label: prob}``).

    Raises subclasses of :class:`ModelError`; emits
    :class:`UnreachableTerminalWarning` when some taboo state cannot
    reach a terminal state under the nominal kernel.
    """
    states = list(raw_model["states"])
    labels_seen: set[int] = set()
    pairs: list[tuple[int, StateClass]] = []
    for label, cls in states:
        label = int(label)
        if label in labels_seen:
            raise DuplicateState(f"duplicate state label {label}")
        labels_seen.add(label)
        pairs.append((label, cls if isinstance(cls, StateClass) else StateClass(cls)))
    pairs.sort(key=lambda lc: lc[0])
    labels = tuple(lab for lab, _ in pairs)
    classes = tuple(cls for _, cls in pairs)

    taboo = [lab for lab, cls in pairs if cls is StateClass.TABOO]
    if not taboo:
        raise EmptyTaboo("model has no taboo states")
    if all(cls is StateClass.TABOO for cls in classes):
        raise ModelError("model has no goal or forbidden states; hitting is undefined")

    actions = tuple(sorted(int(a) for a in raw_model["actions"]))
    if len(set(actions)) != len(actions):
        raise ModelError("duplicate action id")
    if not actions:
        raise ModelError("model has no actions")

    index = {lab: i for i, lab in enumerate(labels)}
    class_of = dict(pairs)
    kernel: dict[tuple[int, int], np.ndarray] = {}
    for (x, a), entries in raw_model["kernel"].items():
        x, a = int(x), int(a)
        if x not in index:
            raise ModelError(f"kernel row for unknown state {x}")
        if a not in actions:
            raise ModelError(f"kernel row for state {x} uses unknown action {a}")
        if class_of[x] is not StateClass.TABOO:
            raise KernelOnTerminal(f"kernel row supplied for terminal state {x}")
        row = np.zeros(len(labels))
        for to, prob in entries.items():
            to = int(to)
            if to not in index:
                raise ModelError(f"transition from {x} to unknown state {to}")
            row[index[to]] = float(prob)
        _check_row(row, f"kernel row for state {x}, action {a}")
        row.setflags(write=False)
        kernel[(x, a)] = row

    for x in taboo:
        if not any((x, a) in kernel for a in actions):
            raise MissingKernelRow(f"taboo state {x} has no kernel row")

    model = MdpModel(labels, classes, actions, kernel)
    stuck = _terminal_unreachable(model)
    if stuck:
        warnings.warn(
            UnreachableTerminalWarning(
                f"no terminal state reachable from taboo states {stuck} "
                "under the nominal kernel"
            ),
            stacklevel=2,
        )
    return model


def validate_policy(model: MdpModel, raw_probs: Mapping) -> PolicyTable:
    """Validate policy entries against a model.

    Entries must reference (taboo state, available action) pairs; actions
    not listed for a state get probability 0.  Per-state probabilities
    must be nonnegative and sum to 1 within tolerance.
    """
    probs: dict[tuple[int, int], float] = {}
    for (x, a), p in raw_probs.items():
        x, a = int(x), int(a)
        if x not in model.labels or model.state_class(x) is not StateClass.TABOO:
            raise ModelError(f"policy entry for non-taboo state {x}")
        if (x, a) not in model.kernel:
            raise MissingKernelRow(f"policy entry for state {x} uses action {a} "
                                   "with no kernel row")
        p = float(p)
        if p < 0:
            raise NegativeProbability(f"policy probability for ({x},{a}) is {p}")
        probs[(x, a)] = p
    for x in model.taboo_labels:
        total = sum(probs.get((x, a), 0.0) for a in model.actions_at(x))
        if not any((x, a) in probs for a in model.actions_at(x)):
            raise ModelError(f"policy has no entries for taboo state {x}")
        if abs(total - 1.0) > ROW_SUM_TOL:
            raise RowSumError(
                f"policy for state {x} sums to {total!r}, not 1 within {ROW_SUM_TOL}"
            )
    return PolicyTable(probs)


def uniform_policy(model: MdpModel) -> PolicyTable:
    """Uniform distribution over each taboo state's available actions."""
    probs = {}
    for x in model.taboo_labels:
        acts = model.actions_at(x)
        for a in acts:
            probs[(x, a)] = 1.0 / len(acts)
    return PolicyTable(probs)


def one_step_cost(model: MdpModel, x: int, a: int, kernel_row: np.ndarray) -> float:
    """Probability that the next state is forbidden, under the given row."""
    if model.state_class(x) is not StateClass.TABOO:
        raise ModelError(f"state {x} is not taboo")
    if a not in model.actions:
        raise ModelError(f"unknown action {a}")
    row = np.asarray(kernel_row, dtype=float)
    _check_row(row, f"kernel row for state {x}, action {a}")
    return float(row[model.forbidden_mask].sum())


def _terminal_unreachable(model: MdpModel, policy: PolicyTable | None = None) -> tuple[int, ...]:
    """Taboo labels from which no terminal state is reachable.

    With a policy, only actions with positive policy probability count as
    edges; without one, any action's transitions do.
    """
    n = model.n_states
    adj = np.zeros((n, n), dtype=bool)
    for (x, a), row in model.kernel.items():
        if policy is not None and policy.prob(x, a) <= 0:
            continue
        adj[model.index_of(x)] |= row > 0

    can_reach = ~model.taboo_mask  # terminal states reach themselves
    while True:
        reached = can_reach | (adj @ can_reach)
        if np.array_equal(reached, can_reach):
            break
        can_reach = reached
    return tuple(
        lab
        for lab, cls, ok in zip(model.labels, model.classes, can_reach)
        if cls is StateClass.TABOO and not ok
    )


def standard_safety(model: MdpModel, policy: PolicyTable) -> dict[int, float]:
    """Exact nominal-kernel probability of hitting forbidden before goal.

    Solves the linear system
    ``S(x) = sum_a pi(a|x) sum_y P_{x,a}(y) (1_U(y) + 1_H(y) S(y))``
    by direct elimination with partial pivoting.  Raises
    :class:`SingularSystem` naming the taboo states from which no
    terminal state is reachable under the policy.
    """
    stuck = _terminal_unreachable(model, policy)
    if stuck:
        raise SingularSystem(stuck)

    taboo = model.taboo_labels
    k = len(taboo)
    tpos = {x: i for i, x in enumerate(taboo)}
    M = np.zeros((k, k))
    b = np.zeros(k)
    forbidden = model.forbidden_mask
    for (x, a), row in model.kernel.items():
        w = policy.prob(x, a)
        if w == 0.0:
            continue
        i = tpos[x]
        b[i] += w * float(row[forbidden].sum())
        for y in taboo:
            M[i, tpos[y]] += w * row[model.index_of(y)]

    try:
        s = np.linalg.solve(np.eye(k) - M, b)
    except np.linalg.LinAlgError:  # pragma: no cover - reachability should catch
        raise SingularSystem(taboo) from None

    residual = np.abs((np.eye(k) - M) @ s - b).max() if k else 0.0
    if residual > ROW_SUM_TOL:
        raise SingularSystem(taboo)
    if np.any(s < -ROW_SUM_TOL) or np.any(s > 1 + ROW_SUM_TOL):
        raise SingularSystem(taboo)
    s = np.clip(s, 0.0, 1.0)
    return {x: float(s[tpos[x]]) for x in taboo}
