"""Independent verification machinery.

Everything here checks the production path from a different direction:
the primal transportation program bounds the dual backup by strong
duality, trajectory simulation estimates hitting probabilities that the
robust bound must dominate, and the reconciliation search explains a
reference sweep whose baseline row disagrees with a model's listed
kernel.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .backup import value_vector
from .iteration import IterationConfig, SafetyReport, run_iteration, sweep_delta
from .linprog import LinearProgram, LpStatus, solve_lp
from .metric import AmbiguitySpec, Coupling, GroundMetric, in_ambiguity_ball
from .model import MdpModel, PolicyTable, StateClass, standard_safety, validate_model


class NoCandidate(RuntimeError):
    """Grid search found no kernel matching the target baseline."""


@dataclass(frozen=True, eq=False)
class AdversarialRow:
    """Worst-case transition row inside the ambiguity ball, with the
    transport plan that realizes it."""

    p_tilde: np.ndarray
    attained_value: float
    coupling: Coupling


def primal_inner_sup(nominal_row, values, spec: AmbiguitySpec) -> AdversarialRow:
    """Worst-case expectation over the ball, solved in the primal.

    Optimizes directly over couplings whose column marginals equal the
    nominal row and whose transport cost stays within the radius; the
    adversarial row is the free row marginal.
    """
    n = spec.metric.n_states
    p = np.asarray(nominal_row, dtype=float)
    v = np.asarray(values, dtype=float)
    if p.shape != (n,) or v.shape != (n,):
        raise ValueError(f"row and values must have length {n}")

    # Variables: coupling gamma[y, z] flattened row-major; objective
    # weight of gamma[y, z] is v(y).
    c = np.repeat(v, n)
    A = np.zeros((n + 1, n * n))
    b = np.zeros(n + 1)
    for z in range(n):
        A[z, z::n] = 1.0
        b[z] = p[z]
    A[n] = spec.metric.matrix.reshape(-1)
    b[n] = spec.delta
    senses = ("=",) * n + ("<=",)
    sol = solve_lp(LinearProgram("max", c, A, senses, b))
    if sol.status is not LpStatus.OPTIMAL:  # pragma: no cover - always feasible
        raise RuntimeError(f"adversary program returned {sol.status}")

    gamma = sol.x.reshape(n, n)
    p_tilde = gamma.sum(axis=1)
    # Clean solver dust so the row is an exact distribution.
    p_tilde = np.clip(p_tilde, 0.0, None)
    p_tilde /= p_tilde.sum()
    if not in_ambiguity_ball(p_tilde, p, spec):  # pragma: no cover - certificate
        raise RuntimeError("adversarial row escaped the ambiguity ball")
    return AdversarialRow(
        p_tilde=p_tilde,
        attained_value=float(v @ p_tilde),
        coupling=Coupling(matrix=gamma),
    )


def worst_case_kernel(
    model: MdpModel,
    policy: PolicyTable,
    spec: AmbiguitySpec,
    cfg: IterationConfig = IterationConfig(),
) -> MdpModel:
    """Fixed adversarial kernel built from per-pair primal optimizers at
    the robust fixed point.

    The result is one realizable kernel in the ambiguity set, so its
    hitting probabilities are dominated by the robust bound.
    """
    result = run_iteration(model, policy, spec, cfg)
    v = value_vector(model, policy, dict(result.q_table.items()))
    rows = {
        pair: primal_inner_sup(model.row(*pair), v, spec).p_tilde
        for pair in model.pairs()
    }
    return model.with_kernel(rows)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """One rollout, stopped at the first terminal state or the step cap.

    ``censored`` marks rollouts cut off by the cap before absorption;
    they count as not having hit the forbidden set.
    """

    states: tuple[int, ...]
    actions: tuple[int, ...]
    hit_forbidden: bool
    steps: int
    censored: bool


@dataclass(frozen=True, eq=False)
class HittingEstimate:
    """Monte Carlo estimate of hitting forbidden before goal.

    Trajectories that exceed the step cap count as not-hit and are
    reported in ``censored``.
    """

    estimate: float
    stderr: float
    censored: int
    trajectories: int


def sample_trajectory(
    model: MdpModel,
    policy: PolicyTable,
    x0: int,
    rng: np.random.Generator,
    step_cap: int = 10_000,
) -> Trajectory:
    """Roll out one trajectory under the model's kernel and the policy."""
    states = [x0]
    actions: list[int] = []
    x = x0
    while model.state_class(x) is StateClass.TABOO and len(actions) < step_cap:
        acts = model.actions_at(x)
        probs = policy.dist_at(model, x)
        a = acts[int(rng.choice(len(acts), p=probs))]
        actions.append(a)
        row = model.row(x, a)
        x = model.labels[int(rng.choice(model.n_states, p=row))]
        states.append(x)
    return Trajectory(
        states=tuple(states),
        actions=tuple(actions),
        hit_forbidden=model.state_class(x) is StateClass.FORBIDDEN,
        steps=len(actions),
        censored=model.state_class(x) is StateClass.TABOO,
    )


def monte_carlo_hitting(
    model: MdpModel,
    policy: PolicyTable,
    x0: int,
    n_traj: int,
    step_cap: int = 10_000,
    seed: int = 0,
    batch_size: int = 8192,
) -> HittingEstimate:
    """Fraction of trajectories hitting forbidden before goal.

    Deterministic for a fixed seed and batch size; batches draw from
    independent streams keyed by (seed, batch index).
    """
    if model.state_class(x0) is not StateClass.TABOO:
        raise ValueError(f"start state {x0} is not taboo")

    # Index-space tables for vectorized stepping.
    taboo_idx = {model.index_of(x): i for i, x in enumerate(model.taboo_labels)}
    n_actions = max(len(model.actions_at(x)) for x in model.taboo_labels)
    pol_cdf = np.ones((len(taboo_idx), n_actions))
    pair_rows = []
    pair_of = np.zeros((len(taboo_idx), n_actions), dtype=int)
    for x, i in ((x, taboo_idx[model.index_of(x)]) for x in model.taboo_labels):
        probs = policy.dist_at(model, x)
        pol_cdf[i, : len(probs)] = np.cumsum(probs)
        pol_cdf[i, -1] = 1.0  # guard against rounding at the top
        for j, a in enumerate(model.actions_at(x)):
            pair_of[i, j] = len(pair_rows)
            pair_rows.append(model.row(x, a))
    row_cdf = np.cumsum(np.stack(pair_rows), axis=1)
    row_cdf[:, -1] = 1.0
    forbidden = model.forbidden_mask
    taboo = model.taboo_mask
    taboo_pos = np.full(model.n_states, -1, dtype=int)
    for idx, i in taboo_idx.items():
        taboo_pos[idx] = i

    hits = 0
    censored = 0
    done = 0
    batch_index = 0
    while done < n_traj:
        size = min(batch_size, n_traj - done)
        rng = np.random.default_rng(np.random.SeedSequence((seed, batch_index)))
        state = np.full(size, model.index_of(x0), dtype=int)
        for _ in range(step_cap):
            pos = taboo_pos[state]
            u1 = rng.random(size=state.size)
            act = (u1[:, None] > pol_cdf[pos]).sum(axis=1)
            pair = pair_of[pos, act]
            u2 = rng.random(size=state.size)
            state = (u2[:, None] > row_cdf[pair]).sum(axis=1)
            absorbed = ~taboo[state]
            if np.any(absorbed):
                hits += int(forbidden[state[absorbed]].sum())
                state = state[~absorbed]
            if state.size == 0:
                break
        censored += state.size
        done += size
        batch_index += 1

    estimate = hits / n_traj
    stderr = float(np.sqrt(estimate * (1.0 - estimate) / n_traj))
    return HittingEstimate(
        estimate=estimate, stderr=stderr, censored=censored, trajectories=n_traj
    )


def random_instance(
    n_states: int, n_actions: int, seed: int
) -> tuple[MdpModel, PolicyTable]:
    """Reproducible random model and policy passing full validation."""
    if n_states < 3:
        raise ValueError("need at least one goal, one forbidden, one taboo state")
    rng = np.random.default_rng(seed)
    classes = [StateClass.GOAL, StateClass.FORBIDDEN, StateClass.TABOO]
    classes += [
        StateClass(str(c))
        for c in rng.choice([c.value for c in StateClass], size=n_states - 3)
    ]
    order = rng.permutation(n_states)
    labels = list(range(1, n_states + 1))
    states = [(labels[i], classes[k]) for i, k in enumerate(order)]

    taboo = [lab for lab, cls in states if cls is StateClass.TABOO]
    kernel = {
        (x, a): dict(zip(labels, rng.dirichlet(np.ones(n_states))))
        for x in taboo
        for a in range(1, n_actions + 1)
    }
    model = validate_model(
        {"states": states, "actions": list(range(1, n_actions + 1)), "kernel": kernel}
    )
    probs = {}
    for x in taboo:
        weights = rng.dirichlet(np.ones(n_actions))
        for a, w in zip(range(1, n_actions + 1), weights):
            probs[(x, a)] = float(w)
    return model, PolicyTable(probs)


@dataclass(frozen=True, eq=False)
class ReconcileCandidate:
    """One kernel adjustment matching the target baseline row."""

    adjusted_rows: Mapping[tuple[int, int], Mapping[int, float]]
    baseline: Mapping[int, float]
    reports: tuple[SafetyReport, ...]
    cell_deviation: Mapping[float, Mapping[int, float]]
    max_deviation: float


def _terminal_only_states(model: MdpModel) -> list[int]:
    """Taboo states whose every kernel row is supported on terminals."""
    out = []
    for x in model.taboo_labels:
        rows = [model.row(x, a) for a in model.actions_at(x)]
        if all(float(r[model.taboo_mask].sum()) == 0.0 for r in rows):
            out.append(x)
    return out


def _grid_simplex(support: int, step: float):
    """All probability vectors on a step grid over `support` points."""
    ticks = int(round(1.0 / step))
    for cuts in itertools.combinations_with_replacement(range(ticks + 1), support - 1):
        parts = []
        prev = 0
        for c in cuts:
            parts.append(c - prev)
            prev = c
        parts.append(ticks - prev)
        yield tuple(t / ticks for t in parts)


def reconcile_baseline(
    model: MdpModel,
    policy: PolicyTable,
    target_row0: Mapping[int, float],
    grid_step: float = 0.05,
    reference_table: Mapping[float, Mapping[int, float]] | None = None,
    p: float = 0.5,
    cfg: IterationConfig = IterationConfig(),
    tol: float = 5e-4,
) -> list[ReconcileCandidate]:
    """Search terminal-supported rows for kernels matching a baseline.

    Only taboo states whose rows already point exclusively at terminal
    states are adjusted, each over its existing support on a probability
    grid; every other baseline entry is a linear consequence of those
    rows, so this is the smallest hypothesis space that can explain a
    disagreeing baseline.  Candidates whose exact nominal safety matches
    ``target_row0`` within ``tol`` at every state are swept over the
    reference radii and scored by their worst cell deviation from the
    reference values at positive radii.

    Raises :class:`NoCandidate` when the grid contains no match.
    """
    searched = _terminal_only_states(model)
    if not searched:
        raise NoCandidate("model has no terminal-supported taboo rows to adjust")

    # Stage 1: per searched state, grid rows matching its own target.
    # Exact because a terminal-supported row fixes S(x) directly.
    per_state: dict[int, list[dict[tuple[int, int], np.ndarray]]] = {}
    for x in searched:
        acts = model.actions_at(x)
        supports = {
            a: np.flatnonzero(model.row(x, a) > 0.0) for a in acts
        }
        forbidden = model.forbidden_mask
        options = []
        grids = [list(_grid_simplex(len(supports[a]), grid_step)) for a in acts]
        for combo in itertools.product(*grids):
            s_x = 0.0
            rows = {}
            for a, weights in zip(acts, combo):
                row = np.zeros(model.n_states)
                row[supports[a]] = weights
                rows[(x, a)] = row
                s_x += policy.prob(x, a) * float(row[forbidden].sum())
            if abs(s_x - target_row0[x]) <= tol:
                options.append(rows)
        per_state[x] = options
        if not options:
            raise NoCandidate(
                f"no grid row for state {x} matches target {target_row0[x]}"
            )

    deltas = sorted(reference_table) if reference_table else []
    candidates = []
    for assignment in itertools.product(*(per_state[x] for x in searched)):
        rows = {pair: model.row(*pair) for pair in model.pairs()}
        for part in assignment:
            rows.update(part)
        candidate_model = model.with_kernel(rows)
        baseline = standard_safety(candidate_model, policy)
        if any(abs(baseline[x] - target_row0[x]) > tol for x in baseline):
            continue

        reports: tuple[SafetyReport, ...] = ()
        cell_dev: dict[float, dict[int, float]] = {}
        max_dev = 0.0
        if reference_table:
            reports = tuple(sweep_delta(candidate_model, policy, deltas, p, cfg))
            for report in reports:
                ref = reference_table[report.delta]
                dev = {x: abs(report.J[x] - ref[x]) for x in report.J}
                cell_dev[report.delta] = dev
                if report.delta > 0:
                    max_dev = max(max_dev, max(dev.values()))
        adjusted = {
            pair: {
                int(lab): float(row[model.index_of(lab)])
                for lab in model.labels
                if row[model.index_of(lab)] > 0.0
            }
            for part in assignment
            for pair, row in part.items()
        }
        candidates.append(
            ReconcileCandidate(
                adjusted_rows=adjusted,
                baseline=baseline,
                reports=reports,
                cell_deviation=cell_dev,
                max_deviation=max_dev,
            )
        )

    if not candidates:
        raise NoCandidate("grid search found no kernel matching the target row")
    candidates.sort(key=lambda c: c.max_deviation)
    return candidates
