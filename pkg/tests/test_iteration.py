"""Q-iteration engine: fixed points, verdicts, and sweep behavior."""
from __future__ import annotations

import numpy as np
import pytest

from drsafety.backup import robust_backup, value_vector
from drsafety.iteration import (
    InvalidP,
    IterationConfig,
    NotConverged,
    largest_certified_delta,
    robust_q_iteration,
    run_iteration,
    safety_upper_bound,
    solve_delta,
    sweep_delta,
    verify_p_safety,
)
from drsafety.metric import AmbiguitySpec, GroundMetric
from drsafety.model import standard_safety, uniform_policy, validate_model

from conftest import ELEVEN_STATE_SAFETY

TABLE_DELTAS = (0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3)


def abs_spec(model, delta):
    return AmbiguitySpec(delta, GroundMetric.abs_diff(model.labels))


def test_delta_zero_matches_linear_solve(eleven_state_model, eleven_state_policy):
    q = robust_q_iteration(
        eleven_state_model, eleven_state_policy, abs_spec(eleven_state_model, 0.0)
    )
    J = safety_upper_bound(q, eleven_state_policy)
    s = standard_safety(eleven_state_model, eleven_state_policy)
    for x, expected in s.items():
        assert J[x] == pytest.approx(expected, abs=1e-6)
    for x, expected in ELEVEN_STATE_SAFETY.items():
        assert J[x] == pytest.approx(expected, abs=1e-6)


def test_goal_only_rows_stay_zero():
    raw = {
        "states": [(1, "goal"), (2, "forbidden"), (3, "taboo")],
        "actions": [1],
        "kernel": {(3, 1): {1: 1.0}},
    }
    model = validate_model(raw)
    q = robust_q_iteration(model, uniform_policy(model), abs_spec(model, 0.0))
    assert q[(3, 1)] == 0.0


def test_single_state_adversarial_fixed_point():
    # Mass (0.7 goal@1, 0.3 forbidden@2), taboo at 3, budget 0.2: the
    # adversary shifts 0.2 from the goal to the adjacent forbidden state.
    raw = {
        "states": [(1, "goal"), (2, "forbidden"), (3, "taboo")],
        "actions": [1],
        "kernel": {(3, 1): {1: 0.7, 2: 0.3}},
    }
    model = validate_model(raw)
    policy = uniform_policy(model)
    q = robust_q_iteration(model, policy, abs_spec(model, 0.2))
    assert q[(3, 1)] == pytest.approx(0.5, abs=1e-7)


def test_fixed_point_residual_under_theta(eleven_state_model, eleven_state_policy):
    model, policy = eleven_state_model, eleven_state_policy
    cfg = IterationConfig(theta=1e-8)
    for delta in (0.0, 0.1, 0.3):
        spec = abs_spec(model, delta)
        result = run_iteration(model, policy, spec, cfg)
        v = value_vector(model, policy, dict(result.q_table.items()))
        residual = max(
            abs(robust_backup(model.row(x, a), v, spec).value - result.q_table[(x, a)])
            for (x, a) in model.pairs()
        )
        assert residual < cfg.theta
        assert result.monotone_slack >= -1e-12


def test_jacobi_and_gauss_seidel_agree(eleven_state_model, eleven_state_policy):
    model, policy = eleven_state_model, eleven_state_policy
    theta = 1e-8
    for delta in (0.05, 0.2):
        qj = robust_q_iteration(
            model, policy, abs_spec(model, delta), IterationConfig(theta=theta)
        )
        qg = robust_q_iteration(
            model, policy, abs_spec(model, delta),
            IterationConfig(theta=theta, update_scheme="gauss-seidel"),
        )
        for pair in model.pairs():
            assert qj[pair] == pytest.approx(qg[pair], abs=10 * theta)


def test_not_converged_raised():
    raw = {
        "states": [(1, "goal"), (2, "forbidden"), (3, "taboo")],
        "actions": [1],
        "kernel": {(3, 1): {1: 0.5, 2: 0.5}},
    }
    model = validate_model(raw)
    policy = uniform_policy(model)
    with pytest.raises(NotConverged) as err:
        robust_q_iteration(
            model, policy, abs_spec(model, 0.4),
            IterationConfig(theta=1e-12, max_sweeps=1),
        )
    assert err.value.sweeps == 1
    assert err.value.last_delta > 0


def test_sweep_tags_radius_on_failure(eleven_state_model, eleven_state_policy):
    with pytest.raises(NotConverged) as err:
        sweep_delta(
            eleven_state_model, eleven_state_policy, [0.2], 0.5,
            IterationConfig(theta=1e-13, max_sweeps=2),
        )
    assert err.value.radius == 0.2


def test_safety_upper_bound_shapes(eleven_state_model, eleven_state_policy):
    q = robust_q_iteration(
        eleven_state_model, eleven_state_policy, abs_spec(eleven_state_model, 0.0)
    )
    J = safety_upper_bound(q, eleven_state_policy)
    # Uniform two-action average, exactly.
    for x in eleven_state_model.taboo_labels:
        expected = 0.5 * (q[(x, 1)] + q[(x, 2)])
        assert J[x] == pytest.approx(expected, abs=1e-12)
    assert J[5] == pytest.approx(0.5 * J[4], abs=1e-9)


def test_safety_upper_bound_direct():
    from drsafety.iteration import QTable
    from drsafety.model import PolicyTable

    uniform = PolicyTable({(1, 1): 0.5, (1, 2): 0.5})
    J = safety_upper_bound(QTable({(1, 1): 0.2, (1, 2): 0.4}), uniform)
    assert J[1] == pytest.approx(0.3, abs=1e-12)
    chooser = PolicyTable({(1, 1): 1.0, (1, 2): 0.0})
    J = safety_upper_bound(QTable({(1, 1): 0.2, (1, 2): 0.4}), chooser)
    assert J[1] == pytest.approx(0.2, abs=1e-12)


def test_verify_p_safety():
    verdict = verify_p_safety({1: 0.49, 2: 0.51}, 0.5)
    assert verdict.per_state == {1: True, 2: False}
    assert not verdict.mdp_safe
    assert verify_p_safety({1: 0.5}, 0.5).mdp_safe  # inclusive boundary
    with pytest.raises(InvalidP):
        verify_p_safety({1: 0.2}, 1.0)
    with pytest.raises(InvalidP):
        verify_p_safety({1: 0.2}, 0.0)


def test_sweep_monotone_and_structured(eleven_state_model, eleven_state_policy):
    reports = sweep_delta(
        eleven_state_model, eleven_state_policy, TABLE_DELTAS, 0.5
    )
    assert len(reports) == 7
    for r in reports:
        assert set(r.J) == set(eleven_state_model.taboo_labels)
        assert r.final_delta_residual < 1e-8
        assert len(r.lambda_star) == 14
    for lo, hi in zip(reports, reports[1:]):
        for x in lo.J:
            assert lo.J[x] <= hi.J[x] + 1e-7


def test_sweep_single_zero_matches_standard(eleven_state_model, eleven_state_policy):
    (report,) = sweep_delta(eleven_state_model, eleven_state_policy, [0.0], 0.5)
    s = standard_safety(eleven_state_model, eleven_state_policy)
    for x in s:
        assert report.J[x] == pytest.approx(s[x], abs=1e-6)
        assert report.state_verdicts[x] == (report.J[x] <= 0.5)


def test_sweep_deterministic(eleven_state_model, eleven_state_policy):
    r1 = sweep_delta(eleven_state_model, eleven_state_policy, [0.1, 0.1], 0.5)
    assert r1[0].J == r1[1].J
    assert r1[0].lambda_star == r1[1].lambda_star


def test_monotone_iterates_from_zero(eleven_state_model, eleven_state_policy):
    for delta in (0.0, 0.15, 0.3):
        result = run_iteration(
            eleven_state_model, eleven_state_policy,
            abs_spec(eleven_state_model, delta),
        )
        assert result.monotone_slack >= -1e-12
        for value in result.q_table.entries.values():
            assert 0.0 <= value <= 1.0


def test_largest_certified_delta(eleven_state_model, eleven_state_policy):
    # The listed kernel has J(7) = 0.5 exactly at delta 0, so only the
    # zero radius certifies at p = 0.5.
    reports = sweep_delta(
        eleven_state_model, eleven_state_policy, [0.0, 0.05], 0.5
    )
    assert largest_certified_delta(reports) == 0.0
    unsafe = sweep_delta(eleven_state_model, eleven_state_policy, [0.0], 0.05)
    assert largest_certified_delta(unsafe) is None


def test_solve_delta_is_sweep_of_one(eleven_state_model, eleven_state_policy):
    single = solve_delta(eleven_state_model, eleven_state_policy, 0.1, 0.5)
    (swept,) = sweep_delta(eleven_state_model, eleven_state_policy, [0.1], 0.5)
    assert single.J == swept.J
