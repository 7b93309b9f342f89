"""Precondition and validation branches not covered elsewhere."""
from __future__ import annotations

import numpy as np
import pytest

from drsafety.iteration import IterationConfig
from drsafety.linprog import LinearProgram
from drsafety.metric import GroundMetric, MetricError
from drsafety.model import ModelError, validate_model, validate_policy
from drsafety.modelfile import ModelSyntaxError, parse_model_text
from drsafety.oracle import monte_carlo_hitting, primal_inner_sup, random_instance
from drsafety.metric import AmbiguitySpec


MINIMAL = {
    "states": [(1, "goal"), (2, "forbidden"), (3, "taboo")],
    "actions": [1],
    "kernel": {(3, 1): {1: 0.5, 2: 0.5}},
}


def variant(**overrides):
    raw = {k: dict(v) if isinstance(v, dict) else list(v) for k, v in MINIMAL.items()}
    raw.update(overrides)
    return raw


def test_model_misc_rejections():
    with pytest.raises(ModelError):
        validate_model(variant(states=[(1, "taboo"), (2, "taboo")],
                               kernel={(1, 1): {2: 1.0}, (2, 1): {1: 1.0}}))
    with pytest.raises(ModelError):
        validate_model(variant(actions=[]))
    with pytest.raises(ModelError):
        validate_model(variant(actions=[1, 1]))
    with pytest.raises(ModelError):
        validate_model(variant(kernel={(3, 2): {1: 1.0}}))  # unknown action
    with pytest.raises(ModelError):
        validate_model(variant(kernel={(3, 1): {99: 1.0}}))  # unknown target
    with pytest.raises(ModelError):
        validate_model(variant(kernel={(9, 1): {1: 1.0}}))  # unknown source


def test_policy_misc_rejections():
    model = validate_model(MINIMAL)
    with pytest.raises(ModelError):
        validate_policy(model, {(1, 1): 1.0})  # terminal state
    with pytest.raises(ModelError):
        validate_policy(model, {})  # no entries for the taboo state


def test_with_kernel_shape_check():
    model = validate_model(MINIMAL)
    with pytest.raises(ModelError):
        model.with_kernel({(3, 1): np.array([0.5, 0.5])})


def test_metric_constructor_rejections():
    with pytest.raises(MetricError):
        GroundMetric.abs_diff([1, 1, 2])
    with pytest.raises(MetricError):
        GroundMetric.from_matrix(np.zeros((2, 3)))


def test_linear_program_validation():
    with pytest.raises(ValueError):
        LinearProgram("best", [1.0], [[1.0]], ("<=",), [1.0])
    with pytest.raises(ValueError):
        LinearProgram("min", [1.0], [[1.0, 2.0]], ("<=",), [1.0])
    with pytest.raises(ValueError):
        LinearProgram("min", [1.0], [[1.0]], ("<",), [1.0])
    with pytest.raises(ValueError):
        LinearProgram("min", [np.inf], [[1.0]], ("<=",), [1.0])
    with pytest.raises(ValueError):
        LinearProgram("min", [1.0], [[1.0]], ("<=",), [1.0],
                      lower=np.array([2.0]), upper=np.array([1.0]))


def test_iteration_config_validation():
    with pytest.raises(ValueError):
        IterationConfig(theta=0.0)
    with pytest.raises(ValueError):
        IterationConfig(max_sweeps=0)
    with pytest.raises(ValueError):
        IterationConfig(update_scheme="chaotic")


def test_oracle_preconditions():
    with pytest.raises(ValueError):
        random_instance(2, 1, seed=0)
    model = validate_model(MINIMAL)
    from drsafety.model import uniform_policy

    with pytest.raises(ValueError):
        monte_carlo_hitting(model, uniform_policy(model), 1, 100)  # goal start
    spec = AmbiguitySpec(0.1, GroundMetric.abs_diff([1, 2]))
    with pytest.raises(ValueError):
        primal_inner_sup([1.0, 0.0, 0.0], [0.0, 1.0, 0.5], spec)


def test_document_syntax_variants():
    cases = [
        "state 1\n",                        # missing class
        "state 1 hero\n",                   # bad class
        "action one\n",                     # non-integer id
        "transition 1 1 2\n",               # missing probability
        "policy 1 1\n",                     # missing probability
        "metric euclidean\n",               # unsupported metric
        "metricrow 1\n",                    # no distances
        "delta 0.1 0.2\n",                  # extra token
        "p\n",                              # missing value
    ]
    for snippet in cases:
        with pytest.raises(ModelSyntaxError):
            parse_model_text(snippet)


def test_metric_matrix_document_must_cover_all_states():
    doc = (
        "state 1 goal\nstate 2 forbidden\nstate 3 taboo\n"
        "action 1\n"
        "transition 3 1 1 1.0\n"
        "policy 3 1 1.0\n"
        "metric matrix\n"
        "metricrow 1 0 1 2\n"
        "metricrow 2 1 0 1\n"
    )
    with pytest.raises(ModelSyntaxError):
        parse_model_text(doc)


def test_duplicate_defaults_rejected():
    doc = (
        "state 1 goal\nstate 2 forbidden\nstate 3 taboo\n"
        "action 1\n"
        "transition 3 1 1 1.0\n"
        "policy 3 1 1.0\n"
        "p 0.5\np 0.6\n"
    )
    with pytest.raises(ModelSyntaxError):
        parse_model_text(doc)
