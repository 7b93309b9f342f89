from __future__ import annotations

import pytest

from drsafety.model import validate_model, uniform_policy

# The bundled 11-state, 2-action chain: states 8 and 10 are goals, 9 and
# 11 are forbidden, 1..7 taboo.
ELEVEN_STATE_RAW = {
    "states": [
        (1, "taboo"), (2, "taboo"), (3, "taboo"), (4, "taboo"),
        (5, "taboo"), (6, "taboo"), (7, "taboo"),
        (8, "goal"), (9, "forbidden"), (10, "goal"), (11, "forbidden"),
    ],
    "actions": [1, 2],
    "kernel": {
        (1, 1): {2: 0.4, 3: 0.6},
        (1, 2): {2: 0.6, 3: 0.4},
        (2, 1): {4: 0.5, 5: 0.5},
        (2, 2): {4: 0.7, 5: 0.3},
        (3, 1): {6: 0.4, 7: 0.6},
        (3, 2): {6: 0.6, 7: 0.4},
        (4, 1): {8: 0.5, 9: 0.5},
        (4, 2): {8: 0.8, 9: 0.2},
        (5, 1): {4: 0.4, 8: 0.6},
        (5, 2): {4: 0.6, 8: 0.4},
        (6, 1): {7: 0.5, 10: 0.5},
        (6, 2): {7: 0.55, 10: 0.45},
        (7, 1): {10: 0.7, 11: 0.3},
        (7, 2): {10: 0.3, 11: 0.7},
    },
}

# Exact nominal safety of the model above under the uniform policy,
# frozen from an independent route (iterative evaluation, see
# test_model.py) and confirmed by hand elimination.
ELEVEN_STATE_SAFETY = {
    1: 0.330625,
    2: 0.28,
    3: 0.38125,
    4: 0.35,
    5: 0.175,
    6: 0.2625,
    7: 0.5,
}


@pytest.fixture(scope="session")
def eleven_state_model():
    return validate_model(ELEVEN_STATE_RAW)


@pytest.fixture(scope="session")
def eleven_state_policy(eleven_state_model):
    return uniform_policy(eleven_state_model)
