"""Estimator-style front end for the robust safety verifier.

Follows the scikit-learn conventions (hyperparameters in the
constructor, computation in ``fit``, fitted attributes with trailing
underscores, ``get_params``/``set_params``) so the verifier plugs into
tooling that expects that surface, e.g. parameter grids over the
ambiguity radius.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .iteration import IterationConfig, safety_upper_bound, run_iteration, verify_p_safety
from .metric import AmbiguitySpec, GroundMetric
from .model import MdpModel, PolicyTable, uniform_policy


class RobustSafetyVerifier(BaseEstimator):
    """Certify robust p-safety of a policy on a finite MDP.

    Parameters
    ----------
    delta : float
        Wasserstein radius of the transition ambiguity ball.
    p : float
        Safety level in (0, 1).
    theta : float
        Convergence threshold for the Q-iteration residual.
    max_sweeps : int
        Sweep budget before giving up.
    scheme : str
        "jacobi" (snapshot updates) or "gauss-seidel" (in place).
    metric : GroundMetric or None
        Ground metric between states; None means absolute label distance.

    Attributes (after fit)
    ----------------------
    q_table_ : dict mapping (state, action) to the robust Q value.
    bound_ : dict mapping each taboo state to its safety upper bound.
    safe_ : dict mapping each taboo state to its certification verdict.
    mdp_safe_ : bool, the MDP-level verdict.
    n_sweeps_ : int, sweeps used to converge.
    residual_ : float, final sup-norm residual.
    lambda_ : dict mapping (state, action) to the optimal multiplier.
    """

    def __init__(
        self,
        delta: float = 0.0,
        p: float = 0.5,
        theta: float = 1e-8,
        max_sweeps: int = 100_000,
        scheme: str = "jacobi",
        metric: GroundMetric | None = None,
    ):
        self.delta = delta
        self.p = p
        self.theta = theta
        self.max_sweeps = max_sweeps
        self.scheme = scheme
        self.metric = metric

    def fit(self, model: MdpModel, policy: PolicyTable | None = None):
        """Run robust Q-iteration; a missing policy means uniform."""
        if policy is None:
            policy = uniform_policy(model)
        metric = self.metric or GroundMetric.abs_diff(model.labels)
        cfg = IterationConfig(
            theta=self.theta, max_sweeps=self.max_sweeps, update_scheme=self.scheme
        )
        result = run_iteration(model, policy, AmbiguitySpec(self.delta, metric), cfg)
        bound = safety_upper_bound(result.q_table, policy)
        verdict = verify_p_safety(bound, self.p)

        self.model_ = model
        self.q_table_ = dict(result.q_table.items())
        self.bound_ = {x: bound[x] for x in model.taboo_labels}
        self.safe_ = dict(verdict.per_state)
        self.mdp_safe_ = verdict.mdp_safe
        self.n_sweeps_ = result.sweeps_used
        self.residual_ = result.final_residual
        self.lambda_ = dict(result.lambda_star)
        return self

    def _check_fitted(self):
        if not hasattr(self, "bound_"):
            raise NotFittedError("call fit before predict/decision_function")

    def predict(self, states=None) -> np.ndarray:
        """Per-state certification verdicts (True means certified safe)."""
        self._check_fitted()
        if states is None:
            states = self.model_.taboo_labels
        return np.array([self.safe_[int(x)] for x in states])

    def decision_function(self, states=None) -> np.ndarray:
        """Certification margin p - bound; nonnegative means safe."""
        self._check_fitted()
        if states is None:
            states = self.model_.taboo_labels
        return np.array([self.p - self.bound_[int(x)] for x in states])
