"""scikit-learn style wrappers: rows of ``X`` are initial profiles."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_random_state

from .contest import ContestConfig
from .costs import CostSpec
from .discounted_sum import AdversarialMax, BestCase, ConstantBeta, UniformBeta, run_dissum
from .dynamics import BestCaseGreedy, StoppingRule, run
from .selection import Alternating, RoundRobin, SelectionPolicy, UniformRandom

_BR_POLICIES = {
    "alternating": Alternating,
    "uniform": UniformRandom,
    "round_robin": RoundRobin,
    "best_case": BestCaseGreedy,
}


def _policy(policy, table) -> SelectionPolicy:
    if isinstance(policy, SelectionPolicy):
        return policy
    if policy not in table:
        raise ValueError(f"unknown policy {policy!r}; choose from {sorted(table)}")
    return table[policy]()


def _seeds(random_state, count):
    rng = check_random_state(random_state)
    return [int(s) for s in rng.randint(0, 2**31 - 1, size=count)]


class BestResponseDynamics(BaseEstimator, TransformerMixin):
    """Run best-response dynamics from each row of ``X``.

    ``fit`` validates the contest; ``transform`` returns the final profiles
    and ``predict`` the number of moves each run took.
    """

    def __init__(self, cost=None, policy="uniform", eps=1e-6, max_steps=100_000, a=1e-3, random_state=None):
        self.cost = cost
        self.policy = policy
        self.eps = eps
        self.max_steps = max_steps
        self.a = a
        self.random_state = random_state

    def _cost(self):
        if self.cost is None:
            return CostSpec.linear()
        if isinstance(self.cost, CostSpec):
            return self.cost
        return CostSpec.from_json(self.cost)

    def fit(self, X, y=None):
        X = check_array(X, ensure_min_features=2)
        if np.any(X < 0):
            raise ValueError("initial profiles must be non-negative")
        self.n_features_in_ = X.shape[1]
        self.config_ = ContestConfig.normalized_homogeneous(X.shape[1], self._cost(), self.a)
        self.policy_ = _policy(self.policy, _BR_POLICIES)
        self.policy_.validate(X.shape[1])
        self.stop_ = StoppingRule(eps=self.eps, max_steps=self.max_steps)
        return self

    def _run_all(self, X):
        check_is_fitted(self, "config_")
        X = check_array(X, ensure_min_features=2)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} columns, expected {self.n_features_in_}")
        if np.any(X < 0):
            raise ValueError("initial profiles must be non-negative")
        seeds = _seeds(self.random_state, X.shape[0])
        traces = [run(self.config_, row, self.policy_, self.stop_, seed=s) for row, s in zip(X, seeds)]
        self.traces_ = traces
        self.n_steps_ = np.array([t.summary.steps for t in traces])
        self.converged_ = np.array([t.summary.converged for t in traces])
        return traces

    def transform(self, X):
        return np.array([t.summary.final for t in self._run_all(X)])

    def predict(self, X):
        return np.array([t.summary.steps for t in self._run_all(X)])


_DISSUM_SELECTION = {"best_case": BestCase, "uniform": UniformRandom, "round_robin": RoundRobin}


class DiscountedSumDynamics(BaseEstimator, TransformerMixin):
    """Run the discounted-sum dynamics from each row of ``X``."""

    def __init__(self, B=0.5, beta="max", selection="best_case", eps=1e-6, max_steps=100_000, random_state=None):
        self.B = B
        self.beta = beta
        self.selection = selection
        self.eps = eps
        self.max_steps = max_steps
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X)
        if not 0 <= self.B < 1:
            raise ValueError(f"B must lie in [0, 1), got {self.B}")
        self.n_features_in_ = X.shape[1]
        if self.beta == "max":
            self.beta_ = AdversarialMax()
        elif self.beta == "uniform":
            self.beta_ = UniformBeta()
        elif isinstance(self.beta, (int, float)):
            self.beta_ = ConstantBeta(float(self.beta))
        else:
            raise ValueError(f"unknown beta policy {self.beta!r}")
        self.selection_ = _policy(self.selection, _DISSUM_SELECTION)
        return self

    def _run_all(self, X):
        check_is_fitted(self, "beta_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} columns, expected {self.n_features_in_}")
        seeds = _seeds(self.random_state, X.shape[0])
        traces = [
            run_dissum(row, self.B, self.beta_, self.selection_, self.eps, self.max_steps, seed=s)
            for row, s in zip(X, seeds)
        ]
        self.traces_ = traces
        self.n_steps_ = np.array([t.summary.steps for t in traces])
        self.converged_ = np.array([t.summary.converged for t in traces])
        return traces

    def transform(self, X):
        return np.array([t.summary.final for t in self._run_all(X)])

    def predict(self, X):
        return np.array([t.summary.steps for t in self._run_all(X)])
