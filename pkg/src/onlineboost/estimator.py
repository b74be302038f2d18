"""scikit-learn compatible wrapper around the boosted online engine."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .boosting import EnsembleState, advance
from .core import BoostConfig, MASK64
from .experiments import ALGORITHMS

__all__ = ["BoostedOnlineRegressor"]


class BoostedOnlineRegressor(RegressorMixin, BaseEstimator):
    """Online boosted linear regressor.

    Samples are consumed in row order, one round each, exactly as in a
    streaming run; ``partial_fit`` continues from the current state.

    Parameters
    ----------
    n_learners : int, default=20
        Number of weak learners. ``1`` gives a plain SGD or RLS learner.
    learner : {"sgd", "nm"}, default="sgd"
        Weak-learner update rule (first order or recursive least squares).
    mode : {"weighted", "data_reuse", "oza_poisson", "random"}, default="weighted"
        How importance weights turn into learner updates.
    sigma_m2 : float, default=0.02
        Per-learner target MSE used by the loss ladder.
    c : float, default=1.0
        Dependence of a learner's weight on the learners above it.
    K : int, default=5
        Reuse multiplier for ``mode="data_reuse"``.
    mu : float, default=0.1
        SGD step size.
    mu_z : float, default=1e-4
        Step size of the normalized-SGD combiner.
    beta : float, default=0.9999
        RLS forgetting factor.
    v : float, default=0.01
        RLS regularizer, initial inverse correlation ``I / v``.
    delta_floor : float, default=1e-6
        Lower clip of the MSE estimate used as the weight base.
    sigma2 : float or None, default=None
        If set, weights use this a-priori bound instead of the running MSE.
    fit_intercept : bool, default=True
        Append a constant 1 feature.
    random_state : int or None, default=None
        Seed of the update-scheduling stream (``None`` means 0).

    Attributes
    ----------
    state_ : EnsembleState
    n_features_in_ : int
    n_seen_ : int
        Number of samples consumed so far.
    train_errors_ : ndarray
        Prior (before-update) errors of the combined prediction on every
        consumed sample, in order.
    """

    def __init__(self, n_learners=20, learner="sgd", mode="weighted", sigma_m2=0.02, c=1.0,
                 K=5, mu=0.1, mu_z=1e-4, beta=0.9999, v=0.01, delta_floor=1e-6, sigma2=None,
                 fit_intercept=True, random_state=None):
        self.n_learners = n_learners
        self.learner = learner
        self.mode = mode
        self.sigma_m2 = sigma_m2
        self.c = c
        self.K = K
        self.mu = mu
        self.mu_z = mu_z
        self.beta = beta
        self.v = v
        self.delta_floor = delta_floor
        self.sigma2 = sigma2
        self.fit_intercept = fit_intercept
        self.random_state = random_state

    @classmethod
    def from_label(cls, label: str, **params) -> "BoostedOnlineRegressor":
        """Build from an algorithm label such as ``"bnm-ru"`` or ``"sgd"``."""
        try:
            learner, mode, boosted = ALGORITHMS[label.lower()]
        except KeyError:
            raise ValueError(f"unknown algorithm label {label!r}") from None
        if not boosted:
            params.setdefault("n_learners", 1)
        return cls(learner=learner, mode=mode, **params)

    def _seed(self) -> int:
        rs = self.random_state
        if rs is None:
            return 0
        if isinstance(rs, (int, np.integer)):
            return int(rs) & MASK64
        # a RandomState/Generator: draw one seed from it
        return int(rs.integers(0, 2**63) if hasattr(rs, "integers") else rs.randint(0, 2**31))

    def _config(self) -> BoostConfig:
        return BoostConfig(
            m=self.n_learners, sigma_m2=self.sigma_m2, c=self.c, K=self.K, mu=self.mu,
            mu_z=self.mu_z, beta=self.beta, v=self.v, mode=self.mode, learner=self.learner,
            seed=self._seed(), delta_floor=self.delta_floor, sigma2=self.sigma2,
        )

    def _augment(self, X):
        X = np.asarray(X, dtype=float)
        if self.fit_intercept:
            X = np.column_stack([X, np.ones(X.shape[0])])
        return np.ascontiguousarray(X)

    def fit(self, X, y):
        """Reset and stream ``(X, y)`` through the ensemble once."""
        for attr in ("state_", "n_seen_", "train_errors_"):
            if hasattr(self, attr):
                delattr(self, attr)
        return self.partial_fit(X, y)

    def partial_fit(self, X, y):
        """Stream more samples through the current ensemble."""
        X, y = check_X_y(X, y, dtype=np.float64, y_numeric=True)
        first = not hasattr(self, "state_")
        if first:
            self.n_features_in_ = X.shape[1]
        elif X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        Xa = self._augment(X)
        if first:
            try:
                cfg = self._config()
            except ValueError as exc:
                raise ValueError(f"invalid parameters: {exc}") from None
            self.state_ = EnsembleState.initial(cfg, Xa.shape[1])
            self.n_seen_ = 0
            self.train_errors_ = np.empty(0)
        acc = advance(self.state_, Xa, np.ascontiguousarray(y, dtype=float))
        self.n_seen_ += X.shape[0]
        self.train_errors_ = np.concatenate([self.train_errors_, acc["err"]])
        return self

    def learner_outputs(self, X) -> np.ndarray:
        check_is_fitted(self, "state_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return self._augment(X) @ self.state_.W.T

    def predict(self, X) -> np.ndarray:
        """Combined prediction of the current (frozen) ensemble."""
        return self.learner_outputs(X) @ self.state_.z

    @property
    def coef_(self) -> np.ndarray:
        """Learner coefficients, one row per learner (intercept last)."""
        check_is_fitted(self, "state_")
        return self.state_.W.copy()

    @property
    def combiner_weights_(self) -> np.ndarray:
        check_is_fitted(self, "state_")
        return self.state_.z.copy()
