"""scikit-learn style wrapper: fit on a drive waveform, predict switching outcomes.

``fit`` runs the whole pipeline for one waveform; afterwards the object
behaves like a fixed probabilistic classifier over the input current
Ix/Ic (one feature column).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from .grayzone import evaluate, initial_thermal_state, switching_probability
from .model import DimensionlessParams, Waveform


class GrayZoneEstimator(ClassifierMixin, BaseEstimator):
    """Comparator decision model for fixed junction parameters.

    Class 1 means the phase switched (ended in the lower well); its
    probability falls from 1 to 0 across the gray zone as Ix increases.
    """

    def __init__(self, beta_c=1.0, q=500.0, theta=0.0, omega_cut=50.0,
                 method="quadrature", variant="full_eq13", step=None, mc_config=None):
        self.beta_c = beta_c
        self.q = q
        self.theta = theta
        self.omega_cut = omega_cut
        self.method = method
        self.variant = variant
        self.step = step
        self.mc_config = mc_config

    def fit(self, X: Waveform, y=None):
        p = DimensionlessParams(beta_c=self.beta_c, q=self.q, theta=self.theta,
                                omega_cut=self.omega_cut)
        ev = evaluate(X, p, method=self.method, variant=self.variant, h=self.step,
                      mc_config=self.mc_config)
        self.params_ = ev.params
        self.coeffs_ = ev.coeffs
        self.result_ = ev.result
        self.delta_ix_over_ic_ = ev.result.delta_ix_over_ic
        self.initial_state_ = initial_thermal_state(ev.params)
        self.classes_ = np.array([0, 1])
        return self

    def _check(self):
        if not hasattr(self, "coeffs_"):
            raise NotFittedError("call fit(waveform) first")

    def predict_proba(self, X):
        self._check()
        x = np.asarray(X, dtype=float).reshape(-1)
        p = np.atleast_1d(switching_probability(self.coeffs_, self.initial_state_,
                                                self.params_, x))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] > 0.5).astype(int)

    def transform(self, X):
        """Switching probability column, for use inside a pipeline."""
        return self.predict_proba(X)[:, 1:]
