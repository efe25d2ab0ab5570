"""scikit-learn compatible wrappers.

Signals follow the scikit-learn layout: one row per observation and one
column per node, i.e. the transpose of the ``n x m`` matrices used by the
functional API.
"""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ._validation import ParameterError
from .filters import Covariance, SignalBatch, sample_covariance
from .graph import GsoConstraintSet
from .solvers import (
    GammaSchedule,
    InnerConfig,
    RfiConfig,
    fi_baseline,
    rfi_d,
    rfi_iter,
    rfi_r,
    tls_sem_alpha_max,
    tls_sem_baseline,
)

_METHODS = ("fi", "iter", "d", "r")


class RobustFilterIdentifier(RegressorMixin, BaseEstimator):
    """Estimate a graph filter from input/output signals on a perturbed graph.

    Parameters
    ----------
    s_bar : array-like of shape (n_nodes, n_nodes)
        Observed (possibly perturbed) graph-shift operator.
    method : {"iter", "d", "r", "fi"}, default="iter"
        Alternating joint estimation, denoise-then-identify using the output
        covariance, covariance-commutation surrogate, or plain identification
        on ``s_bar``.
    covariance : array-like of shape (n_nodes, n_nodes) or None
        Output covariance for ``"d"``/``"r"``; the sample covariance of the
        training outputs is used when omitted.
    normalize_outputs : bool, default=True
        Fit on outputs rescaled to a unit-norm filter and undo the scaling
        afterwards, so the penalty weights do not depend on signal energy.

    Attributes
    ----------
    filter_ : ndarray of shape (n_nodes, n_nodes)
    gso_ : ndarray of shape (n_nodes, n_nodes)
        Denoised GSO (``s_bar`` for ``method="fi"``).
    result_ : RfiResult or None
    """

    def __init__(
        self,
        s_bar=None,
        method="iter",
        lambda_=0.03,
        beta=0.006,
        gamma_initial=0.1,
        gamma_growth=2.0,
        gamma_cap=100.0,
        stationarity_weight_y=100.0,
        max_outer_iters=50,
        outer_tol=1e-4,
        inner_max_iters=5000,
        inner_tol=1e-6,
        ridge=None,
        symmetric=True,
        zero_diagonal=True,
        nonnegative=False,
        covariance=None,
        normalize_outputs=True,
    ):
        self.s_bar = s_bar
        self.method = method
        self.lambda_ = lambda_
        self.beta = beta
        self.gamma_initial = gamma_initial
        self.gamma_growth = gamma_growth
        self.gamma_cap = gamma_cap
        self.stationarity_weight_y = stationarity_weight_y
        self.max_outer_iters = max_outer_iters
        self.outer_tol = outer_tol
        self.inner_max_iters = inner_max_iters
        self.inner_tol = inner_tol
        self.ridge = ridge
        self.symmetric = symmetric
        self.zero_diagonal = zero_diagonal
        self.nonnegative = nonnegative
        self.covariance = covariance
        self.normalize_outputs = normalize_outputs

    def _config(self):
        return RfiConfig(
            lambda_=self.lambda_,
            beta=self.beta,
            gamma_schedule=GammaSchedule(self.gamma_initial, self.gamma_growth, self.gamma_cap),
            stationarity_weight_y=self.stationarity_weight_y,
            max_outer_iters=self.max_outer_iters,
            outer_tol=self.outer_tol,
            inner=InnerConfig(max_iters=self.inner_max_iters, tol=self.inner_tol),
            ridge=self.ridge,
        )

    def fit(self, X, y):
        """Fit on inputs ``X`` and outputs ``y``, both (n_samples, n_nodes)."""
        if self.method not in _METHODS:
            raise ParameterError(f"method must be one of {_METHODS}, got {self.method!r}")
        if self.s_bar is None:
            raise ParameterError("s_bar (the observed GSO) is required")
        X, y = check_X_y(X, y, multi_output=True, y_numeric=True)
        if y.ndim == 1 or y.shape[1] != X.shape[1]:
            raise ParameterError("X and y must have the same number of columns (nodes)")
        s_bar = check_array(self.s_bar)
        if s_bar.shape != (X.shape[1], X.shape[1]):
            raise ParameterError(
                f"s_bar has shape {s_bar.shape}, expected ({X.shape[1]}, {X.shape[1]})"
            )
        self.n_features_in_ = X.shape[1]

        batch = SignalBatch(X.T, y.T)
        scale = 1.0
        if self.normalize_outputs and self.method != "fi":
            scale = float(np.linalg.norm(batch.y) / np.sqrt(batch.m)) or 1.0
            batch = SignalBatch(batch.x, batch.y / scale)
        cfg = self._config()
        cset = GsoConstraintSet(
            symmetric=self.symmetric, zero_diagonal=self.zero_diagonal, nonnegative=self.nonnegative
        )
        if self.covariance is not None:
            cov = Covariance(check_array(self.covariance))
        else:
            cov = sample_covariance(batch.y)

        if self.method == "fi":
            self.result_ = None
            self.gso_ = s_bar.copy()
            h = np.asarray(fi_baseline(s_bar, batch, self.gamma_cap, self.ridge))
        else:
            if self.method == "iter":
                res = rfi_iter(s_bar, batch, cset, cfg)
            elif self.method == "d":
                res = rfi_d(s_bar, batch, cset, cfg, cov)
            else:
                res = rfi_r(s_bar, batch, cset, cfg, cov)
            self.result_ = res
            self.gso_ = np.asarray(res.s_hat)
            h = np.asarray(res.h_hat)
        self.filter_ = scale * h
        return self

    def predict(self, X):
        check_is_fitted(self, "filter_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ParameterError(f"X has {X.shape[1]} columns, expected {self.n_features_in_}")
        return X @ self.filter_.T


class TLSSEMRegressor(RegressorMixin, BaseEstimator):
    """Total-least-squares SEM baseline with a scikit-learn interface.

    ``alpha`` is relative to the smallest weight that keeps the perturbation
    estimate at zero.
    """

    def __init__(self, s_bar=None, alpha=0.1, fit_weight=1.0, max_iter=100, tol=1e-5):
        self.s_bar = s_bar
        self.alpha = alpha
        self.fit_weight = fit_weight
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y):
        if self.s_bar is None:
            raise ParameterError("s_bar (the observed GSO) is required")
        X, y = check_X_y(X, y, multi_output=True, y_numeric=True)
        if y.ndim == 1 or y.shape[1] != X.shape[1]:
            raise ParameterError("X and y must have the same number of columns (nodes)")
        s_bar = check_array(self.s_bar)
        self.n_features_in_ = X.shape[1]
        batch = SignalBatch(X.T, y.T)
        alpha = self.alpha * tls_sem_alpha_max(s_bar, batch, self.fit_weight)
        res = tls_sem_baseline(
            s_bar, batch, alpha=alpha, max_iters=self.max_iter, tol=self.tol,
            fit_weight=self.fit_weight,
        )
        self.result_ = res
        self.gso_ = np.asarray(res.s_hat)
        self.filter_ = np.asarray(res.h_hat)
        return self

    def predict(self, X):
        check_is_fitted(self, "filter_")
        X = check_array(X)
        return X @ self.filter_.T
