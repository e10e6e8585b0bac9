"""Scikit-learn style estimators wrapping the functional core.

These exist so the decompositions compose with the wider ecosystem
(pipelines, clone, get_params).  The heavy lifting stays in the functional
modules; the estimators validate inputs and expose fitted attributes.
"""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .dataset import Dataset, GroupSpec, moments
from .errors import InputError
from .forest import ForestParams, fit_forest, forest_oomph, permutation_importance
from .pmvd import PmvdSettings, pmvd_exact, proportional_value
from .shapley import johnson_weights, lmg_exact, lmg_sampled

_LINEAR_METHODS = ("lmg", "pmvd", "proportional_value", "johnson")


def _column_names(X):
    cols = getattr(X, "columns", None)
    return None if cols is None else [str(c) for c in cols]


class LinearImportance(BaseEstimator):
    """Decompose a linear model's R-squared into per-regressor shares.

    Parameters
    ----------
    method : one of {"lmg", "pmvd", "proportional_value", "johnson"}.
    groups : optional sequence of (label, indices) treating each group of
        regressors as a single player (lmg only).
    sample_k : if set (lmg only), estimate from this many sampled
        regressor orderings instead of exact enumeration.
    seed : random seed for the sampled mode.

    Attributes after ``fit``: ``result_`` (the full ImportanceResult),
    ``importances_`` (absolute shares), ``proportions_``, ``r_squared_``.
    """

    def __init__(self, method="lmg", groups=None, sample_k=None, seed=0):
        self.method = method
        self.groups = groups
        self.sample_k = sample_k
        self.seed = seed

    def fit(self, X, y, sample_weight=None):
        names = _column_names(X)
        X, y = check_X_y(X, y, y_numeric=True, dtype=np.float64)
        if self.method not in _LINEAR_METHODS:
            raise InputError(f"unknown method '{self.method}'; "
                             f"choose from {_LINEAR_METHODS}")
        if self.sample_k is not None and self.method != "lmg":
            raise InputError(f"sample_k applies only to lmg, not {self.method}")
        if self.groups is not None and self.method != "lmg":
            raise InputError("groups are only supported for lmg")
        d = Dataset.from_arrays(X, y, names=names, weights=sample_weight)
        mm = moments(d)
        if self.method == "lmg":
            if self.sample_k is not None:
                result = lmg_sampled(mm, k=self.sample_k, seed=self.seed)
            else:
                groups = GroupSpec(tuple(self.groups)) if self.groups is not None else None
                result = lmg_exact(mm, groups=groups)
        elif self.method == "pmvd":
            result = pmvd_exact(mm, PmvdSettings())
        elif self.method == "proportional_value":
            result = proportional_value(mm, PmvdSettings())
        else:
            result = johnson_weights(mm)
        self.n_features_in_ = X.shape[1]
        self.result_ = result
        self.importances_ = result.shares.copy()
        self.proportions_ = result.proportions.copy()
        self.r_squared_ = result.total
        return self

    def __sklearn_is_fitted__(self):
        return hasattr(self, "result_")


class ImportanceForest(RegressorMixin, BaseEstimator):
    """Regression forest exposing OOB permutation importance shares.

    Attributes after ``fit``: ``feature_importances_`` (normalized shares),
    ``raw_importances_`` (mean per-tree OOB MSE increases, may be
    negative), ``oob_r2_``, ``scaled_result_`` (shares scaled by OOB
    R-squared, with normal-approximation intervals), and ``forest_``.
    """

    def __init__(self, n_trees=500, mtry=None, min_node_size=5, seed=0):
        self.n_trees = n_trees
        self.mtry = mtry
        self.min_node_size = min_node_size
        self.seed = seed

    def fit(self, X, y):
        names = _column_names(X)
        X, y = check_X_y(X, y, y_numeric=True, dtype=np.float64)
        d = Dataset.from_arrays(X, y, names=names)
        params = ForestParams(n_trees=self.n_trees, mtry=self.mtry,
                              min_node_size=self.min_node_size, seed=self.seed)
        self.forest_ = fit_forest(d, params)
        fi = permutation_importance(self.forest_, d, seed=self.seed)
        self.importance_ = fi
        self.feature_importances_ = fi.shares.copy()
        self.raw_importances_ = fi.raw.copy()
        self.oob_r2_ = fi.oob_r2
        self.scaled_result_ = forest_oomph(fi)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "forest_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise InputError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return self.forest_.predict(X)
