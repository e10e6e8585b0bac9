"""Regression random forest with out-of-bag error bookkeeping.

Trees are CART-style: each node tries a random subset of features, splits
at the midpoint between sorted distinct values that maximizes the SSE
reduction, and stops at the minimum node size or zero improvement.  The
whole fit is a pure function of (data, params): every tree derives its own
random stream from (seed, tree index), and per-(tree, variable) permutation
streams derive from (seed, tree, variable), so results are reproducible
regardless of evaluation order.
"""

import math
import warnings as _warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .dataset import Dataset
from .errors import InputError, NumericalError
from .result import ImportanceResult


@dataclass(frozen=True)
class ForestParams:
    """Forest hyperparameters; ``mtry`` defaults to ceil(n/3) at fit time."""

    n_trees: int = 500
    mtry: int | None = None
    min_node_size: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise InputError("n_trees must be at least 1")
        if self.min_node_size < 2:
            raise InputError("min_node_size must be at least 2")
        if self.mtry is not None and self.mtry < 1:
            raise InputError("mtry must be at least 1")

    def resolve_mtry(self, n_features):
        mtry = self.mtry if self.mtry is not None else max(1, math.ceil(n_features / 3))
        if mtry > n_features:
            raise InputError(f"mtry={mtry} exceeds the number of regressors {n_features}")
        return mtry


@dataclass(frozen=True)
class Tree:
    """Flat-array binary regression tree.

    ``feature[k] == -1`` marks node k as a leaf with prediction ``value[k]``;
    otherwise rows with x[feature] <= threshold go to ``left``, the rest to
    ``right``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def __post_init__(self):
        if not np.isfinite(self.value[self.feature < 0]).all():
            raise InputError("leaf values must be finite")

    @property
    def used_vars(self):
        return frozenset(int(v) for v in self.feature[self.feature >= 0])

    def predict(self, X):
        X = np.asarray(X, dtype=np.float64)
        node = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            feat = self.feature[node]
            live = feat >= 0
            if not live.any():
                break
            rows = np.nonzero(live)[0]
            cur = node[rows]
            go_left = X[rows, feat[rows]] <= self.threshold[cur]
            node[rows] = np.where(go_left, self.left[cur], self.right[cur])
        return self.value[node]


def _grow_tree(X, y, rng, mtry, min_node_size):
    n_features = X.shape[1]
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        return len(feature) - 1

    root = new_node()
    stack = [(np.arange(y.size), root)]
    while stack:
        rows, node = stack.pop()
        ys = y[rows]
        value[node] = float(ys.mean())
        s = rows.size
        if s < min_node_size or np.ptp(ys) == 0:
            continue
        candidates = np.sort(rng.choice(n_features, size=mtry, replace=False))
        best_gain = 0.0
        best = None
        total = ys.sum()
        base = total * total / s
        for v in candidates:
            xs = X[rows, v]
            order = np.argsort(xs, kind="stable")
            xs_sorted = xs[order]
            distinct = xs_sorted[1:] > xs_sorted[:-1]
            if not distinct.any():
                continue
            csum_left = np.cumsum(ys[order])[:-1]
            n_left = np.arange(1, s)
            gains = (csum_left ** 2 / n_left
                     + (total - csum_left) ** 2 / (s - n_left) - base)
            gains[~distinct] = -np.inf
            bi = int(np.argmax(gains))
            if gains[bi] > best_gain:
                best_gain = float(gains[bi])
                best = (int(v), (xs_sorted[bi] + xs_sorted[bi + 1]) / 2.0)
        if best is None:
            continue
        v, thr = best
        go_left = X[rows, v] <= thr
        li, ri = new_node(), new_node()
        feature[node] = v
        threshold[node] = thr
        left[node] = li
        right[node] = ri
        stack.append((rows[~go_left], ri))
        stack.append((rows[go_left], li))

    return Tree(feature=np.array(feature, dtype=np.int32),
                threshold=np.array(threshold, dtype=np.float64),
                left=np.array(left, dtype=np.int32),
                right=np.array(right, dtype=np.int32),
                value=np.array(value, dtype=np.float64))


@dataclass(frozen=True)
class ForestModel:
    """Fitted ensemble plus per-tree in-bag bookkeeping."""

    trees: tuple
    inbag: tuple
    params: ForestParams
    n_rows: int
    feature_names: tuple
    warnings: tuple = ()

    @property
    def n_trees(self):
        return len(self.trees)

    @property
    def n_features(self):
        return len(self.feature_names)

    @property
    def used_vars(self):
        return tuple(t.used_vars for t in self.trees)

    def oob_rows(self, t):
        """Row indices out of bag for tree t."""
        counts = np.bincount(self.inbag[t], minlength=self.n_rows)
        return np.nonzero(counts == 0)[0]

    def predict(self, X):
        """Plain ensemble prediction: mean over all trees."""
        X = np.asarray(X, dtype=np.float64)
        out = np.zeros(X.shape[0])
        for tree in self.trees:
            out += tree.predict(X)
        return out / self.n_trees


def fit_forest(d: Dataset, params: ForestParams | None = None) -> ForestModel:
    """Fit a seeded regression forest by bootstrap + random-subspace CART."""
    params = params or ForestParams()
    if d.weights is not None:
        raise InputError("fit_forest does not support observation weights")
    X, y = d.X, d.y
    m = d.m
    if m < 2 * params.min_node_size:
        raise InputError(
            f"need at least {2 * params.min_node_size} rows, got {m}")
    mtry = params.resolve_mtry(d.n)
    trees = []
    inbags = []
    ever_oob = np.zeros(m, dtype=bool)
    for t in range(params.n_trees):
        rng = np.random.default_rng([params.seed, t])
        idx = rng.integers(0, m, m)
        trees.append(_grow_tree(X[idx], y[idx], rng, mtry, params.min_node_size))
        inbags.append(idx)
        ever_oob |= np.bincount(idx, minlength=m) == 0
    warn = ()
    if not ever_oob.all():
        warn = (f"{int((~ever_oob).sum())} row(s) were never out of bag; "
                "they are excluded from OOB error",)
    return ForestModel(trees=tuple(trees), inbag=tuple(inbags), params=params,
                       n_rows=m, feature_names=d.regressor_names, warnings=warn)


@dataclass(frozen=True)
class OobPrediction:
    """Per-row averaged out-of-bag prediction and a scored-row mask."""

    values: np.ndarray
    has_oob: np.ndarray

    @property
    def n_scored(self):
        return int(self.has_oob.sum())


def oob_predictions(f: ForestModel, d: Dataset) -> OobPrediction:
    """Average each row's predictions over the trees for which it was OOB.

    Rows that were in bag for every tree are flagged, not errored; they
    carry NaN and are excluded from OOB error downstream.
    """
    _check_shape(f, d)
    X = d.X
    sums = np.zeros(f.n_rows)
    counts = np.zeros(f.n_rows, dtype=np.int64)
    for t, tree in enumerate(f.trees):
        oob = f.oob_rows(t)
        if oob.size == 0:
            continue
        sums[oob] += tree.predict(X[oob])
        counts[oob] += 1
    has_oob = counts > 0
    values = np.full(f.n_rows, np.nan)
    values[has_oob] = sums[has_oob] / counts[has_oob]
    return OobPrediction(values=values, has_oob=has_oob)


def oob_mse(f: ForestModel, d: Dataset) -> float:
    """Mean squared error of averaged OOB predictions over scored rows."""
    pred = oob_predictions(f, d)
    if pred.n_scored == 0:
        raise NumericalError("no row was ever out of bag; OOB error undefined")
    scored = pred.has_oob
    return float(np.mean((d.y[scored] - pred.values[scored]) ** 2))


def oob_r2(f: ForestModel, d: Dataset) -> float:
    """1 - OOB-MSE/SST over the scored rows."""
    pred = oob_predictions(f, d)
    if pred.n_scored == 0:
        raise NumericalError("no row was ever out of bag; OOB error undefined")
    scored = pred.has_oob
    y = d.y[scored]
    sst = float(((y - y.mean()) ** 2).sum())
    if sst <= 0:
        raise InputError("response is constant over the scored rows")
    sse = float(((y - pred.values[scored]) ** 2).sum())
    return 1.0 - sse / sst


def _check_shape(f: ForestModel, d: Dataset):
    if d.m != f.n_rows or d.n != f.n_features:
        raise InputError("dataset shape does not match the fitted forest")


@dataclass(frozen=True)
class ForestImportance:
    """Permutation importances: raw MSE increases, shares, and OOB fit.

    ``per_tree[t, j]`` is tree t's OOB MSE increase after permuting
    variable j, zero when the tree never splits on j.  ``raw`` is the mean
    over all trees; it can be negative.  ``shares`` clip negatives to zero
    and normalize.
    """

    labels: tuple
    raw: np.ndarray
    shares: np.ndarray
    oob_r2: float
    per_tree: np.ndarray
    warnings: tuple = ()


def importance_shares(raw) -> np.ndarray:
    """Nonnegative shares proportional to positive raw importances.

    Negative raw values are clipped to zero (proportional apportionment is
    ill-defined with negatives); a warning is reported through the caller's
    channel, and the raw values stay visible alongside.
    """
    raw = np.asarray(raw, dtype=np.float64)
    clipped = np.maximum(raw, 0.0)
    total = clipped.sum()
    if total <= 0:
        raise NumericalError("no variable has positive raw importance")
    if (raw < 0).any():
        _warnings.warn("negative raw importances clipped to 0 for shares")
    return clipped / total


def permutation_importance(f: ForestModel, d: Dataset, seed: int = 0) -> ForestImportance:
    """OOB permutation importance with per-tree zero substitution.

    For each tree: compute its OOB MSE, then for each variable the tree
    actually uses, permute that variable's values among the OOB rows
    (one fresh seeded permutation per tree-variable pair) and record the
    MSE increase.  Trees not using a variable contribute exactly zero to
    its mean.
    """
    _check_shape(f, d)
    X, y = d.X, d.y
    per_tree = np.zeros((f.n_trees, f.n_features))
    warnings = list(f.warnings)
    empty_oob = 0
    for t, tree in enumerate(f.trees):
        oob = f.oob_rows(t)
        if oob.size == 0:
            empty_oob += 1
            continue
        Xo = X[oob]
        yo = y[oob]
        base_mse = float(np.mean((yo - tree.predict(Xo)) ** 2))
        for j in sorted(tree.used_vars):
            rng = np.random.default_rng([seed, t, j])
            Xp = Xo.copy()
            Xp[:, j] = Xo[rng.permutation(oob.size), j]
            perm_mse = float(np.mean((yo - tree.predict(Xp)) ** 2))
            per_tree[t, j] = perm_mse - base_mse
    if empty_oob:
        warnings.append(f"{empty_oob} tree(s) had no OOB rows and contribute 0")
    raw = per_tree.mean(axis=0)
    try:
        shares = importance_shares(raw)
    except NumericalError:
        shares = np.zeros(f.n_features)
        warnings.append("no variable has positive raw importance; shares set to 0")
    if (raw < 0).any():
        warnings.append("negative raw importances were clipped to 0 in shares")
    return ForestImportance(labels=f.feature_names, raw=raw, shares=shares,
                            oob_r2=oob_r2(f, d), per_tree=per_tree,
                            warnings=tuple(warnings))


def forest_oomph(fi: ForestImportance, level: float = 0.95) -> ImportanceResult:
    """Scale importance shares by OOB R-squared onto an explained-fit scale.

    Per-variable intervals are normal approximations for the raw per-tree
    means, scaled by oob_r2 / sum of positive raw importances.  A
    non-positive OOB R-squared zeroes everything with a warning.
    """
    warnings = list(fi.warnings)
    n_trees = fi.per_tree.shape[0]
    pos_total = float(np.maximum(fi.raw, 0.0).sum())
    if fi.oob_r2 <= 0 or pos_total <= 0:
        if fi.oob_r2 <= 0:
            warnings.append(
                f"OOB R-squared is not positive ({fi.oob_r2:.4g}); scaled shares set to 0")
        else:
            warnings.append("no positive raw importance; scaled shares set to 0")
        zeros = np.zeros(len(fi.labels))
        return ImportanceResult(
            method="forest", labels=fi.labels, shares=zeros, total=0.0,
            intervals=np.zeros((len(fi.labels), 2)), level=level,
            raw_shares=fi.raw, warnings=tuple(warnings),
            settings={"oob_r2": fi.oob_r2, "n_trees": n_trees})
    scale = fi.oob_r2 / pos_total
    z = norm.ppf((1.0 + level) / 2.0)
    if n_trees > 1:
        se = fi.per_tree.std(axis=0, ddof=1) / math.sqrt(n_trees)
    else:
        se = np.zeros(len(fi.labels))
    intervals = np.column_stack([(fi.raw - z * se) * scale,
                                 (fi.raw + z * se) * scale])
    return ImportanceResult(
        method="forest", labels=fi.labels, shares=fi.shares * fi.oob_r2,
        total=fi.oob_r2, proportions=fi.shares, intervals=intervals,
        level=level, raw_shares=fi.raw, warnings=tuple(warnings),
        settings={"oob_r2": fi.oob_r2, "n_trees": n_trees})


def dump_forest(f: ForestModel, stream):
    """Write the fitted trees as an indented text document.

    Line format, documented in the README: a header line with the fit
    parameters, then per tree a ``tree`` line followed by one line per
    node, either ``split <name> <= <threshold> -> <left> <right>`` or
    ``leaf value=<mean>``.
    """
    p = f.params
    stream.write(
        f"forest trees={f.n_trees} mtry={p.mtry if p.mtry is not None else 'auto'} "
        f"min_node_size={p.min_node_size} seed={p.seed} "
        f"features={','.join(f.feature_names)}\n")
    for t, tree in enumerate(f.trees):
        stream.write(f"tree {t} nodes={len(tree.feature)} "
                     f"inbag_rows={len(set(f.inbag[t].tolist()))}\n")
        for k in range(len(tree.feature)):
            if tree.feature[k] >= 0:
                stream.write(
                    f"  node {k}: split {f.feature_names[tree.feature[k]]} "
                    f"<= {float(tree.threshold[k])!r} -> {tree.left[k]} {tree.right[k]}\n")
            else:
                stream.write(f"  node {k}: leaf value={float(tree.value[k])!r}\n")
