"""Tabular data, weighted moment models, and subset R-squared queries.

Every linear-model importance method in this package works from a
MomentModel: the sample size plus the weighted correlation structure of
(response, regressors).  Raw data is only needed once, to build it.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NumericalError

# Increments more negative than this are a numerical failure, not noise.
NEG_TOL = 1e-10


@dataclass(frozen=True)
class Dataset:
    """A column-named numeric matrix with a designated response column.

    ``values`` has one column per name (response included, in place);
    ``weights`` are optional nonnegative per-row observation weights.
    """

    names: tuple
    values: np.ndarray
    response_index: int
    weights: np.ndarray | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "names", tuple(str(s) for s in self.names))
        if values.ndim != 2 or values.shape[1] != len(self.names):
            raise InputError("values must be a 2-d array with one column per name")
        if len(set(self.names)) != len(self.names):
            raise InputError("duplicate column names")
        if not np.isfinite(values).all():
            raise InputError("all values must be finite")
        if values.shape[0] < 3:
            raise InputError(f"need at least 3 rows, got {values.shape[0]}")
        if not 0 <= self.response_index < len(self.names):
            raise InputError("response_index out of range")
        if len(self.names) < 2:
            raise InputError("need at least one regressor besides the response")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=np.float64)
            object.__setattr__(self, "weights", w)
            if w.shape != (values.shape[0],):
                raise InputError("weights must have one entry per row")
            if not np.isfinite(w).all() or (w < 0).any():
                raise InputError("weights must be finite and nonnegative")
            if w.sum() <= 0:
                raise InputError("weights must have positive sum")

    @classmethod
    def from_arrays(cls, X, y, names=None, response_name="y", weights=None):
        """Build a Dataset from a regressor matrix and response vector."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(y, dtype=np.float64)
        if names is None:
            names = [f"x{j + 1}" for j in range(X.shape[1])]
        values = np.column_stack([y, X])
        return cls(names=(response_name, *names), values=values,
                   response_index=0, weights=weights)

    @property
    def m(self):
        return self.values.shape[0]

    @property
    def n(self):
        return len(self.names) - 1

    @property
    def response_name(self):
        return self.names[self.response_index]

    @property
    def regressor_names(self):
        return tuple(s for i, s in enumerate(self.names) if i != self.response_index)

    @property
    def y(self):
        return self.values[:, self.response_index]

    @property
    def X(self):
        cols = [i for i in range(len(self.names)) if i != self.response_index]
        return self.values[:, cols]

    def with_response(self, new_y):
        """Return a copy whose response column is replaced by ``new_y``."""
        new_y = np.asarray(new_y, dtype=np.float64)
        if new_y.shape != (self.m,):
            raise InputError("replacement response must have one value per row")
        values = self.values.copy()
        values[:, self.response_index] = new_y
        return Dataset(self.names, values, self.response_index, self.weights)

    def take_rows(self, idx):
        """Return a copy restricted to the given row indices (weights carried)."""
        w = None if self.weights is None else self.weights[idx]
        return Dataset(self.names, self.values[idx], self.response_index, w)


def load_csv(path, response, weight_col=None):
    """Load a headered, all-numeric CSV into a Dataset.

    RFC-4180, UTF-8, '.' decimal point.  Every cell must parse as a plain
    number; missing-value tokens are rejected with the offending row and
    column named (data rows are numbered from 1).
    """
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise InputError(f"cannot open file '{path}': {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"file '{path}' is empty") from None
        header = [h.strip() for h in header]
        if any(not h for h in header):
            raise InputError("empty column name in header")
        if len(set(header)) != len(header):
            dupes = sorted({h for h in header if header.count(h) > 1})
            raise InputError(f"duplicate header column(s): {', '.join(dupes)}")
        if response not in header:
            raise InputError(f"unknown response column '{response}'")
        if weight_col is not None:
            if weight_col not in header:
                raise InputError(f"unknown weight column '{weight_col}'")
            if weight_col == response:
                raise InputError("weight column cannot be the response")

        rows = []
        for rownum, row in enumerate(reader, start=1):
            if len(row) != len(header):
                raise InputError(
                    f"row {rownum} has {len(row)} cells, expected {len(header)}")
            parsed = []
            for name, cell in zip(header, row):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise InputError(
                        f"non-numeric value '{cell.strip()}' at row {rownum}, "
                        f"column '{name}'") from None
            rows.append(parsed)

    if len(rows) < 3:
        raise InputError(f"need at least 3 data rows, got {len(rows)}")
    matrix = np.array(rows, dtype=np.float64)
    if not np.isfinite(matrix).all():
        raise InputError("non-finite value in data")

    weights = None
    if weight_col is not None:
        wi = header.index(weight_col)
        weights = matrix[:, wi]
        keep = [i for i in range(len(header)) if i != wi]
        matrix = matrix[:, keep]
        header = [header[i] for i in keep]

    ri = header.index(response)
    if np.ptp(matrix[:, ri]) == 0:
        raise InputError(f"response column '{response}' is constant")
    return Dataset(names=tuple(header), values=matrix,
                   response_index=ri, weights=weights)


@dataclass(frozen=True)
class MomentModel:
    """Sample size plus weighted correlation structure of (y, X1..Xn).

    ``corr`` is (n+1)x(n+1) with the response in row/column 0.  Immutable
    after construction and safe to share across threads; the internal
    subset-R2 memo is only ever filled with values that are pure functions
    of the (frozen) correlation matrix.
    """

    n_obs: int
    var_names: tuple
    corr: np.ndarray
    sd: np.ndarray
    means: np.ndarray
    response_name: str = "y"
    _r2_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        corr = np.asarray(self.corr, dtype=np.float64)
        object.__setattr__(self, "corr", corr)
        object.__setattr__(self, "var_names", tuple(self.var_names))
        k = len(self.var_names) + 1
        if corr.shape != (k, k):
            raise InputError("correlation matrix shape does not match variable count")
        if not np.allclose(corr, corr.T, atol=1e-12):
            raise InputError("correlation matrix must be symmetric")
        if not np.allclose(np.diag(corr), 1.0, atol=1e-12):
            raise InputError("correlation matrix must have unit diagonal")
        if np.abs(corr).max() > 1 + 1e-12:
            raise InputError("correlation entries must lie in [-1, 1]")
        if self.n_obs < 1:
            raise InputError("n_obs must be positive")

    @classmethod
    def from_correlation(cls, corr, var_names=None, n_obs=100,
                         response_name="y", sd=None, means=None):
        """Build a synthetic moment model straight from a correlation matrix."""
        corr = np.asarray(corr, dtype=np.float64)
        k = corr.shape[0]
        if var_names is None:
            var_names = tuple(f"x{j}" for j in range(1, k))
        if sd is None:
            sd = np.ones(k)
        if means is None:
            means = np.zeros(k)
        return cls(n_obs=n_obs, var_names=tuple(var_names), corr=corr,
                   sd=np.asarray(sd, float), means=np.asarray(means, float),
                   response_name=response_name)

    @property
    def n(self):
        return len(self.var_names)

    def pairwise_corr(self, a, b):
        """Correlation between two regressors, by name or index."""
        ia = self.var_names.index(a) if isinstance(a, str) else int(a)
        ib = self.var_names.index(b) if isinstance(b, str) else int(b)
        return float(self.corr[ia + 1, ib + 1])


def moments(d: Dataset) -> MomentModel:
    """Weighted means, standard deviations, and correlations of (y, X).

    Weights act as frequencies: all moments use the weight total as the
    normalizer, so integer weights reproduce row duplication exactly and
    the unweighted case is weights identically 1.
    """
    order = [d.response_index] + [i for i in range(len(d.names))
                                  if i != d.response_index]
    Z = d.values[:, order]
    names_ordered = [d.names[i] for i in order]
    w = d.weights if d.weights is not None else np.ones(d.m)
    sw = w.sum()
    means = (w @ Z) / sw
    Zc = Z - means
    cov = (Zc * w[:, None]).T @ Zc / sw
    var = np.diag(cov).copy()
    for k, v in enumerate(var):
        if v <= 0:
            raise InputError(
                f"column '{names_ordered[k]}' has zero variance under the given weights")
    sd = np.sqrt(var)
    corr = cov / np.outer(sd, sd)
    corr = np.clip((corr + corr.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    return MomentModel(n_obs=d.m, var_names=d.regressor_names, corr=corr,
                       sd=sd, means=means, response_name=d.response_name)


def indices_to_mask(indices, n):
    """Pack an iterable of 0-based regressor indices into a bitmask."""
    mask = 0
    for j in indices:
        j = int(j)
        if not 0 <= j < n:
            raise InputError(f"regressor index {j} out of range [0, {n})")
        if mask >> j & 1:
            raise InputError(f"duplicate regressor index {j}")
        mask |= 1 << j
    return mask


def mask_to_indices(mask):
    out = []
    j = 0
    while mask:
        if mask & 1:
            out.append(j)
        mask >>= 1
        j += 1
    return out


def subset_r2_mask(mm: MomentModel, mask: int) -> float:
    """Squared multiple correlation of y on the regressors in ``mask``.

    Bit j of ``mask`` selects regressor j.  Values are memoized on the
    moment model.  Singular subsets fall back to a minimum-norm solve, so
    perfectly collinear regressors stay computable.
    """
    cached = mm._r2_cache.get(mask)
    if cached is not None:
        return cached
    if mask == 0:
        mm._r2_cache[mask] = 0.0
        return 0.0
    idx = mask_to_indices(mask)
    corr = mm.corr
    if len(idx) == 1:
        val = float(corr[0, idx[0] + 1] ** 2)
    else:
        pos = [j + 1 for j in idx]
        sub = corr[np.ix_(pos, pos)]
        r = corr[pos, 0]
        val = None
        try:
            val = float(r @ np.linalg.solve(sub, r))
        except np.linalg.LinAlgError:
            pass
        if val is None or not -NEG_TOL <= val <= 1 + NEG_TOL:
            sol, *_ = np.linalg.lstsq(sub, r, rcond=None)
            val = float(r @ sol)
    if not -NEG_TOL <= val <= 1 + NEG_TOL:
        raise NumericalError(
            f"subset R^2 {val!r} outside [0, 1] for regressors "
            f"{[mm.var_names[j] for j in idx]}")
    val = min(max(val, 0.0), 1.0)
    mm._r2_cache[mask] = val
    return val


def subset_r2(mm: MomentModel, subset) -> float:
    """Squared multiple correlation of y on the regressor subset (0-based)."""
    return subset_r2_mask(mm, indices_to_mask(subset, mm.n))


def all_subset_r2(mm: MomentModel, player_masks=None) -> np.ndarray:
    """R2 for every subset of players, indexed by player bitmask.

    ``player_masks`` maps player bit -> regressor bitmask; by default each
    regressor is its own player.  The full 2^p table is materialized up
    front so downstream combinators are pure array lookups.
    """
    if player_masks is None:
        player_masks = [1 << j for j in range(mm.n)]
    p = len(player_masks)
    out = np.empty(1 << p)
    for mask in range(1 << p):
        cols = 0
        rem = mask
        while rem:
            bit = rem & -rem
            cols |= player_masks[bit.bit_length() - 1]
            rem ^= bit
        out[mask] = subset_r2_mask(mm, cols)
    return out


def seq_r2(mm: MomentModel, added, given) -> float:
    """Increase in R-squared from appending ``added`` after ``given``."""
    amask = indices_to_mask(added, mm.n)
    gmask = indices_to_mask(given, mm.n)
    if amask == 0:
        raise InputError("added set must be nonempty")
    if amask & gmask:
        raise InputError("added and given sets overlap")
    diff = subset_r2_mask(mm, amask | gmask) - subset_r2_mask(mm, gmask)
    if diff < -NEG_TOL:
        raise NumericalError(f"sequential R^2 increment {diff!r} is negative")
    return max(diff, 0.0)


@dataclass(frozen=True)
class GroupSpec:
    """A partition of some regressors into named groups.

    Regressors not listed in any group are treated as singleton groups.
    """

    groups: tuple

    def __post_init__(self):
        norm = []
        seen = set()
        for label, members in self.groups:
            members = tuple(sorted(int(j) for j in members))
            if not members:
                raise InputError(f"group '{label}' is empty")
            if members[0] < 0:
                raise InputError(f"group '{label}' has a negative index")
            for j in members:
                if j in seen:
                    raise InputError(f"regressor index {j} appears in two groups")
                seen.add(j)
            norm.append((str(label), members))
        object.__setattr__(self, "groups", tuple(norm))

    def players(self, mm: MomentModel):
        """(label, member indices) per player, ordered by first member index."""
        n = mm.n
        grouped = set()
        players = []
        for label, members in self.groups:
            for j in members:
                if j >= n:
                    raise InputError(f"group '{label}' index {j} out of range")
            grouped.update(members)
            players.append((label, members))
        for j in range(n):
            if j not in grouped:
                players.append((mm.var_names[j], (j,)))
        players.sort(key=lambda it: it[1][0])
        return players
