"""Bootstrap confidence intervals for linear-model importance shares."""

import math
import threading
import warnings as _warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .dataset import Dataset, moments
from .errors import InputError, NumericalError
from .pmvd import pmvd_exact, proportional_value
from .shapley import johnson_weights, lmg_exact, lmg_sampled
from .result import ImportanceResult

SCHEMES = ("pairs", "residual_fixed_design")
INTERVALS = ("percentile", "bca")

_METHODS = {
    "lmg": lambda mm, kw: lmg_exact(mm, **kw),
    "lmg_sampled": lambda mm, kw: lmg_sampled(mm, **kw),
    "pmvd": lambda mm, kw: pmvd_exact(mm, **kw),
    "proportional_value": lambda mm, kw: proportional_value(mm, **kw),
    "johnson": lambda mm, kw: johnson_weights(mm, **kw),
}

# Observed behavior of the conditional method, surfaced so users aren't
# surprised: its intervals tend to be wider than LMG's when regressors
# are correlated.
PMVD_WIDTH_NOTE = ("PMVD bootstrap intervals are typically wider than LMG "
                   "intervals when regressors are correlated")


@dataclass(frozen=True)
class BootstrapPlan:
    """How to resample, how many times, and which interval to build.

    ``pairs`` resamples rows with replacement; ``residual_fixed_design``
    keeps X fixed, fits the full model once, and redraws i.i.d. normal
    residuals with the fitted residual standard deviation.
    """

    replicates: int
    scheme: str = "pairs"
    interval: str = "percentile"
    level: float = 0.95
    seed: int = 0
    method: str = "lmg"
    method_kwargs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise InputError(f"unknown scheme '{self.scheme}'; choose from {SCHEMES}")
        if self.interval not in INTERVALS:
            raise InputError(f"unknown interval '{self.interval}'; choose from {INTERVALS}")
        if self.method not in _METHODS:
            raise InputError(f"unknown method '{self.method}'; choose from {tuple(_METHODS)}")
        if self.replicates < 2:
            raise InputError("insufficient replicates: need at least 2")
        if not 0 < self.level < 1:
            raise InputError("confidence level must lie in (0, 1)")

    @property
    def recommended_minimum(self):
        return max(100, math.ceil(2.0 / (1.0 - self.level)))


def _fit_full_ls(d: Dataset):
    """Weighted least squares with intercept; returns fitted values and
    the residual standard deviation (df = m - n - 1)."""
    X = np.column_stack([np.ones(d.m), d.X])
    y = d.y
    w = d.weights if d.weights is not None else np.ones(d.m)
    sw = np.sqrt(w)
    beta, *_ = np.linalg.lstsq(X * sw[:, None], y * sw, rcond=None)
    fitted = X @ beta
    resid = y - fitted
    df = d.m - d.n - 1
    if df <= 0:
        raise InputError("residual scheme needs m > n + 1 rows")
    sigma2 = (w @ resid ** 2) / w.sum() * (d.m / df)
    return fitted, math.sqrt(max(sigma2, 0.0))


def bootstrap_importance(d: Dataset, plan: BootstrapPlan, n_jobs: int = 1) -> ImportanceResult:
    """Point estimate plus per-share bootstrap intervals.

    Replicate b draws its random stream from (seed, b, attempt), so results
    are bit-identical for any ``n_jobs``.  Replicates that degenerate (a
    resampled column goes constant) are redrawn, up to 10x the replicate
    count in total.  The replicate share matrix is attached to the result
    for diagnostics.
    """
    statistic = _METHODS[plan.method]
    point = statistic(moments(d), plan.method_kwargs)
    extra_warnings = []
    if plan.replicates < plan.recommended_minimum:
        extra_warnings.append(
            f"B={plan.replicates} is below the recommended minimum "
            f"{plan.recommended_minimum} for level {plan.level}")
    if plan.method == "pmvd":
        extra_warnings.append(PMVD_WIDTH_NOTE)

    if plan.scheme == "residual_fixed_design":
        fitted, resid_sd = _fit_full_ls(d)
        def draw(rng):
            return d.with_response(fitted + rng.normal(0.0, resid_sd, d.m))
    else:
        def draw(rng):
            return d.take_rows(rng.integers(0, d.m, d.m))

    B = plan.replicates
    reps = np.empty((B, point.p))
    budget = _RedrawBudget(10 * B)

    def one_replicate(b):
        attempt = 0
        while True:
            rng = np.random.default_rng([plan.seed, b, attempt])
            try:
                reps[b] = statistic(moments(draw(rng)), plan.method_kwargs).shares
                return
            except InputError:
                budget.spend()
                attempt += 1

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            list(pool.map(one_replicate, range(B)))
    else:
        for b in range(B):
            one_replicate(b)
    redraws = budget.spent

    alpha = 1.0 - plan.level
    intervals = np.empty((point.p, 2))
    if plan.interval == "percentile":
        # type-7 empirical quantile (linear interpolation), numpy's default
        for i in range(point.p):
            intervals[i] = np.quantile(reps[:, i], [alpha / 2, 1 - alpha / 2])
    else:
        jack = _jackknife_shares(d, statistic, plan.method_kwargs, point.p)
        for i in range(point.p):
            intervals[i] = bca_interval(reps[:, i], float(point.shares[i]),
                                        jack[:, i], plan.level)
    stderr = reps.std(axis=0, ddof=1)
    return point.with_uncertainty(
        stderr=stderr, intervals=intervals, level=plan.level,
        extra_settings={"bootstrap": {"scheme": plan.scheme, "replicates": B,
                                      "interval": plan.interval,
                                      "seed": plan.seed, "redraws": redraws}},
        extra_warnings=extra_warnings, replicates=reps)


class _RedrawBudget:
    """Global cap on degenerate-replicate redraws, safe under threading."""

    def __init__(self, cap):
        self.cap = cap
        self.spent = 0
        self._lock = threading.Lock()

    def spend(self):
        with self._lock:
            self.spent += 1
            if self.spent > self.cap:
                raise NumericalError(
                    f"bootstrap redraw cap exceeded ({self.cap} degenerate "
                    "replicates); the data resamples to constant columns")


def _jackknife_shares(d, statistic, kwargs, p):
    if d.m < 4:
        raise InputError("BCa jackknife needs at least 4 rows")
    jack = np.empty((d.m, p))
    all_rows = np.arange(d.m)
    for i in range(d.m):
        sub = d.take_rows(np.delete(all_rows, i))
        jack[i] = statistic(moments(sub), kwargs).shares
    return jack


def bca_interval(replicates, point, jackknife, level):
    """Bias-corrected accelerated interval from replicate and jackknife values.

    Bias correction comes from the fraction of replicates below the point
    estimate; acceleration from the jackknife skewness.  Degenerate cases
    (all replicates equal, or all on one side of the point) fall back to a
    width-zero or percentile interval with a warning.
    """
    reps = np.asarray(replicates, dtype=np.float64)
    if reps.size == 0:
        raise InputError("replicates must be nonempty")
    jack = np.asarray(jackknife, dtype=np.float64)
    alpha = 1.0 - level
    if np.ptp(reps) == 0:
        _warnings.warn("all bootstrap replicates identical; degenerate interval")
        return (point, point)
    frac = float(np.mean(reps < point))
    if frac == 0.0 or frac == 1.0:
        _warnings.warn("bias correction undefined (all replicates on one side "
                       "of the point estimate); falling back to percentile")
        lo, hi = np.quantile(reps, [alpha / 2, 1 - alpha / 2])
        return (float(lo), float(hi))
    z0 = norm.ppf(frac)
    dev = jack.mean() - jack
    denom = np.sum(dev ** 2) ** 1.5
    accel = float(np.sum(dev ** 3) / (6.0 * denom)) if denom > 0 else 0.0
    zlo, zhi = norm.ppf(alpha / 2), norm.ppf(1 - alpha / 2)
    a1 = norm.cdf(z0 + (z0 + zlo) / (1.0 - accel * (z0 + zlo)))
    a2 = norm.cdf(z0 + (z0 + zhi) / (1.0 - accel * (z0 + zhi)))
    lo, hi = np.quantile(reps, sorted([a1, a2]))
    return (float(lo), float(hi))
