"""Practical-effect assessment: deletion usefulness, t-squared, coefficient
shifts, and cutoff verdicts on importance proportions."""

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, MomentModel, moments, subset_r2_mask
from .errors import InputError, NumericalError
from .result import ImportanceResult

DEFAULT_CUTOFF = 0.15


def usefulness(mm: MomentModel, j: int) -> float:
    """R-squared lost by deleting regressor j from the full model.

    Equals the sequential increment of j after all other regressors.  The
    per-variable values do not form a decomposition: their sum generally
    differs from the full-model R2.
    """
    n = mm.n
    if not 0 <= j < n:
        raise InputError(f"regressor index {j} out of range [0, {n})")
    full = (1 << n) - 1
    return max(0.0, subset_r2_mask(mm, full) - subset_r2_mask(mm, full ^ (1 << j)))


def t_squared(d: Dataset, j: int) -> float:
    """Squared t-statistic of coefficient j, from R-squared ratios alone.

    (R2 - R2_without_j) * (m - n - 1) / (1 - R2) for the intercept model.
    ``m`` is the physical row count; observation weights enter only through
    the weighted R2 values.
    """
    m, n = d.m, d.n
    if not 0 <= j < n:
        raise InputError(f"regressor index {j} out of range [0, {n})")
    if m <= n + 1:
        raise InputError(f"need m > n + 1 rows for t-squared (m={m}, n={n})")
    mm = moments(d)
    full = (1 << n) - 1
    r2_full = subset_r2_mask(mm, full)
    r2_minus = subset_r2_mask(mm, full ^ (1 << j))
    increment = max(0.0, r2_full - r2_minus)
    # a vanishing increment wins before the saturation check: a regressor
    # that adds nothing has t^2 = 0 even when the rest fit perfectly
    if increment < 1e-12:
        return 0.0
    if 1.0 - r2_full < 1e-12:
        raise NumericalError("saturated fit: no residual degrees of freedom")
    return increment * (m - n - 1) / (1.0 - r2_full)


def shift_response(d: Dataset, j: int, shift: float) -> Dataset:
    """Replace the response y by y - shift * X_j.

    Least squares is linear in y, so the refit coefficient on X_j drops by
    exactly ``shift`` while every other coefficient is unchanged; testing
    the new coefficient against zero tests the old one against ``shift``.
    """
    if not 0 <= j < d.n:
        raise InputError(f"regressor index {j} out of range [0, {d.n})")
    if not np.isfinite(shift):
        raise InputError("shift must be finite")
    return d.with_response(d.y - shift * d.X[:, j])


@dataclass(frozen=True)
class OomphAssessment:
    """Cutoff verdicts per variable: oomphy, not_oomphy, or indeterminate.

    A verdict is indeterminate exactly when a confidence interval is
    available and straddles the cutoff.
    """

    labels: tuple
    proportions: np.ndarray
    verdicts: tuple
    cutoff: float
    intervals: np.ndarray | None = None
    level: float | None = None

    def verdict_of(self, label):
        return self.verdicts[self.labels.index(label)]


def assess_oomph(res: ImportanceResult, cutoff: float = DEFAULT_CUTOFF) -> OomphAssessment:
    """Judge each variable's explained-share proportion against a cutoff.

    A proportion at or above the cutoff is 'oomphy'.  When the result
    carries intervals they are rescaled to the proportion scale and an
    interval straddling the cutoff yields 'indeterminate'.
    """
    if not 0 < cutoff < 1:
        raise InputError("cutoff must lie in (0, 1)")
    props = res.proportions
    intervals = None
    if res.intervals is not None and res.total > 0:
        intervals = np.asarray(res.intervals, dtype=np.float64) / res.total
    verdicts = []
    for i in range(res.p):
        if intervals is not None:
            lo, hi = intervals[i]
            if lo >= cutoff:
                verdicts.append("oomphy")
            elif hi < cutoff:
                verdicts.append("not_oomphy")
            else:
                verdicts.append("indeterminate")
        else:
            verdicts.append("oomphy" if props[i] >= cutoff else "not_oomphy")
    return OomphAssessment(labels=res.labels, proportions=props,
                           verdicts=tuple(verdicts), cutoff=cutoff,
                           intervals=intervals, level=res.level)
