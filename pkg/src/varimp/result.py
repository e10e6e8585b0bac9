"""Shared result container for all importance methods."""

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError

DECOMP_TOL = 1e-9
SHARE_NEG_TOL = 1e-10


@dataclass(frozen=True)
class ImportanceResult:
    """Per-variable (or per-group) importance shares and their provenance.

    ``shares`` are absolute allocations of the fit statistic; ``proportions``
    are shares divided by ``total``.  ``intervals`` is an optional (p, 2)
    array of per-share confidence bounds at ``level``; ``raw_shares`` holds
    unrenormalized estimates where a method distinguishes them.
    """

    method: str
    labels: tuple
    shares: np.ndarray
    total: float
    proportions: np.ndarray = None
    stderr: np.ndarray | None = None
    intervals: np.ndarray | None = None
    level: float | None = None
    raw_shares: np.ndarray | None = None
    settings: dict = field(default_factory=dict)
    warnings: tuple = ()
    replicates: np.ndarray | None = None

    def __post_init__(self):
        shares = np.asarray(self.shares, dtype=np.float64)
        object.__setattr__(self, "shares", shares)
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "warnings", tuple(self.warnings))
        if shares.shape != (len(self.labels),):
            raise NumericalError("one share per label required")
        if self.proportions is None:
            if self.total > 0:
                props = shares / self.total
            else:
                props = np.zeros_like(shares)
            object.__setattr__(self, "proportions", props)
        else:
            object.__setattr__(
                self, "proportions", np.asarray(self.proportions, dtype=np.float64))

    @property
    def p(self):
        return len(self.labels)

    def share_of(self, label):
        return float(self.shares[self.labels.index(label)])

    def proportion_of(self, label):
        return float(self.proportions[self.labels.index(label)])

    def with_uncertainty(self, stderr=None, intervals=None, level=None,
                         extra_settings=None, extra_warnings=(), replicates=None):
        """Copy with bootstrap/sampling uncertainty attached."""
        settings = dict(self.settings)
        if extra_settings:
            settings.update(extra_settings)
        return ImportanceResult(
            method=self.method, labels=self.labels, shares=self.shares,
            total=self.total, proportions=self.proportions,
            stderr=self.stderr if stderr is None else np.asarray(stderr, float),
            intervals=self.intervals if intervals is None else np.asarray(intervals, float),
            level=self.level if level is None else level,
            raw_shares=self.raw_shares, settings=settings,
            warnings=self.warnings + tuple(extra_warnings),
            replicates=self.replicates if replicates is None else replicates)


def check_decomposition(shares, total, method):
    """Enforce the decomposition contract: nonnegative shares summing to total."""
    shares = np.asarray(shares, dtype=np.float64)
    if shares.min(initial=0.0) < -SHARE_NEG_TOL:
        raise NumericalError(
            f"{method}: share {shares.min():.3e} below the nonnegativity tolerance")
    if abs(shares.sum() - total) > DECOMP_TOL:
        raise NumericalError(
            f"{method}: shares sum to {shares.sum()!r}, expected total {total!r}")
