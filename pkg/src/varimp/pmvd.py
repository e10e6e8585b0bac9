"""Data-dependent order-weighted decomposition (PMVD) and the potential recursion.

Two formulations are implemented side by side.  ``pmvd_exact`` weights every
regressor ordering by the inverse product of its remaining-set increments;
orderings that zero out an increment acquire infinite weight, which is
resolved exactly through limit classes rather than floating-point infinities.
``proportional_value`` evaluates the potential recursion over all subsets.
The two disagree in general; ``compare_pmvd_variants`` measures the gap
instead of hiding it.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .dataset import MomentModel, all_subset_r2
from .errors import InputError, NumericalError
from .result import ImportanceResult, check_decomposition

FACTORIAL_GUARD = 9
SUBSET_CAP = 20


@dataclass(frozen=True)
class PmvdSettings:
    """Numerical knobs for both formulations.

    ``base_constant`` seeds the potential recursion (it cancels out of the
    returned shares); ``zero_tolerance`` is the threshold below which an
    increment counts as exactly zero; ``epsilon_check`` is the perturbation
    used by the finite-weight cross-check of the limit rule.
    """

    base_constant: float = 1.0
    epsilon_check: float = 1e-8
    zero_tolerance: float = 1e-12
    factorial_guard: int = FACTORIAL_GUARD
    subset_cap: int = SUBSET_CAP

    def __post_init__(self):
        if self.base_constant <= 0 or self.epsilon_check <= 0 or self.zero_tolerance <= 0:
            raise InputError("PmvdSettings values must be strictly positive")


@dataclass(frozen=True)
class OrderWeight:
    """One ordering's weight in limit form.

    The raw weight is the product of inverses of the remaining-set
    increments; increments that vanish contribute a factor of 1/0.  We
    record how many vanished (``zero_factor_count``) and the log of the
    finite part, so weights compare exactly: more zero factors dominate,
    then larger finite log weight.
    """

    order: tuple
    zero_factor_count: int
    finite_log_weight: float


def _prefix_r2(r2_by_mask, order):
    """R2 of each prefix of ``order``: q[0]=0 .. q[n]=full."""
    q = np.empty(len(order) + 1)
    q[0] = 0.0
    mask = 0
    for i, j in enumerate(order):
        mask |= 1 << j
        q[i + 1] = r2_by_mask[mask]
    return q


def _weight_parts(q, total, zero_tol):
    """(zero_factor_count, finite_log_weight) from one order's prefix R2s."""
    zeros = 0
    logw = 0.0
    for i in range(1, len(q) - 1):
        factor = total - q[i]
        if factor < zero_tol:
            zeros += 1
        else:
            logw -= math.log(factor)
    return zeros, logw


def order_weight(mm: MomentModel, order, settings: PmvdSettings | None = None) -> OrderWeight:
    """Weight of one regressor ordering, in limit representation."""
    settings = settings or PmvdSettings()
    order = tuple(int(j) for j in order)
    if sorted(order) != list(range(mm.n)):
        raise InputError(f"order {order} is not a permutation of 0..{mm.n - 1}")
    r2_by_mask = all_subset_r2(mm)
    q = _prefix_r2(r2_by_mask, order)
    zeros, logw = _weight_parts(q, r2_by_mask[-1], settings.zero_tolerance)
    return OrderWeight(order=order, zero_factor_count=zeros, finite_log_weight=logw)


def _enumerate_orders(mm, settings):
    n = mm.n
    if n > settings.factorial_guard:
        raise InputError(
            f"n={n} exceeds the exact order-enumeration guard "
            f"{settings.factorial_guard}; no approximation scheme is offered")
    r2_by_mask = all_subset_r2(mm)
    total = float(r2_by_mask[-1])
    orders = list(itertools.permutations(range(n)))
    inc = np.empty((len(orders), n))
    zeros = np.empty(len(orders), dtype=np.int64)
    logw = np.empty(len(orders))
    for row, order in enumerate(orders):
        q = _prefix_r2(r2_by_mask, order)
        for i, j in enumerate(order):
            inc[row, j] = q[i + 1] - q[i]
        zeros[row], logw[row] = _weight_parts(q, total, settings.zero_tolerance)
    return inc, zeros, logw, total


def pmvd_exact(mm: MomentModel, settings: PmvdSettings | None = None) -> ImportanceResult:
    """Order-weighted shares with exact limit handling of vanishing increments.

    All n! orderings are enumerated; normalized weight lands entirely on the
    class with the most zero increments (the limit of perturbing every zero
    to epsilon), which is what makes a truly redundant regressor's share
    vanish.
    """
    settings = settings or PmvdSettings()
    inc, zeros, logw, total = _enumerate_orders(mm, settings)
    zmax = zeros.max()
    in_class = zeros == zmax
    log_norm = logsumexp(logw[in_class])
    weights = np.zeros(len(zeros))
    weights[in_class] = np.exp(logw[in_class] - log_norm)
    shares = weights @ inc
    if not np.isfinite(shares).all():
        raise NumericalError("pmvd: degenerate order weights on every ordering")
    check_decomposition(shares, total, "pmvd")
    return ImportanceResult(
        method="pmvd", labels=mm.var_names, shares=shares, total=total,
        settings={"zero_factor_class": int(zmax),
                  "orders_in_class": int(in_class.sum())})


def pmvd_perturbed(mm: MomentModel, settings: PmvdSettings | None = None) -> ImportanceResult:
    """Finite-weight cross-check: zero increments replaced by epsilon_check.

    Computes the same order-weighted shares with every vanishing factor
    perturbed to a small positive epsilon and all n! weights kept finite.
    Agreement with pmvd_exact validates the limit rule.
    """
    settings = settings or PmvdSettings()
    inc, zeros, logw, total = _enumerate_orders(mm, settings)
    logw = logw - zeros * math.log(settings.epsilon_check)
    weights = np.exp(logw - logsumexp(logw))
    shares = weights @ inc
    check_decomposition(shares, total, "pmvd_perturbed")
    return ImportanceResult(
        method="pmvd", labels=mm.var_names, shares=shares, total=total,
        settings={"perturbed_epsilon": settings.epsilon_check})


def proportional_value(mm: MomentModel, settings: PmvdSettings | None = None) -> ImportanceResult:
    """Shares from the potential recursion over all 2^n subsets.

    P(empty) = c; P(S) is the subset R2 times the inverse sum of inverse
    potentials of S's one-smaller subsets; a variable's share is
    P(all)/P(all minus it).  Subsets with zero R2 are handled in the same
    limit representation as the order weights: each P carries an epsilon
    order and a log coefficient, and ratios across different orders vanish.
    The shares sum to the full-model R2 identically; c cancels.
    """
    settings = settings or PmvdSettings()
    n = mm.n
    if n > settings.subset_cap:
        raise InputError(f"n={n} exceeds the subset-recursion cap {settings.subset_cap}")
    r2_by_mask = all_subset_r2(mm)
    total = float(r2_by_mask[-1])
    size = 1 << n
    eps_order = np.zeros(size, dtype=np.int64)
    log_p = np.empty(size)
    log_p[0] = math.log(settings.base_constant)
    for mask in range(1, size):
        child_orders = []
        child_logs = []
        rem = mask
        while rem:
            bit = rem & -rem
            rem ^= bit
            cm = mask ^ bit
            child_orders.append(eps_order[cm])
            child_logs.append(log_p[cm])
        kmax = max(child_orders)
        dominant = [-lg for k, lg in zip(child_orders, child_logs) if k == kmax]
        inner = -logsumexp(dominant)
        r2 = r2_by_mask[mask]
        if r2 >= settings.zero_tolerance:
            eps_order[mask] = kmax
            log_p[mask] = math.log(r2) + inner
        else:
            eps_order[mask] = kmax + 1
            log_p[mask] = inner
        if not math.isfinite(log_p[mask]):
            names = [mm.var_names[j] for j in range(n) if mask >> j & 1]
            raise NumericalError(
                f"proportional value recursion failed at subset {{{', '.join(names)}}}")
    full = size - 1
    shares = np.empty(n)
    for j in range(n):
        without = full ^ (1 << j)
        if eps_order[full] == eps_order[without]:
            shares[j] = math.exp(log_p[full] - log_p[without])
        else:
            shares[j] = 0.0
    check_decomposition(shares, total, "proportional_value")
    return ImportanceResult(
        method="proportional_value", labels=mm.var_names, shares=shares,
        total=total, settings={"base_constant": settings.base_constant})


@dataclass(frozen=True)
class PmvdComparison:
    """Side-by-side results of the two formulations and their largest gap."""

    order_weighted: ImportanceResult
    recursive: ImportanceResult
    max_gap: float

    def agrees(self, tol: float) -> bool:
        return self.max_gap <= tol


def compare_pmvd_variants(mm: MomentModel, settings: PmvdSettings | None = None) -> PmvdComparison:
    """Run both formulations and report how far apart their shares are.

    The order-weighted form satisfies the exclusion property; the recursion
    does not in general.  This cross-check documents the discrepancy on a
    given model rather than asserting agreement.
    """
    ow = pmvd_exact(mm, settings)
    rec = proportional_value(mm, settings)
    gap = float(np.abs(ow.shares - rec.shares).max())
    return PmvdComparison(order_weighted=ow, recursive=rec, max_gap=gap)
