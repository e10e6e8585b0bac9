"""Averaged-over-orderings R-squared decomposition (LMG) and relatives.

Four routes to the same quantity live here: exact subset enumeration,
brute-force averaging over all orderings (kept as a cross-check oracle),
Monte Carlo order sampling, and the relative-weights approximation that
shortcuts the averaging through a symmetric square root.
"""

import itertools
import math
from fractions import Fraction

import numpy as np

from .dataset import GroupSpec, MomentModel, all_subset_r2, subset_r2_mask
from .errors import InputError
from .result import ImportanceResult, check_decomposition

SUBSET_CAP = 20
PERMUTATION_GUARD = 8


def gamma_weight(n: int, m_sub: int) -> Fraction:
    """Exact subset weight m!(n-m-1)!/n! for a subset of size ``m_sub``.

    Kept rational; callers convert to float only when combining, so the
    factorials never cancel in floating point.
    """
    if n < 1:
        raise InputError("n must be positive")
    if not 0 <= m_sub <= n - 1:
        raise InputError(f"subset size {m_sub} must lie in [0, {n - 1}]")
    return Fraction(math.factorial(m_sub) * math.factorial(n - m_sub - 1),
                    math.factorial(n))


def _resolve_players(mm: MomentModel, groups):
    if groups is None:
        return [(name, (j,)) for j, name in enumerate(mm.var_names)]
    if not isinstance(groups, GroupSpec):
        groups = GroupSpec(tuple(groups))
    return groups.players(mm)


def lmg_exact(mm: MomentModel, groups=None, subset_cap: int = SUBSET_CAP) -> ImportanceResult:
    """Exact R-squared shares by weighted subset enumeration.

    With ``groups``, each group acts as a single player (grouped-variable
    decomposition); shares are reported at the player level.  All 2^p
    subset values are materialized before combining, so memory scales as
    2^p; ``subset_cap`` bounds p.
    """
    players = _resolve_players(mm, groups)
    p = len(players)
    if p > subset_cap:
        raise InputError(
            f"{p} players exceed the exact-enumeration cap {subset_cap}; "
            "use lmg_sampled for large models")
    player_masks = [_member_mask(members) for _, members in players]
    r2 = all_subset_r2(mm, player_masks)
    gammas = [float(gamma_weight(p, s)) for s in range(p)]

    full = (1 << p) - 1
    shares = np.zeros(p)
    for mask in range(full):
        base = r2[mask]
        g = gammas[mask.bit_count()]
        for j in range(p):
            bit = 1 << j
            if not mask & bit:
                shares[j] += g * (r2[mask | bit] - base)
    total = float(r2[full])
    check_decomposition(shares, total, "lmg")
    method = "lmg" if groups is None else "owen"
    return ImportanceResult(method=method, labels=[lb for lb, _ in players],
                            shares=shares, total=total,
                            settings={"players": p, "mode": "exact"})


def _member_mask(members):
    mask = 0
    for j in members:
        mask |= 1 << j
    return mask


def _order_increments(mm: MomentModel, orders, n):
    """Sequential R2 increments, one row per order, one column per regressor."""
    inc = np.empty((len(orders), n))
    for row, order in enumerate(orders):
        mask = 0
        prev = 0.0
        for j in order:
            mask |= 1 << j
            cur = subset_r2_mask(mm, mask)
            inc[row, j] = cur - prev
            prev = cur
    return inc


def lmg_permutation_oracle(mm: MomentModel, guard: int = PERMUTATION_GUARD) -> ImportanceResult:
    """Brute-force average of sequential increments over all n! orders.

    Exists purely as an independent cross-check for lmg_exact; factorial
    cost limits it to small n.
    """
    n = mm.n
    if n > guard:
        raise InputError(f"permutation oracle limited to n <= {guard}, got {n}")
    orders = list(itertools.permutations(range(n)))
    inc = _order_increments(mm, orders, n)
    shares = inc.mean(axis=0)
    total = subset_r2_mask(mm, (1 << n) - 1)
    check_decomposition(shares, total, "lmg_permutation_oracle")
    return ImportanceResult(method="lmg", labels=mm.var_names, shares=shares,
                            total=total, settings={"mode": "permutation_oracle"})


def lmg_sampled(mm: MomentModel, k: int, seed: int = 0) -> ImportanceResult:
    """Monte Carlo estimate of the averaged-order shares from k random orders.

    ``shares`` are renormalized to sum to the exact full-model R2 so the
    decomposition contract holds downstream; the unbiased raw means are kept
    in ``raw_shares``.  When k covers all n! orders the sampler switches to
    exhaustive enumeration (sampling without replacement of every order) and
    reproduces the permutation oracle exactly.
    """
    if k < 1:
        raise InputError("sample count k must be at least 1")
    n = mm.n
    nfact = math.factorial(n) if n <= 13 else None
    exhaustive = nfact is not None and k >= nfact
    if exhaustive:
        orders = list(itertools.permutations(range(n)))
    else:
        rng = np.random.default_rng(seed)
        orders = [tuple(rng.permutation(n)) for _ in range(k)]
    inc = _order_increments(mm, orders, n)
    raw = inc.mean(axis=0)
    if len(orders) > 1:
        stderr = inc.std(axis=0, ddof=1) / math.sqrt(len(orders))
    else:
        stderr = np.zeros(n)
    total = subset_r2_mask(mm, (1 << n) - 1)
    if exhaustive:
        shares = raw.copy()
    else:
        raw_sum = raw.sum()
        shares = raw * (total / raw_sum) if raw_sum > 0 else raw.copy()
    check_decomposition(shares, total, "lmg_sampled")
    return ImportanceResult(
        method="lmg_sampled", labels=mm.var_names, shares=shares, total=total,
        stderr=stderr, raw_shares=raw,
        settings={"k": len(orders), "seed": seed, "exhaustive": exhaustive})


def johnson_weights(mm: MomentModel) -> ImportanceResult:
    """Relative-weights shares through the symmetric square root of corr(X).

    A fast approximation to the averaged-order decomposition, labeled as
    such in the result metadata and never substituted for it silently.
    Requires a positive-definite regressor correlation matrix.
    """
    n = mm.n
    rxx = mm.corr[1:, 1:]
    rxy = mm.corr[1:, 0]
    evals, vecs = np.linalg.eigh(rxx)
    if evals.min() <= 1e-10:
        raise InputError(
            "regressor correlation matrix is not positive definite "
            f"(smallest eigenvalue {evals.min():.3e}); johnson_weights needs "
            "linearly independent regressors")
    lam = (vecs * np.sqrt(evals)) @ vecs.T
    b = vecs @ ((vecs.T @ rxy) / np.sqrt(evals))
    shares = (lam ** 2) @ (b ** 2)
    total = subset_r2_mask(mm, (1 << n) - 1)
    check_decomposition(shares, total, "johnson")
    return ImportanceResult(method="johnson", labels=mm.var_names,
                            shares=shares, total=total,
                            settings={"approximates": "lmg"})
