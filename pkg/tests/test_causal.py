"""Marginal/conditional screening and intervention ranking."""

import numpy as np
import pytest

from varimp import (Dataset, ImportanceResult, InputError, MomentModel,
                    ScreenSettings, discern_structure, important_set,
                    lmg_exact, moments, pmvd_exact, rank_interventions)

from helpers import random_dataset


def _res(labels, proportions, total=1.0):
    props = np.asarray(proportions, dtype=float)
    return ImportanceResult(method="lmg", labels=labels, shares=props * total,
                            total=total)


def chain_dataset(m=2000, seed=77, path=0.8):
    """x3 -> x1 -> y with an independent x2 -> y, all linear Gaussian."""
    rng = np.random.default_rng(seed)
    x3 = rng.normal(size=m)
    x1 = path * x3 + np.sqrt(1 - path ** 2) * rng.normal(size=m)
    x2 = rng.normal(size=m)
    y = path * x1 + path * x2 + np.sqrt(0.72) * rng.normal(size=m)
    return Dataset.from_arrays(np.column_stack([x1, x2, x3]), y)


class TestImportantSet:
    def test_basic_selection(self):
        res = _res(("x1", "x2", "x3"), [0.5, 0.3, 0.02])
        assert important_set(res, 0.15) == {"x1", "x2"}

    def test_all_below_cutoff(self):
        res = _res(("x1", "x2"), [0.1, 0.05])
        assert important_set(res, 0.15) == frozenset()

    def test_boundary_included(self):
        res = _res(("x1",), [0.15])
        assert important_set(res, 0.15) == {"x1"}

    def test_uses_proportions_not_shares(self):
        # same proportions at a different total select the same set
        a = _res(("x1", "x2"), [0.5, 0.1], total=1.0)
        b = _res(("x1", "x2"), [0.5, 0.1], total=0.2)
        assert important_set(a, 0.15) == important_set(b, 0.15)


class TestDiscernStructure:
    def test_identical_sets_mean_no_indirect(self):
        rng = np.random.default_rng(71)
        mm = moments(random_dataset(rng, 3, 100))
        res = _res(mm.var_names, [0.5, 0.4, 0.01])
        report = discern_structure(res, res, mm)
        assert report.indirect == frozenset()
        assert report.edges == ()
        assert report.direct == {"x1", "x2"}

    def test_chain_simulation(self):
        d = chain_dataset()
        mm = moments(d)
        report = discern_structure(lmg_exact(mm), pmvd_exact(mm), mm)
        assert report.direct == {"x1", "x2"}
        assert report.indirect == {"x3"}
        accepted = {(e.source, e.target) for e in report.edges if e.status == "accepted"}
        rejected = {(e.source, e.target) for e in report.edges if e.status == "rejected"}
        assert accepted == {("x3", "x1")}
        assert rejected == {("x3", "x2")}
        assert report.unresolved_pairs == ()
        assert report.assumptions  # mandatory preconditions echo

    def test_correlated_indirect_pair_is_unresolved(self):
        corr = np.array([
            [1.0, 0.7, 0.5, 0.5],
            [0.7, 1.0, 0.4, 0.1],
            [0.5, 0.4, 1.0, 0.6],
            [0.5, 0.1, 0.6, 1.0],
        ])
        mm = MomentModel.from_correlation(corr, var_names=("x1", "x2", "x3"))
        marginal = _res(("x1", "x2", "x3"), [0.4, 0.3, 0.3])
        conditional = _res(("x1", "x2", "x3"), [0.6, 0.02, 0.02])
        report = discern_structure(marginal, conditional, mm)
        assert report.indirect == {"x2", "x3"}
        assert len(report.unresolved_pairs) == 1
        a, b, rho = report.unresolved_pairs[0]
        assert {a, b} == {"x2", "x3"}
        assert rho == pytest.approx(0.6)
        # the x2 -> x1 edge clears the threshold, x3 -> x1 does not
        statuses = {(e.source, e.target): e.status for e in report.edges}
        assert statuses[("x2", "x1")] == "accepted"
        assert statuses[("x3", "x1")] == "rejected"

    def test_conditional_only_is_unclassifiable(self):
        rng = np.random.default_rng(72)
        mm = moments(random_dataset(rng, 3, 100))
        marginal = _res(mm.var_names, [0.5, 0.01, 0.01])
        conditional = _res(mm.var_names, [0.5, 0.4, 0.01])
        report = discern_structure(marginal, conditional, mm)
        assert report.unclassifiable == {"x2"}

    def test_label_mismatch_rejected(self):
        rng = np.random.default_rng(73)
        mm = moments(random_dataset(rng, 3, 100))
        a = _res(("x1", "x2", "x3"), [0.5, 0.3, 0.1])
        b = _res(("x1", "x2", "z9"), [0.5, 0.3, 0.1])
        with pytest.raises(InputError, match="different variables"):
            discern_structure(a, b, mm)

    def test_raising_cutoff_never_grows_selection(self):
        d = chain_dataset()
        mm = moments(d)
        marginal, conditional = lmg_exact(mm), pmvd_exact(mm)
        prev = None
        for cutoff in (0.05, 0.15, 0.3, 0.6):
            rep = discern_structure(marginal, conditional, mm,
                                    ScreenSettings(importance_cutoff=cutoff))
            selected = rep.direct | rep.indirect
            if prev is not None:
                assert selected <= prev
            prev = selected

    def test_invariant_to_variable_order(self):
        d = chain_dataset()
        mm = moments(d)
        marginal, conditional = lmg_exact(mm), pmvd_exact(mm)
        base = discern_structure(marginal, conditional, mm)
        perm = [2, 0, 1]
        shuffled = ImportanceResult(
            method="lmg", labels=[marginal.labels[i] for i in perm],
            shares=marginal.shares[perm], total=marginal.total)
        report = discern_structure(shuffled, conditional, mm)
        assert report.direct == base.direct
        assert report.indirect == base.indirect
        assert set(report.edges) == set(base.edges)


class TestRankInterventions:
    def test_descending_share_order(self):
        res = _res(("x1", "x2", "x3"), [0.4, 0.1, 0.3])
        ranking = rank_interventions(res)
        assert [lb for lb, _ in ranking.ranked] == ["x1", "x3", "x2"]

    def test_exclusions_listed_separately(self):
        res = _res(("x1", "x2", "x3"), [0.4, 0.1, 0.3])
        ranking = rank_interventions(res, excluded={"x1"})
        assert [lb for lb, _ in ranking.ranked] == ["x3", "x2"]
        assert ranking.excluded == (("x1", "user-excluded"),)

    def test_all_excluded(self):
        res = _res(("x1", "x2"), [0.4, 0.1])
        ranking = rank_interventions(res, excluded={"x1", "x2"})
        assert ranking.ranked == ()
        assert len(ranking.excluded) == 2

    def test_ties_break_by_label(self):
        res = _res(("b", "a", "c"), [0.2, 0.2, 0.6])
        ranking = rank_interventions(res)
        assert [lb for lb, _ in ranking.ranked] == ["c", "a", "b"]

    def test_unknown_exclusion_rejected(self):
        res = _res(("x1",), [0.4])
        with pytest.raises(InputError, match="not in the result"):
            rank_interventions(res, excluded={"zz"})
