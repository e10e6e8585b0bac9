"""Shared fixtures-as-data and generators for the test suite."""

import numpy as np

from varimp import Dataset, MomentModel, moments

# Two correlated regressors: r1y=0.6, r2y=0.3, r12=0.4.  Hand values for
# this model are worked out in the test modules that use them.
PAIR_CORR = np.array([[1.0, 0.6, 0.3],
                      [0.6, 1.0, 0.4],
                      [0.3, 0.4, 1.0]])

# Three mutually uncorrelated regressors: r1y=0.6, r2y=0.0, r3y=0.3.
ORTHO3_CORR = np.array([[1.0, 0.6, 0.0, 0.3],
                        [0.6, 1.0, 0.0, 0.0],
                        [0.0, 0.0, 1.0, 0.0],
                        [0.3, 0.0, 0.0, 1.0]])

# General 3-regressor model used to pin the relative-weights fixture.
GEN3_CORR = np.array([[1.0, 0.6, 0.5, 0.4],
                      [0.6, 1.0, 0.3, 0.2],
                      [0.5, 0.3, 1.0, 0.1],
                      [0.4, 0.2, 0.1, 1.0]])


def pair_mm():
    return MomentModel.from_correlation(PAIR_CORR, var_names=("x1", "x2"))


def ortho3_mm():
    return MomentModel.from_correlation(ORTHO3_CORR, var_names=("x1", "x2", "x3"))


def gen3_mm():
    return MomentModel.from_correlation(GEN3_CORR, var_names=("x1", "x2", "x3"))


def random_dataset(rng, n, m, noise_sd=1.0):
    """Random correlated design with a random linear signal."""
    mix = rng.normal(size=(n, n)) + np.eye(n)
    X = rng.normal(size=(m, n)) @ mix
    beta = rng.normal(size=n)
    y = X @ beta + noise_sd * rng.normal(size=m)
    return Dataset.from_arrays(X, y)


def random_corpus(seed=20260810, sizes=(2, 3, 4, 5, 6), per_size=40, m=40):
    """The standing corpus of random moment models: one entry per dataset."""
    rng = np.random.default_rng(seed)
    out = []
    for n in sizes:
        for _ in range(per_size):
            out.append(moments(random_dataset(rng, n, m)))
    return out


def add_noise_regressor(mm, name="noise"):
    """Extend a moment model with a regressor uncorrelated with everything."""
    k = mm.corr.shape[0]
    corr = np.eye(k + 1)
    corr[:k, :k] = mm.corr
    return MomentModel.from_correlation(corr, var_names=mm.var_names + (name,),
                                        n_obs=mm.n_obs)


def permute_regressors(mm, perm):
    """Reorder the regressors of a moment model by the given permutation."""
    order = [0] + [p + 1 for p in perm]
    corr = mm.corr[np.ix_(order, order)]
    names = tuple(mm.var_names[p] for p in perm)
    return MomentModel.from_correlation(corr, var_names=names, n_obs=mm.n_obs)


def stump_tree(threshold, left_value, right_value, feature=0):
    from varimp.forest import Tree
    return Tree(feature=np.array([feature, -1, -1], dtype=np.int32),
                threshold=np.array([threshold, 0.0, 0.0]),
                left=np.array([1, -1, -1], dtype=np.int32),
                right=np.array([2, -1, -1], dtype=np.int32),
                value=np.array([0.0, left_value, right_value]))


def leaf_tree(value):
    from varimp.forest import Tree
    return Tree(feature=np.array([-1], dtype=np.int32),
                threshold=np.array([0.0]), left=np.array([-1], dtype=np.int32),
                right=np.array([-1], dtype=np.int32), value=np.array([value]))


def forest_hand_fixture(n_features=1):
    """Three hand-built trees over rows 0..9 with y = x.

    Tree A splits at 4.5 (leaves 2.0 / 7.0), in-bag rows 0-4; tree B splits
    at 2.5 (leaves 1.0 / 6.0), in-bag rows 5-9; tree C is the constant 4.5,
    in-bag even rows.  Averaging predictions over each row's OOB trees gives
    HAND_OOB_PRED; the squared errors sum to 28.8125 (MSE 2.88125) and SST
    is 82.5, so the OOB R-squared is 1 - 28.8125/82.5.
    """
    from varimp.forest import ForestModel
    from varimp import Dataset, ForestParams
    x = np.arange(10.0)
    X = x[:, None] if n_features == 1 else np.column_stack([x, np.cos(x)])
    d = Dataset.from_arrays(X, x.copy())
    trees = (stump_tree(4.5, 2.0, 7.0), stump_tree(2.5, 1.0, 6.0), leaf_tree(4.5))
    inbag = (np.array([0, 1, 2, 3, 4]), np.array([5, 6, 7, 8, 9]),
             np.array([0, 2, 4, 6, 8]))
    model = ForestModel(trees=trees, inbag=inbag,
                        params=ForestParams(n_trees=3, mtry=1, min_node_size=2, seed=0),
                        n_rows=10, feature_names=d.regressor_names)
    return model, d


HAND_OOB_PRED = np.array([1.0, 2.75, 1.0, 5.25, 6.0, 5.75, 7.0, 5.75, 7.0, 5.75])
HAND_OOB_MSE = 2.88125
HAND_OOB_R2 = 1.0 - 28.8125 / 82.5
