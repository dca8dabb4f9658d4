"""Tree growth, split search, ordered target statistics and containers."""
import math

import numpy as np
import pytest

from helpers import brute_force_root_split, micro_instance
from zitboost.engine import (
    BoostConfig,
    Dataset,
    DecisionTree,
    FeatureBuilder,
    OrderedTsEncoder,
    PresortedMatrix,
    bucket_edges,
    feature_importance,
    fit_tree,
    ordered_ts_encode,
    predict_score,
    split_gain,
    target_buckets,
)


def _fit(X, g, h, **cfg):
    return fit_tree(np.asarray(g, float), np.asarray(h, float),
                    PresortedMatrix(np.asarray(X, float)), BoostConfig(**cfg))


@pytest.fixture
def categorical_data(rng):
    n = 300
    y = np.where(rng.random(n) < 0.6, 0.0, rng.gamma(2.0, 1.5, n))
    return Dataset(numeric={"x": rng.normal(size=n)},
                   categorical={"c": rng.choice(["p", "q", "r", "s"], n)},
                   exposure=np.ones(n), target=y)


class TestSplitSearch:
    def test_hand_example(self):
        tree = _fit([[1], [2], [3], [4]], [-1, -1, 1, 1], [1, 1, 1, 1], max_depth=1,
                    l2_lambda=0.0)
        assert tree.feature[0] == 0
        assert tree.threshold[0] == 2.5
        assert tree.gain[0] == 2.0
        assert tree.value[tree.left[0]] == 1.0
        assert tree.value[tree.right[0]] == -1.0

    def test_split_gain_formula(self):
        assert split_gain(2.0, 1.0, -2.0, 1.0, 0.0) == pytest.approx(4.0)
        assert split_gain(1.0, 1.0, 1.0, 1.0, 0.0) == 0.0

    def test_root_gain_matches_brute_force(self, rng):
        for _ in range(100):
            X, g, h, lam = micro_instance(rng)
            tree = _fit(X, g, h, max_depth=1, l2_lambda=lam)
            gain, f, thr = brute_force_root_split(X, g, h, lam)
            if gain > 0:
                assert tree.gain[0] == gain
                assert (tree.feature[0], tree.threshold[0]) == (f, thr)
            else:
                assert tree.feature[0] == -1

    def test_ties_prefer_lowest_feature_then_threshold(self):
        X = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
        tree = _fit(X, [1, -1, 1, -1], [1, 1, 1, 1], max_depth=1, l2_lambda=0.0)
        assert tree.feature[0] == 0
        assert tree.threshold[0] == 0.5

    def test_no_split_on_zero_gain(self):
        tree = _fit([[1], [2], [3]], [1, 1, 1], [1, 1, 1], max_depth=3, l2_lambda=0.0)
        assert tree.n_nodes == 1
        assert tree.value[0] == pytest.approx(-1.0)

    def test_constant_feature_never_splits(self):
        tree = _fit([[5.0]] * 6, [1, -1, 2, -2, 3, -3], [1] * 6, max_depth=2)
        assert tree.n_nodes == 1

    def test_rows_at_threshold_go_left(self):
        tree = _fit([[0.0], [1.0]], [-1, 1], [1, 1], max_depth=1, l2_lambda=0.0)
        assert tree.apply(np.array([[0.5]]))[0] == tree.left[0]
        assert tree.apply(np.array([[0.5000001]]))[0] == tree.right[0]


class TestTreeGrowth:
    def test_depth_and_leaf_size_limits(self, rng):
        X = rng.normal(size=(200, 3))
        g, h = rng.normal(size=200), rng.uniform(0.5, 1.5, 200)
        tree = _fit(X, g, h, max_depth=3, min_samples_leaf=15, l2_lambda=1.0)
        assert tree.depth <= 3
        leaves = tree.feature == -1
        assert np.all(tree.n_samples[leaves] >= 15)
        assert tree.n_samples[0] == 200

    def test_leaf_values_are_newton_steps(self, rng):
        X = rng.normal(size=(120, 2))
        g, h = rng.normal(size=120), rng.uniform(0.5, 1.5, 120)
        tree = _fit(X, g, h, max_depth=2, l2_lambda=2.0)
        leaf = tree.apply(X)
        for node in np.unique(leaf):
            rows = leaf == node
            assert tree.value[node] == pytest.approx(-g[rows].sum() / (h[rows].sum() + 2.0),
                                                     rel=1e-12)

    def test_leaf_values_minimize_quadratic_objective(self, rng):
        X = rng.normal(size=(80, 2))
        g, h = rng.normal(size=80), rng.uniform(0.5, 1.5, 80)
        tree = _fit(X, g, h, max_depth=2, l2_lambda=1.0)
        leaf = tree.apply(X)

        def objective(values):
            w = values[leaf]
            return np.sum(g * w + 0.5 * h * w * w) + 0.5 * np.sum(values[np.unique(leaf)] ** 2)

        base = objective(tree.value)
        for node in np.unique(leaf):
            for eps in (-1e-3, 1e-3):
                v = tree.value.copy()
                v[node] += eps
                assert objective(v) > base

    def test_hessian_floor(self):
        tree = _fit([[0.0], [1.0]], [1.0, 1.0], [0.0, 0.0], max_depth=1, l2_lambda=0.0)
        assert np.isfinite(tree.value).all()

    def test_non_finite_gradient_rejected(self):
        with pytest.raises(FloatingPointError):
            _fit([[0.0], [1.0]], [np.nan, 1.0], [1.0, 1.0])

    def test_serialization_round_trip(self, rng):
        X = rng.normal(size=(60, 2))
        tree = _fit(X, rng.normal(size=60), np.ones(60), max_depth=3)
        again = DecisionTree.from_dict(tree.to_dict())
        assert np.array_equal(again.predict(X), tree.predict(X))
        assert again.to_dict() == tree.to_dict()

    def test_predict_score_scales_by_learning_rate(self, rng):
        X = rng.normal(size=(30, 1))
        trees = [_fit(X, rng.normal(size=30), np.ones(30), max_depth=2) for _ in range(3)]
        expected = sum(0.1 * t.predict(X) for t in trees)
        assert np.allclose(predict_score(trees, 0.1, X), expected)


class TestImportance:
    def test_sums_to_one_hundred(self, rng):
        X = rng.normal(size=(100, 3))
        g = np.where(X[:, 1] > 0, 1.0, -1.0) + 0.1 * rng.normal(size=100)
        tree = _fit(X, g, np.ones(100), max_depth=2)
        imp = feature_importance([tree], ["a", "b", "c"])
        assert math.fsum(imp.values()) == pytest.approx(100.0)
        assert max(imp, key=imp.get) == "b"

    def test_grouping(self, rng):
        X = rng.normal(size=(50, 2))
        tree = _fit(X, X[:, 0] + X[:, 1], np.ones(50), max_depth=2)
        imp = feature_importance([tree], ["c[ts0]", "c[ts1]"], group=["c", "c"])
        assert imp == {"c": pytest.approx(100.0)}

    def test_stump_only_ensemble_warns(self):
        with pytest.warns(RuntimeWarning):
            imp = feature_importance([DecisionTree.leaf(0.3)], ["a"])
        assert imp == {"a": 0.0}


class TestOrderedTargetStatistics:
    def test_prefix_recomputation(self, categorical_data):
        data = categorical_data
        K, prior, seed = 5, 0.5, 9
        enc = ordered_ts_encode(data, "c", seed, K=K, prior=prior)
        edges = bucket_edges(data.target, K)
        buckets = target_buckets(data.target, edges)
        perm = np.random.default_rng(seed).permutation(data.n_rows)
        pos = np.empty_like(perm)
        pos[perm] = np.arange(perm.size)
        cats = data.categorical["c"]
        for row in np.random.default_rng(1).choice(data.n_rows, 40, replace=False):
            earlier = perm[:pos[row]]
            same = earlier[cats[earlier] == cats[row]]
            counts = np.bincount(buckets[same], minlength=K)
            expected = (counts + prior) / (same.size + 1.0)
            assert np.array_equal(enc[row], expected)

    def test_first_row_of_each_class_sees_only_prior(self, categorical_data):
        enc = ordered_ts_encode(categorical_data, "c", 3, K=4, prior=0.5)
        perm = np.random.default_rng(3).permutation(categorical_data.n_rows)
        seen = set()
        for r in perm:
            c = categorical_data.categorical["c"][r]
            if c not in seen:
                assert np.array_equal(enc[r], np.full(4, 0.5))
                seen.add(c)

    def test_target_of_row_does_not_affect_own_encoding(self, categorical_data):
        data = categorical_data
        enc = ordered_ts_encode(data, "c", 0, K=3)
        perm = np.random.default_rng(0).permutation(data.n_rows)
        last = perm[-1]
        y = data.target.copy()
        y[last] = 0.0 if y[last] > 0 else 50.0
        changed = Dataset(numeric=data.numeric, categorical=data.categorical,
                          exposure=data.exposure, target=y)
        enc2 = ordered_ts_encode(changed, "c", 0, K=3, edges=bucket_edges(data.target, 3))
        assert np.array_equal(enc[last], enc2[last])

    def test_buckets(self):
        assert list(target_buckets([0.0, 0.5, 2.0, 9.0], [1.0, 5.0])) == [0, 1, 2, 3]

    def test_encoder_scoring_uses_full_counts(self, categorical_data):
        enc = OrderedTsEncoder(seed=2, n_buckets=4)
        enc.fit_transform(categorical_data)
        new = Dataset(numeric={}, categorical={"c": np.array(["p", "zzz"])},
                      exposure=np.ones(2))
        out = enc.transform(new)["c"]
        counts = enc.counts["c"][enc.classes["c"].index("p")]
        assert np.allclose(out[0], (counts + 0.5) / (counts.sum() + 1.0))
        assert np.allclose(out[1], 0.5)
        again = OrderedTsEncoder.from_dict(enc.to_dict())
        assert np.array_equal(again.transform(new)["c"], out)

    def test_feature_builder_names(self, categorical_data):
        fb = FeatureBuilder(["x"], ["c"], OrderedTsEncoder(n_buckets=3))
        X = fb.fit_transform(categorical_data)
        assert X.shape == (categorical_data.n_rows, 4)
        assert fb.feature_names == ["x", "c[ts0]", "c[ts1]", "c[ts2]"]
        assert fb.source_columns == ["x", "c", "c", "c"]


class TestContainers:
    def test_dataset_validation(self):
        with pytest.raises(ValueError, match="exposure"):
            Dataset(numeric={}, categorical={}, exposure=np.array([1.0, 0.0]))
        with pytest.raises(ValueError, match="non-finite"):
            Dataset(numeric={"a": np.array([np.nan])}, categorical={}, exposure=np.ones(1))
        with pytest.raises(ValueError, match="target"):
            Dataset(numeric={}, categorical={}, exposure=np.ones(1), target=np.array([-1.0]))

    def test_subset(self):
        d = Dataset(numeric={"a": np.arange(4.0)}, categorical={"b": np.array(list("wxyz"))},
                    exposure=np.ones(4), target=np.arange(4.0))
        s = d.subset([3, 1])
        assert list(s.numeric["a"]) == [3.0, 1.0]
        assert list(s.categorical["b"]) == ["z", "x"]

    @pytest.mark.parametrize("kwargs", [dict(n_trees=0), dict(learning_rate=0.0),
                                        dict(l2_lambda=-1.0), dict(max_depth=0),
                                        dict(init_score="median")])
    def test_config_validation(self, kwargs):
        with pytest.raises(ValueError):
            BoostConfig(**kwargs)
