import numpy as np
import pytest

from traindist import (
    Dataset,
    FullIbmmParams,
    SizedTreeClassifier,
    full_search_space,
    ibmm_resample,
    make_concentric,
    naive_search,
    scale_splits,
    stratified_split,
)


@pytest.fixture(scope="module")
def ring_splits():
    ds = make_concentric(600, radii=(0.2, 0.4), rng=3)
    splits = stratified_split(ds, rng=4)
    splits, _ = scale_splits(splits)
    return splits


class TestFullIbmmParams:
    def test_from_flat_orders_dimensions(self):
        flat = {"alpha": 2.0}
        for j in range(3):
            flat.update({f"a_{j}": j + 1.0, f"b_{j}": j + 1.5,
                         f"a_prime_{j}": j + 2.0, f"b_prime_{j}": j + 2.5})
        p = FullIbmmParams.from_flat(flat, 3)
        assert p.dim == 3
        assert p.shape_priors[1] == (2.0, 2.5, 3.0, 3.5)

    def test_validation(self):
        with pytest.raises(ValueError):
            FullIbmmParams(alpha=0.0, shape_priors=((1, 1, 1, 1),))
        with pytest.raises(ValueError):
            FullIbmmParams(alpha=1.0, shape_priors=())
        with pytest.raises(ValueError):
            FullIbmmParams(alpha=1.0, shape_priors=((1, 1, 1),))
        with pytest.raises(ValueError):
            FullIbmmParams(alpha=1.0, shape_priors=((1, 1, 1, -2),))


class TestFullSearchSpace:
    def test_variable_count_grows_linearly(self):
        assert len(full_search_space(1).names) == 5
        assert len(full_search_space(4).names) == 17

    def test_names_cover_each_dimension(self):
        names = full_search_space(2).names
        assert "alpha" in names
        assert "a_prime_1" in names and "b_0" in names

    def test_rejects_zero_dim(self):
        with pytest.raises(ValueError):
            full_search_space(0)


class TestIbmmResample:
    def params(self, dim):
        return FullIbmmParams(2.0, tuple((1.0, 1.0, 1.0, 1.0) for _ in range(dim)))

    def test_rows_come_from_the_training_set(self, ring_splits):
        train = ring_splits.train
        out = ibmm_resample(train, self.params(train.dim), 150, rng=0)
        assert out.n_samples == 150
        pool = {tuple(r) for r in train.features}
        assert all(tuple(r) in pool for r in out.features)

    def test_labels_travel_with_their_rows(self):
        X = np.linspace(0.05, 0.95, 20).reshape(-1, 1)
        ds = Dataset(X, (X[:, 0] > 0.5).astype(np.int64), class_count=2)
        out = ibmm_resample(ds, self.params(1), 80, rng=1)
        assert np.array_equal(out.labels, (out.features[:, 0] > 0.5).astype(np.int64))

    def test_skewed_shapes_reweight_the_draw(self):
        # priors concentrated near 0 should overdraw low-coordinate rows
        X = np.linspace(0.05, 0.95, 40).reshape(-1, 1)
        y = np.arange(40) % 2
        ds = Dataset(X, y, class_count=2)
        low = FullIbmmParams(0.2, ((1.0, 9.0, 9.0, 1.0),))
        out = ibmm_resample(ds, low, 400, rng=2)
        assert out.features[:, 0].mean() < 0.35

    def test_deterministic(self, ring_splits):
        train = ring_splits.train
        p = self.params(train.dim)
        a = ibmm_resample(train, p, 100, rng=np.random.default_rng(5))
        b = ibmm_resample(train, p, 100, rng=np.random.default_rng(5))
        assert np.array_equal(a.features, b.features)

    def test_dimension_mismatch_rejected(self, ring_splits):
        with pytest.raises(ValueError, match="dimensions"):
            ibmm_resample(ring_splits.train, self.params(5), 50, rng=0)

    def test_size_validated(self, ring_splits):
        train = ring_splits.train
        with pytest.raises(ValueError):
            ibmm_resample(train, self.params(train.dim), 0, rng=0)


class TestNaiveSearch:
    def test_runs_and_records_every_trial(self, ring_splits):
        res = naive_search(SizedTreeClassifier(max_depth=2), ring_splits,
                           budget=8, n_sample=120, seed=0)
        assert len(res.trials) == 8
        assert [t.index for t in res.trials] == list(range(1, 9))
        assert res.best_trial.score == max(t.score for t in res.trials)
        assert 0.0 <= res.test_score <= 1.0

    def test_final_model_replays_the_best_validated_repeat(self, ring_splits):
        res = naive_search(SizedTreeClassifier(max_depth=2), ring_splits,
                           budget=6, n_sample=120, seed=1)
        best = res.best_trial
        chosen = 1 + int(np.argmax(best.repeat_scores))
        rng = np.random.default_rng(np.random.SeedSequence([1, 1, best.index, chosen]))
        sample = ibmm_resample(
            ring_splits.train,
            FullIbmmParams.from_flat(best.params, ring_splits.train.dim),
            120, rng,
        )
        replay = SizedTreeClassifier(max_depth=2).fit(sample.features, sample.labels)
        from traindist import evaluate_macro_f1

        assert res.test_score == evaluate_macro_f1(replay, ring_splits.test)

    def test_deterministic(self, ring_splits):
        a = naive_search(SizedTreeClassifier(max_depth=2), ring_splits,
                         budget=6, n_sample=100, seed=2)
        b = naive_search(SizedTreeClassifier(max_depth=2), ring_splits,
                         budget=6, n_sample=100, seed=2)
        assert [t.score for t in a.trials] == [t.score for t in b.trials]
        assert a.test_score == b.test_score

    def test_wide_data_refused_with_pointer_to_tree_path(self):
        rng = np.random.default_rng(0)
        X = rng.random((60, 6))
        ds = Dataset(X, rng.integers(0, 2, 60), class_count=2)
        splits = stratified_split(ds, rng=1)
        with pytest.raises(ValueError, match="density-tree"):
            naive_search(SizedTreeClassifier(max_depth=2), splits,
                         budget=3, n_sample=50, seed=0)

    def test_dim_limit_overridable(self):
        rng = np.random.default_rng(1)
        X = rng.random((90, 6))
        y = (X[:, 0] > 0.5).astype(np.int64)
        y[:3] = 1 - y[:3]
        ds = Dataset(X, y, class_count=2)
        splits = stratified_split(ds, rng=2)
        res = naive_search(SizedTreeClassifier(max_depth=1), splits,
                           budget=3, n_sample=40, seed=0, dim_limit=6)
        assert len(res.trials) == 3

    def test_budget_validated(self, ring_splits):
        with pytest.raises(ValueError):
            naive_search(SizedTreeClassifier(max_depth=2), ring_splits,
                         budget=0, n_sample=50, seed=0)

    def test_random_strategy_supported(self, ring_splits):
        res = naive_search(SizedTreeClassifier(max_depth=2), ring_splits,
                           budget=5, n_sample=100, seed=3, optimizer="random")
        assert len(res.trials) == 5
