import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone
from sklearn.metrics import f1_score

from traindist import (
    Dataset,
    SizedBoostedClassifier,
    SizedLinearClassifier,
    SizedTreeClassifier,
    delta_f1,
    evaluate_macro_f1,
    floored_delta_f1,
    macro_f1,
    make_grid_blobs,
    make_xor,
)


class TestMacroF1:
    def test_perfect_prediction(self):
        y = np.array([0, 1, 2, 1, 0])
        assert macro_f1(y, y) == 1.0

    def test_hand_computed_case(self):
        # class 0: tp=1 fp=1 fn=1 -> f1 = 0.5; class 1 symmetric
        y_true = np.array([0, 0, 1, 1])
        y_pred = np.array([0, 1, 0, 1])
        assert macro_f1(y_true, y_pred) == pytest.approx(0.5)

    def test_absent_class_scores_zero(self):
        y_true = np.array([0, 0, 1, 1])
        y_pred = np.array([0, 0, 1, 1])
        assert macro_f1(y_true, y_pred, n_classes=3) == pytest.approx(2 / 3)

    def test_matches_reference_implementation(self):
        rng = np.random.default_rng(0)
        for _ in range(60):
            k = int(rng.integers(2, 6))
            n = int(rng.integers(2, 80))
            y_true = rng.integers(0, k, n)
            y_pred = rng.integers(0, k, n)
            want = f1_score(y_true, y_pred, average="macro", labels=np.arange(k), zero_division=0)
            assert macro_f1(y_true, y_pred, n_classes=k) == pytest.approx(want, abs=1e-12)

    def test_rejects_shape_mismatch(self):
        with pytest.raises(ValueError):
            macro_f1(np.array([0, 1]), np.array([0]))
        with pytest.raises(ValueError):
            macro_f1(np.array([]), np.array([]))

    def test_rejects_labels_outside_class_set(self):
        with pytest.raises(ValueError):
            macro_f1(np.array([0, 3]), np.array([0, 1]), n_classes=2)

    @given(st.integers(0, 100_000))
    @settings(max_examples=50, deadline=None)
    def test_reference_agreement_property(self, seed):
        rng = np.random.default_rng(seed)
        k = int(rng.integers(2, 5))
        y_true = rng.integers(0, k, 30)
        y_pred = rng.integers(0, k, 30)
        want = f1_score(y_true, y_pred, average="macro", labels=np.arange(k), zero_division=0)
        assert macro_f1(y_true, y_pred, n_classes=k) == pytest.approx(want, abs=1e-12)


class TestDeltaF1:
    def test_relative_percent(self):
        assert delta_f1(0.66, 0.60) == pytest.approx(10.0)
        assert delta_f1(0.54, 0.60) == pytest.approx(-10.0)

    def test_floored_variant(self):
        assert floored_delta_f1(0.54, 0.60) == 0.0
        assert floored_delta_f1(0.66, 0.60) == pytest.approx(10.0)

    def test_zero_baseline_rejected(self):
        with pytest.raises(ValueError):
            delta_f1(0.5, 0.0)


class TestSizedTreeClassifier:
    def test_depth_cap_is_respected(self):
        ds = make_xor(400, rng=0)
        model = SizedTreeClassifier(max_depth=2).fit(ds.features, ds.labels)
        assert model.realized_depth_ <= 2

    def test_realized_depth_can_fall_short(self):
        # linearly separable in one split: deeper caps change nothing
        rng = np.random.default_rng(1)
        X = rng.random((100, 2))
        y = (X[:, 0] > 0.5).astype(np.int64)
        model = SizedTreeClassifier(max_depth=8).fit(X, y)
        assert model.realized_depth_ == 1

    def test_depth_buys_accuracy_on_interactions(self):
        # no single split helps on xor; a few extra levels carve it out
        ds = make_xor(600, rng=2)
        shallow = SizedTreeClassifier(max_depth=1).fit(ds.features, ds.labels)
        deep = SizedTreeClassifier(max_depth=4).fit(ds.features, ds.labels)
        assert evaluate_macro_f1(deep, ds) > evaluate_macro_f1(shallow, ds) + 0.2

    def test_classes_preserved_through_prediction(self):
        ds = make_grid_blobs(300, rng=3)
        model = SizedTreeClassifier(max_depth=6).fit(ds.features, ds.labels)
        assert set(model.predict(ds.features)) <= set(model.classes_)

    def test_sklearn_clone_compatible(self):
        model = SizedTreeClassifier(max_depth=3, min_leaf=2)
        assert clone(model).get_params() == model.get_params()

    def test_rejects_bad_depth(self):
        ds = make_xor(50, rng=4)
        with pytest.raises(ValueError):
            SizedTreeClassifier(max_depth=0).fit(ds.features, ds.labels)


class TestSizedLinearClassifier:
    def test_selects_the_informative_feature(self):
        rng = np.random.default_rng(5)
        X = rng.random((300, 4))
        y = (X[:, 2] > 0.5).astype(np.int64)
        model = SizedLinearClassifier(n_terms=1).fit(X, y)
        assert all(active == (2,) for active in model.active_sets_)

    def test_term_count_bounds_selection(self):
        rng = np.random.default_rng(6)
        X = rng.random((200, 5))
        y = ((X[:, 0] + X[:, 1] + X[:, 2]) > 1.5).astype(np.int64)
        model = SizedLinearClassifier(n_terms=2).fit(X, y)
        assert all(len(active) == 2 for active in model.active_sets_)
        assert np.count_nonzero(model.coef_[0]) <= 2

    def test_more_terms_than_features_rejected(self):
        X = np.random.default_rng(7).random((50, 3))
        y = (X[:, 0] > 0.5).astype(np.int64)
        with pytest.raises(ValueError, match="exceeds"):
            SizedLinearClassifier(n_terms=4).fit(X, y)

    def test_multiclass_one_vs_rest(self):
        ds = make_grid_blobs(600, rng=8)
        model = SizedLinearClassifier(n_terms=2).fit(ds.features, ds.labels)
        assert model.coef_.shape == (ds.class_count, ds.dim)
        assert evaluate_macro_f1(model, ds) > 0.5

    def test_solution_matches_least_squares_on_active_set(self):
        rng = np.random.default_rng(9)
        X = rng.random((400, 3))
        y = (X @ np.array([1.0, -2.0, 0.5]) + 0.1 > 0).astype(np.int64)
        model = SizedLinearClassifier(n_terms=3).fit(X, y)
        target = (y == 1).astype(np.float64)
        design = np.column_stack([np.ones(len(X)), X[:, list(model.active_sets_[1])]])
        want, *_ = np.linalg.lstsq(design, target, rcond=None)
        got = np.concatenate([[model.intercept_[1]], model.coef_[1, list(model.active_sets_[1])]])
        assert np.allclose(got, want, atol=1e-5)

    def test_original_labels_restored(self):
        X = np.random.default_rng(10).random((80, 2))
        y = np.where(X[:, 0] > 0.5, 7, 3)
        model = SizedLinearClassifier(n_terms=1).fit(X, y)
        assert set(model.predict(X)) <= {3, 7}


class TestSizedBoostedClassifier:
    def test_training_log_loss_decreases_with_rounds(self):
        ds = make_xor(500, rng=11)
        losses = []
        for rounds in (1, 5, 20):
            model = SizedBoostedClassifier(n_rounds=rounds).fit(ds.features, ds.labels)
            losses.append(model.training_log_loss(ds.features, ds.labels))
        assert losses[0] > losses[1] > losses[2]

    def test_more_rounds_improve_fit(self):
        # stumps are additive per-axis: one round cannot tell grid cells apart
        ds = make_grid_blobs(400, rng=12)
        weak = SizedBoostedClassifier(n_rounds=1, base_max_depth=1).fit(ds.features, ds.labels)
        strong = SizedBoostedClassifier(n_rounds=60, base_max_depth=1).fit(ds.features, ds.labels)
        assert evaluate_macro_f1(strong, ds) > evaluate_macro_f1(weak, ds)

    def test_decision_function_shape(self):
        ds = make_grid_blobs(200, rng=13)
        model = SizedBoostedClassifier(n_rounds=3).fit(ds.features, ds.labels)
        scores = model.decision_function(ds.features)
        assert scores.shape == (200, ds.class_count)

    def test_initial_scores_are_log_priors(self):
        # zero rounds of boosting would predict the majority class everywhere;
        # one weak round must not lose to the prior on its own training data
        rng = np.random.default_rng(14)
        X = rng.random((300, 2))
        y = (rng.random(300) < 0.2).astype(np.int64)
        model = SizedBoostedClassifier(n_rounds=1, learning_rate=0.0).fit(X, y)
        assert np.all(model.predict(X) == 0)

    def test_single_class_training_set(self):
        X = np.random.default_rng(15).random((40, 2))
        y = np.full(40, 3, dtype=np.int64)
        model = SizedBoostedClassifier(n_rounds=2).fit(X, y)
        assert np.all(model.predict(X) == 3)

    def test_rejects_bad_rounds(self):
        ds = make_xor(50, rng=16)
        with pytest.raises(ValueError):
            SizedBoostedClassifier(n_rounds=0).fit(ds.features, ds.labels)

    def test_sklearn_clone_compatible(self):
        model = SizedBoostedClassifier(n_rounds=4, base_max_depth=3, learning_rate=0.2)
        assert clone(model).get_params() == model.get_params()


class TestEvaluate:
    def test_evaluate_uses_dataset_class_count(self):
        # a subset missing one class must still score over the full class set
        ds = make_grid_blobs(300, rng=17)
        model = SizedTreeClassifier(max_depth=8).fit(ds.features, ds.labels)
        first = ds.subset(np.nonzero(ds.labels == 0)[0])
        score = evaluate_macro_f1(model, first)
        assert 0 < score <= 1.0 / ds.class_count + 1e-9
