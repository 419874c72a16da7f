import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fadkit import attribution, nncore
from fadkit.errors import ConfigError, DegenerateInputError, ShapeError
from fadkit.pipeline import (FADConfig, TabularDataset,
                             classification_metrics, generate_vital_few,
                             run_fad_analysis, stratified_kfold)


class TestStratifiedKFold:
    def test_balanced_two_class_five_fold(self):
        labels = np.array([0] * 5 + [1] * 5)
        plan = stratified_kfold(labels, k=5, seed=0)
        for fold in range(5):
            test = plan.test_indices(fold)
            assert test.size == 2
            assert sorted(labels[test]) == [0, 1]

    def test_same_seed_same_plan(self):
        labels = np.arange(60) % 3
        a = stratified_kfold(labels, k=5, seed=9)
        b = stratified_kfold(labels, k=5, seed=9)
        assert np.array_equal(a.assignment, b.assignment)

    def test_seventy_thirty_counts(self):
        rng = np.random.default_rng(0)
        labels = rng.permutation(np.array([0] * 70 + [1] * 30))
        plan = stratified_kfold(labels, k=5, seed=1)
        # exhaustive per-fold count check
        for fold in range(5):
            test = labels[plan.test_indices(fold)]
            assert abs(int(np.sum(test == 0)) - 14) <= 1
            assert abs(int(np.sum(test == 1)) - 6) <= 1

    def test_partition_is_exact(self):
        labels = np.arange(53) % 4
        plan = stratified_kfold(labels, k=5, seed=3)
        seen = np.concatenate([plan.test_indices(f) for f in range(5)])
        assert sorted(seen.tolist()) == list(range(53))
        for fold in range(5):
            train = set(plan.train_indices(fold).tolist())
            test = set(plan.test_indices(fold).tolist())
            assert not train & test

    def test_small_class_warns(self):
        labels = np.array([0, 0, 0, 0, 1])
        with pytest.warns(UserWarning, match="smallest class"):
            stratified_kfold(labels, k=3, seed=0)

    def test_k_validation(self):
        with pytest.raises(ConfigError):
            stratified_kfold(np.array([0, 1]), k=1, seed=0)

    def test_zero_instance_class_rejected(self):
        with pytest.raises(ConfigError, match="no instances"):
            stratified_kfold(np.array([0, 0, 2, 2]), k=2, seed=0,
                             class_count=3)


class TestClassificationMetrics:
    def test_all_correct(self):
        m = classification_metrics([0, 1, 2, 1], [0, 1, 2, 1])
        assert all(r.precision == r.recall == r.f1 == 1.0 for r in m.rows)
        assert m.weighted_f1 == 1.0
        assert m.accuracy == 1.0

    def test_constant_predictor_hand_confusion(self):
        # balanced two-class set, every prediction class 0
        m = classification_metrics([0, 0, 0, 0], [0, 0, 1, 1])
        row0 = next(r for r in m.rows if r.label == 0)
        row1 = next(r for r in m.rows if r.label == 1)
        assert row0.recall == 1.0
        assert row0.precision == 0.5
        assert row1.recall == 0.0
        assert row1.zero_predicted

    def test_class_absent_from_labels_has_no_row(self):
        m = classification_metrics([0, 2], [0, 0])
        assert [r.label for r in m.rows] == [0]

    def test_empty_rejected(self):
        with pytest.raises(DegenerateInputError):
            classification_metrics([], [])

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            classification_metrics([0], [0, 1])

    @given(st.integers(0, 2**32 - 1))
    def test_weighted_f1_between_min_and_max(self, seed):
        rng = np.random.default_rng(seed)
        y = rng.integers(3, size=30)
        pred = rng.integers(3, size=30)
        m = classification_metrics(pred, y)
        f1s = [r.f1 for r in m.rows]
        assert min(f1s) - 1e-12 <= m.weighted_f1 <= max(f1s) + 1e-12


class TestGenerateVitalFew:
    def test_informative_count(self):
        planted = generate_vital_few(100, 50, 0.2, 3, seed=0)
        assert planted.informative_indices.size == 10
        assert planted.dataset.n_features == 50

    def test_same_seed_identical(self):
        a = generate_vital_few(80, 20, 0.25, 2, seed=5)
        b = generate_vital_few(80, 20, 0.25, 2, seed=5)
        assert np.array_equal(a.dataset.features, b.dataset.features)
        assert np.array_equal(a.dataset.labels, b.dataset.labels)
        assert np.array_equal(a.informative_indices, b.informative_indices)

    def test_noise_features_carry_no_signal(self):
        # chance-level oracle: a model trained only on the noise columns
        # cannot beat random guessing on held-out data
        planted = generate_vital_few(600, 20, 0.2, 3, seed=1)
        ds = planted.dataset
        noise = np.setdiff1d(np.arange(ds.n_features),
                             planted.informative_indices)
        X = ds.features[:, noise]
        train, test = slice(0, 400), slice(400, 600)
        result = nncore.train(X[train], ds.labels[train],
                              nncore.NetSpec(hidden_dims=(16,)),
                              nncore.TrainConfig(epochs=40, seed=0))
        acc = nncore.accuracy(result.network, X[test], ds.labels[test])
        assert abs(acc - 1.0 / 3.0) <= 0.1

    def test_informative_features_do_carry_signal(self):
        planted = generate_vital_few(600, 20, 0.2, 3, seed=1)
        ds = planted.dataset
        X = ds.features[:, planted.informative_indices]
        train, test = slice(0, 400), slice(400, 600)
        result = nncore.train(X[train], ds.labels[train],
                              nncore.NetSpec(hidden_dims=(16,)),
                              nncore.TrainConfig(epochs=40, seed=0))
        acc = nncore.accuracy(result.network, X[test], ds.labels[test])
        assert acc > 0.6  # far above the 1/3 chance level

    def test_fraction_validation(self):
        with pytest.raises(ConfigError):
            generate_vital_few(10, 10, 0.0, 2, seed=0)
        with pytest.raises(ConfigError):
            generate_vital_few(10, 30, 0.01, 2, seed=0)


def small_analysis_inputs(seed=0, n=90, d=8, classes=2):
    planted = generate_vital_few(n, d, 0.25, classes, seed=seed)
    spec = nncore.NetSpec(hidden_dims=(12,))
    train_cfg = nncore.TrainConfig(epochs=15, seed=seed)
    return planted, spec, train_cfg


class TestRunFadAnalysis:
    def test_report_shape_and_determinism(self):
        planted, spec, train_cfg = small_analysis_inputs()
        config = FADConfig(methods=("ig", "shapley", "random"), k_folds=3,
                           seed=1, shapley_permutations=20,
                           oracle_indices=None)
        a = run_fad_analysis(planted.dataset, spec, train_cfg, config)
        b = run_fad_analysis(planted.dataset, spec, train_cfg, config)
        assert a.report.to_json_dict() == b.report.to_json_dict()
        assert a.report.methods == ("IG", "Shapley-exact", "random")
        for row in a.report.rows:
            assert set(row.n_auc) == set(a.report.methods)
            assert 0.0 < min(row.n_auc.values()) <= 1.0
            assert row.best == min(row.n_auc, key=lambda m: (row.n_auc[m], m))

    def test_jobs_do_not_change_results(self):
        planted, spec, train_cfg = small_analysis_inputs(seed=2)
        base = FADConfig(methods=("ig", "random"), k_folds=3, seed=3)
        serial = run_fad_analysis(planted.dataset, spec, train_cfg, base)
        from dataclasses import replace

        parallel = run_fad_analysis(planted.dataset, spec, train_cfg,
                                    replace(base, jobs=4))
        assert json.dumps(serial.report.to_json_dict(), sort_keys=True) == \
            json.dumps(parallel.report.to_json_dict(), sort_keys=True)
        for ca, cb in zip(serial.pooled_curves, parallel.pooled_curves):
            assert ca.points == cb.points

    def test_oracle_needs_indices(self):
        planted, spec, train_cfg = small_analysis_inputs()
        config = FADConfig(methods=("oracle",), k_folds=2)
        with pytest.raises(ConfigError, match="oracle"):
            run_fad_analysis(planted.dataset, spec, train_cfg, config)

    def test_pooled_instances_cover_dataset(self):
        planted, spec, train_cfg = small_analysis_inputs(seed=4)
        config = FADConfig(methods=("random",), k_folds=3, seed=4)
        result = run_fad_analysis(planted.dataset, spec, train_cfg, config)
        assert sum(r.instances for r in result.report.rows) == \
            planted.dataset.n_instances

    def test_class_without_instances_is_excluded(self):
        planted, spec, train_cfg = small_analysis_inputs(seed=5)
        ds = planted.dataset
        padded = TabularDataset(
            features=ds.features, labels=ds.labels,
            feature_kinds=ds.feature_kinds, feature_names=ds.feature_names,
            class_names=(*ds.class_names, "ghost"))
        config = FADConfig(methods=("random",), k_folds=3, seed=5)
        result = run_fad_analysis(padded, spec, train_cfg, config)
        assert ("ghost", "no test instances in any fold") in \
            result.report.excluded

    def test_per_fold_average_mode_runs(self):
        planted, spec, train_cfg = small_analysis_inputs(seed=6)
        config = FADConfig(methods=("random",), k_folds=3, seed=6,
                           pooling="per-fold-average")
        result = run_fad_analysis(planted.dataset, spec, train_cfg, config)
        assert result.report.rows

    def test_class_global_mode_runs(self):
        planted, spec, train_cfg = small_analysis_inputs(seed=7)
        config = FADConfig(methods=("ig",), k_folds=3, seed=7,
                           ranking_mode="class-global")
        result = run_fad_analysis(planted.dataset, spec, train_cfg, config)
        assert result.report.rows

    def test_curve_percent_grid_starts_at_zero(self):
        planted, spec, train_cfg = small_analysis_inputs(seed=8)
        config = FADConfig(methods=("random",), k_folds=3, seed=8)
        result = run_fad_analysis(planted.dataset, spec, train_cfg, config)
        for curve in result.pooled_curves:
            assert curve.points[0][0] == 0.0
            assert curve.points[-1][0] == 100.0


class TestAttributionSeparatesSignalFromNoise:
    def test_informative_outweighs_noise_over_seeds(self):
        # correctly classified test instances should put more absolute
        # attribution on the planted signal than on the noise features
        hits = {"ig": 0, "shapley": 0}
        seeds = range(20)
        for seed in seeds:
            planted = generate_vital_few(150, 10, 0.2, 2, seed=seed)
            ds = planted.dataset
            split = 100
            result = nncore.train(
                ds.features[:split], ds.labels[:split],
                nncore.NetSpec(hidden_dims=(12,)),
                nncore.TrainConfig(epochs=30, seed=seed))
            net = result.network
            baseline = attribution.make_baseline(ds.features[:split],
                                                 ds.feature_kinds)
            informative = planted.informative_indices
            noise = np.setdiff1d(np.arange(ds.n_features), informative)
            sums = {"ig": [], "shapley": []}
            for i in range(split, ds.n_instances):
                x, label = ds.features[i], int(ds.labels[i])
                if nncore.predict(net, x) != label:
                    continue
                ig = attribution.integrated_gradients(net, x, baseline, label,
                                                      steps=32)
                sh = attribution.shapley_exact(net, x, baseline, label)
                sums["ig"].append((np.abs(ig.scores[informative]).mean(),
                                   np.abs(ig.scores[noise]).mean()))
                sums["shapley"].append((np.abs(sh.scores[informative]).mean(),
                                        np.abs(sh.scores[noise]).mean()))
            for method, pairs in sums.items():
                info_mean = np.mean([p[0] for p in pairs])
                noise_mean = np.mean([p[1] for p in pairs])
                hits[method] += info_mean > noise_mean
        assert hits["ig"] >= 18  # >= 90% of 20 seeds
        assert hits["shapley"] >= 18


class TestDatasetIO:
    def test_csv_round_trip(self, tmp_path):
        planted = generate_vital_few(30, 5, 0.4, 2, seed=0)
        ds = planted.dataset
        path = tmp_path / "data.csv"
        kinds = tmp_path / "data.kinds.json"
        ds.to_csv(path)
        ds.write_kinds(kinds)
        loaded = TabularDataset.from_csv(path, kinds_path=kinds)
        assert np.array_equal(loaded.features, ds.features)
        assert np.array_equal(loaded.labels, ds.labels)
        assert loaded.feature_kinds == ds.feature_kinds
        assert loaded.class_names == ds.class_names

    def test_missing_label_column(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1.0,2.0\n")
        with pytest.raises(ConfigError, match="label"):
            TabularDataset.from_csv(path)

    def test_malformed_row_reports_line_number(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,label\n1.0,x\nnot-a-number,y\n")
        with pytest.raises(ConfigError, match=":3"):
            TabularDataset.from_csv(path)

    def test_binary_kind_inferred(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("a,b,label\n0.0,3.5,x\n1.0,2.5,y\n")
        ds = TabularDataset.from_csv(path)
        assert ds.feature_kinds == ("binary", "continuous")
