"""CSV ingestion, preprocessing, corruption, synthesis, and batching."""
from __future__ import annotations

import numpy as np
import pytest

from retrolearn.data import (
    BatchPlan,
    LabeledDataset,
    corrupt_labels,
    corruption_indices,
    epoch_batches,
    gaussian_blobs,
    load_csv,
    train_test_split,
    zscore_normalize,
)


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadCsv:
    def test_numeric_columns_and_string_labels(self, tmp_path):
        p = write(tmp_path / "d.csv", "a,b,kind\n1,2.5,cat\n3,4.5,dog\n5,6.5,cat\n")
        ds = load_csv(p, "kind")
        np.testing.assert_array_equal(ds.features, [[1, 2.5], [3, 4.5], [5, 6.5]])
        np.testing.assert_array_equal(ds.labels, [0, 1, 0])
        assert ds.class_names == ("cat", "dog")
        assert ds.num_classes == 2
        np.testing.assert_array_equal(ds.ids, [0, 1, 2])

    def test_categorical_feature_one_hot_first_appearance(self, tmp_path):
        p = write(tmp_path / "d.csv", "sex,len,y\nM,1,a\nF,2,b\nI,3,a\nF,4,b\n")
        ds = load_csv(p, "y")
        # M, F, I in first-appearance order, then the numeric column
        np.testing.assert_array_equal(
            ds.features,
            [[1, 0, 0, 1], [0, 1, 0, 2], [0, 0, 1, 3], [0, 1, 0, 4]],
        )
        assert ds.schema.categories["sex"] == ("M", "F", "I")

    def test_headerless_with_index_label(self, tmp_path):
        p = write(tmp_path / "d.csv", "1,2,x\n3,4,y\n")
        ds = load_csv(p, 2, has_header=False)
        np.testing.assert_array_equal(ds.features, [[1, 2], [3, 4]])
        assert ds.class_names == ("x", "y")

    def test_schema_reuse_encodes_identically(self, tmp_path):
        a = write(tmp_path / "a.csv", "sex,v,y\nM,1,pos\nF,2,neg\n")
        b = write(tmp_path / "b.csv", "sex,v,y\nF,9,neg\nM,8,pos\n")
        train = load_csv(a, "y")
        test = load_csv(b, "y", schema=train.schema)
        # F maps to the second one-hot slot in both files
        np.testing.assert_array_equal(test.features[0][:2], [0, 1])
        assert test.class_names == train.class_names
        np.testing.assert_array_equal(test.labels, [1, 0])

    def test_schema_rejects_unseen_category_and_label(self, tmp_path):
        a = write(tmp_path / "a.csv", "sex,v,y\nM,1,pos\nF,2,neg\n")
        train = load_csv(a, "y")
        bad_cat = write(tmp_path / "c.csv", "sex,v,y\nX,1,pos\n")
        with pytest.raises(ValueError, match="row 1.*'X'"):
            load_csv(bad_cat, "y", schema=train.schema)
        bad_label = write(tmp_path / "d.csv", "sex,v,y\nM,1,zzz\n")
        with pytest.raises(ValueError, match="row 1.*'zzz'"):
            load_csv(bad_label, "y", schema=train.schema)

    def test_errors_name_the_spot(self, tmp_path):
        ragged = write(tmp_path / "r.csv", "a,b,y\n1,2,x\n1,2\n")
        with pytest.raises(ValueError, match="row 2"):
            load_csv(ragged, "y")
        missing = write(tmp_path / "m.csv", "a,b,y\n1,2,x\n")
        with pytest.raises(ValueError, match="'nope'"):
            load_csv(missing, "nope")
        empty = write(tmp_path / "e.csv", "a,b,y\n")
        with pytest.raises(ValueError, match="no data rows"):
            load_csv(empty, "y")

    def test_mixed_numeric_column_goes_categorical(self, tmp_path):
        """One non-numeric cell flips the whole column to one-hot."""
        p = write(tmp_path / "d.csv", "v,y\n1,a\nlow,b\n")
        ds = load_csv(p, "y")
        assert ds.schema.categories["v"] == ("1", "low")
        assert ds.dim == 2


class TestLabeledDataset:
    def test_validation(self):
        with pytest.raises(ValueError):
            LabeledDataset(np.zeros((2, 2)), np.array([0, 2]), num_classes=2)
        with pytest.raises(ValueError):
            LabeledDataset(np.array([[np.nan, 0.0]]), np.array([0]), num_classes=2)
        with pytest.raises(ValueError):
            LabeledDataset(np.zeros((2, 2)), np.array([0, 1]), num_classes=2,
                           ids=np.array([3, 3]))

    def test_default_ids_are_dense(self):
        ds = LabeledDataset(np.zeros((3, 1)), np.array([0, 1, 0]), num_classes=2)
        np.testing.assert_array_equal(ds.ids, [0, 1, 2])
        assert ds.n == 3 and ds.dim == 1


class TestZscore:
    def test_standardizes_train_and_reuses_stats(self):
        rng = np.random.default_rng(0)
        tr = LabeledDataset(rng.normal(5, 3, size=(50, 4)), rng.integers(0, 2, 50), 2)
        te = LabeledDataset(rng.normal(5, 3, size=(20, 4)), rng.integers(0, 2, 20), 2)
        tr2, stats = zscore_normalize(tr)
        np.testing.assert_allclose(tr2.features.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(tr2.features.std(axis=0), 1.0, atol=1e-12)
        te2, _ = zscore_normalize(te, stats)
        np.testing.assert_allclose(te2.features, (te.features - stats.mean) / stats.std)

    def test_constant_column_maps_to_zero(self):
        feats = np.array([[1.0, 7.0], [2.0, 7.0], [3.0, 7.0]])
        ds = LabeledDataset(feats, np.array([0, 1, 0]), 2)
        out, _ = zscore_normalize(ds)
        np.testing.assert_array_equal(out.features[:, 1], 0.0)


class TestCorruption:
    def test_exact_count_and_provenance_match(self):
        ds = gaussian_blobs(4, 5, 50, 3.0, seed=9)
        out = corrupt_labels(ds, 0.3, seed=77)
        idx = corruption_indices(ds.n, 0.3, seed=77)
        assert idx.size == int(round(0.3 * ds.n))
        changed = np.flatnonzero(out.labels != ds.labels)
        # replacements may coincide with the original label, so changed
        # rows are a subset of the selected rows
        assert set(changed).issubset(set(idx))
        untouched = np.setdiff1d(np.arange(ds.n), idx)
        np.testing.assert_array_equal(out.labels[untouched], ds.labels[untouched])

    def test_features_and_ids_untouched(self):
        ds = gaussian_blobs(3, 4, 30, 3.0, seed=1)
        out = corrupt_labels(ds, 0.5, seed=2)
        np.testing.assert_array_equal(out.features, ds.features)
        np.testing.assert_array_equal(out.ids, ds.ids)

    def test_rate_edges(self):
        ds = gaussian_blobs(3, 4, 10, 3.0, seed=1)
        same = corrupt_labels(ds, 0.0, seed=5)
        np.testing.assert_array_equal(same.labels, ds.labels)
        full = corruption_indices(ds.n, 1.0, seed=5)
        assert full.size == ds.n
        with pytest.raises(ValueError):
            corrupt_labels(ds, 1.5, seed=5)

    def test_seeded_reproducibility(self):
        ds = gaussian_blobs(3, 4, 40, 3.0, seed=3)
        a = corrupt_labels(ds, 0.4, seed=11)
        b = corrupt_labels(ds, 0.4, seed=11)
        c = corrupt_labels(ds, 0.4, seed=12)
        np.testing.assert_array_equal(a.labels, b.labels)
        assert np.any(a.labels != c.labels)


class TestGaussianBlobs:
    def test_geometry_and_counts(self):
        ds = gaussian_blobs(4, 6, 25, separation=5.0, seed=0)
        assert ds.n == 100 and ds.dim == 6 and ds.num_classes == 4
        np.testing.assert_array_equal(np.bincount(ds.labels), [25, 25, 25, 25])
        # class means are separation apart, pairwise, up to sampling noise
        means = np.stack([ds.features[ds.labels == c].mean(axis=0) for c in range(4)])
        for a in range(4):
            for b in range(a + 1, 4):
                d = np.linalg.norm(means[a] - means[b])
                assert abs(d - 5.0) < 0.8

    def test_rows_are_shuffled(self):
        ds = gaussian_blobs(3, 3, 30, 3.0, seed=0)
        assert np.any(ds.labels[:30] != np.repeat([0, 1, 2], 10)[:30])

    def test_dim_must_cover_classes(self):
        with pytest.raises(ValueError):
            gaussian_blobs(5, 3, 10, 3.0, seed=0)


class TestSplit:
    def test_sizes_and_freshness(self):
        ds = gaussian_blobs(3, 4, 50, 3.0, seed=0)
        tr, te = train_test_split(ds, 0.2, seed=4)
        assert te.n == 30 and tr.n == 120
        np.testing.assert_array_equal(tr.ids, np.arange(120))
        np.testing.assert_array_equal(te.ids, np.arange(30))

    def test_partition_is_exact(self):
        ds = gaussian_blobs(2, 2, 20, 3.0, seed=0)
        tr, te = train_test_split(ds, 0.25, seed=1)
        both = np.vstack([tr.features, te.features])
        assert both.shape[0] == ds.n
        # every original row appears exactly once across the two splits
        orig = {tuple(row) for row in ds.features}
        assert {tuple(row) for row in both} == orig

    def test_seed_controls_split(self):
        ds = gaussian_blobs(2, 2, 20, 3.0, seed=0)
        a1, _ = train_test_split(ds, 0.2, seed=1)
        a2, _ = train_test_split(ds, 0.2, seed=1)
        b1, _ = train_test_split(ds, 0.2, seed=2)
        np.testing.assert_array_equal(a1.features, a2.features)
        assert np.any(a1.features != b1.features)

    def test_degenerate_fractions_rejected(self):
        ds = gaussian_blobs(2, 2, 3, 3.0, seed=0)
        with pytest.raises(ValueError):
            train_test_split(ds, 0.0, seed=0)
        with pytest.raises(ValueError):
            train_test_split(ds, 0.01, seed=0)  # rounds to an empty test side


class TestBatches:
    def test_every_id_exactly_once(self):
        plan = BatchPlan(num_samples=23, batch_size=5, seed=0)
        batches = epoch_batches(plan, 1)
        assert [len(b) for b in batches] == [5, 5, 5, 5, 3]
        np.testing.assert_array_equal(np.sort(np.concatenate(batches)), np.arange(23))

    def test_epochs_reproducible_and_random_access(self):
        """Epoch 7's batches must not depend on having drawn epochs 1-6."""
        plan = BatchPlan(num_samples=40, batch_size=8, seed=3)
        direct = epoch_batches(plan, 7)
        for e in range(1, 7):
            epoch_batches(plan, e)
        replay = epoch_batches(plan, 7)
        for a, b in zip(direct, replay):
            np.testing.assert_array_equal(a, b)

    def test_different_epochs_differ(self):
        plan = BatchPlan(num_samples=40, batch_size=40, seed=3)
        assert np.any(epoch_batches(plan, 1)[0] != epoch_batches(plan, 2)[0])

    def test_validation(self):
        with pytest.raises(ValueError):
            BatchPlan(num_samples=0, batch_size=4, seed=0)
        plan = BatchPlan(num_samples=4, batch_size=4, seed=0)
        with pytest.raises(ValueError):
            epoch_batches(plan, 0)
