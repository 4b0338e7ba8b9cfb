"""Synthetic blobs, IDX/CSV ingestion, imbalance profiles, and splits."""

import numpy as np
import pytest

from srlab.data import (
    IdxFormatError,
    LabeledDataset,
    gaussian_blobs,
    load_csv,
    load_idx,
    long_tailed_counts,
    split,
    step_counts,
    subsample_per_class,
    write_idx,
)


class TestGaussianBlobs:
    def test_deterministic_per_seed(self):
        a = gaussian_blobs(3, 50, 5, 4.0, seed=11)
        b = gaussian_blobs(3, 50, 5, 4.0, seed=11)
        np.testing.assert_array_equal(a.features, b.features)
        np.testing.assert_array_equal(a.labels, b.labels)
        c = gaussian_blobs(3, 50, 5, 4.0, seed=12)
        assert (a.features != c.features).any()

    def test_shapes_and_counts(self):
        ds = gaussian_blobs(4, 25, 6, 3.0, seed=0)
        assert len(ds) == 100 and ds.d == 6 and ds.k == 4
        np.testing.assert_array_equal(ds.class_counts(), [25] * 4)

    def test_features_are_z_scored(self):
        ds = gaussian_blobs(4, 200, 5, 6.0, seed=1)
        np.testing.assert_allclose(ds.features.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(ds.features.std(axis=0), 1.0, atol=1e-12)

    def test_zero_separation_removes_class_structure(self):
        # per-class means coincide when all centers collapse to the origin
        ds = gaussian_blobs(4, 500, 4, 0.0, seed=2)
        means = np.array([ds.features[ds.labels == c].mean(axis=0)
                          for c in range(4)])
        assert np.linalg.norm(means, axis=1).max() < 0.2

        separated = gaussian_blobs(4, 500, 4, 6.0, seed=2)
        means_sep = np.array([separated.features[separated.labels == c].mean(axis=0)
                              for c in range(4)])
        assert np.linalg.norm(means_sep, axis=1).min() > 0.5

    def test_invalid_sizes(self):
        with pytest.raises(ValueError, match="invalid sizes"):
            gaussian_blobs(1, 10, 4, 1.0, seed=0)
        with pytest.raises(ValueError, match="invalid sizes"):
            gaussian_blobs(3, 10, 1, 1.0, seed=0)
        with pytest.raises(ValueError, match="separation"):
            gaussian_blobs(3, 10, 4, -1.0, seed=0)


class TestLabeledDatasetValidation:
    def test_label_range_checked(self):
        with pytest.raises(ValueError, match=r"\[0, 2\)"):
            LabeledDataset(np.zeros((3, 2)), [0, 1, 2], k=2)

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="does not match"):
            LabeledDataset(np.zeros((3, 2)), [0, 1], k=2)


class TestIdxRoundTrip:
    def test_round_trip_is_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        images = rng.integers(0, 256, (12, 4, 3), dtype=np.uint8)
        labels = rng.integers(0, 10, 12, dtype=np.uint8)
        ip, lp = tmp_path / "img.idx", tmp_path / "lab.idx"
        write_idx(ip, lp, images, labels)
        ds = load_idx(ip, lp)
        assert ds.d == 12 and len(ds) == 12 and ds.k == 10
        np.testing.assert_array_equal(ds.features,
                                      images.reshape(12, 12) / 255.0)
        np.testing.assert_array_equal(ds.labels, labels)

    def test_bad_image_magic(self, tmp_path):
        ip, lp = tmp_path / "img.idx", tmp_path / "lab.idx"
        write_idx(ip, lp, np.zeros((2, 2, 2), np.uint8), np.zeros(2, np.uint8))
        raw = bytearray(ip.read_bytes())
        raw[3] = 0x99
        ip.write_bytes(bytes(raw))
        with pytest.raises(IdxFormatError, match="bad magic"):
            load_idx(ip, lp)

    def test_truncated_file_names_byte_counts(self, tmp_path):
        ip, lp = tmp_path / "img.idx", tmp_path / "lab.idx"
        write_idx(ip, lp, np.zeros((3, 2, 2), np.uint8), np.zeros(3, np.uint8))
        ip.write_bytes(ip.read_bytes()[:-5])
        with pytest.raises(IdxFormatError, match="expected 12 bytes, got 7"):
            load_idx(ip, lp)

    def test_count_mismatch(self, tmp_path):
        ip, lp = tmp_path / "img.idx", tmp_path / "lab.idx"
        lp2 = tmp_path / "lab2.idx"
        write_idx(ip, lp, np.zeros((3, 2, 2), np.uint8), np.zeros(3, np.uint8))
        write_idx(tmp_path / "img2.idx", lp2, np.zeros((2, 2, 2), np.uint8),
                  np.zeros(2, np.uint8))
        with pytest.raises(IdxFormatError, match="count mismatch"):
            load_idx(ip, lp2)

    def test_label_above_nine_rejected(self, tmp_path):
        ip, lp = tmp_path / "img.idx", tmp_path / "lab.idx"
        write_idx(ip, lp, np.zeros((2, 2, 2), np.uint8),
                  np.array([3, 10], np.uint8))
        with pytest.raises(IdxFormatError, match="exceeds 9"):
            load_idx(ip, lp)


class TestCsvLoader:
    def test_label_then_features(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("1,0.5,-1.25\n0,2.0,3.5\n2,0.0,1.0\n")
        ds = load_csv(path)
        assert ds.k == 3 and ds.d == 2
        np.testing.assert_array_equal(ds.labels, [1, 0, 2])
        np.testing.assert_allclose(ds.features[0], [0.5, -1.25])

    def test_non_integer_label_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("0.5,1.0\n")
        with pytest.raises(ValueError, match="integer labels"):
            load_csv(path)


class TestSubsample:
    def test_full_counts_is_a_permutation(self):
        ds = gaussian_blobs(3, 20, 4, 3.0, seed=5)
        out = subsample_per_class(ds, [20, 20, 20], seed=0)
        assert len(out) == 60
        np.testing.assert_array_equal(
            np.sort(out.features, axis=0), np.sort(ds.features, axis=0))

    def test_exact_counts_per_class(self):
        ds = gaussian_blobs(4, 50, 4, 3.0, seed=5)
        out = subsample_per_class(ds, [10, 20, 30, 5], seed=1)
        np.testing.assert_array_equal(out.class_counts(), [10, 20, 30, 5])

    def test_deterministic_per_seed(self):
        ds = gaussian_blobs(3, 40, 4, 3.0, seed=5)
        a = subsample_per_class(ds, [7, 8, 9], seed=3)
        b = subsample_per_class(ds, [7, 8, 9], seed=3)
        np.testing.assert_array_equal(a.features, b.features)

    def test_exceeding_availability_rejected(self):
        ds = gaussian_blobs(3, 10, 4, 3.0, seed=5)
        with pytest.raises(ValueError, match="requested 11 of 10"):
            subsample_per_class(ds, [11, 5, 5], seed=0)


class TestImbalanceProfiles:
    def test_long_tailed_mu_one_is_uniform(self):
        np.testing.assert_array_equal(long_tailed_counts(500, 1.0, 6), [500] * 6)

    def test_long_tailed_endpoints(self):
        np.testing.assert_array_equal(long_tailed_counts(1000, 0.1, 2),
                                      [1000, 100])

    def test_long_tailed_min_max_ratio(self):
        counts = long_tailed_counts(5000, 0.01, 10)
        assert counts[0] == 5000
        assert abs(counts[-1] / counts[0] - 0.01) < 1e-3

    def test_profiles_monotone_nonincreasing(self):
        for mu in (0.01, 0.1, 0.5, 1.0):
            counts = long_tailed_counts(1000, mu, 10)
            assert np.all(np.diff(counts) <= 0)
            counts = step_counts(1000, mu, 10, 0.3)
            assert np.all(np.diff(counts) <= 0)

    def test_step_mu_one_is_uniform(self):
        np.testing.assert_array_equal(step_counts(400, 1.0, 5, 0.4), [400] * 5)

    def test_step_half_minority(self):
        np.testing.assert_array_equal(
            step_counts(1000, 0.1, 10, 0.5), [1000] * 5 + [100] * 5)

    def test_step_tiny_fraction_ceils_to_one_class(self):
        counts = step_counts(1000, 0.1, 10, 0.01)
        np.testing.assert_array_equal(counts, [1000] * 9 + [100])

    def test_invalid_parameters(self):
        with pytest.raises(ValueError, match="mu"):
            long_tailed_counts(100, 0.0, 5)
        with pytest.raises(ValueError, match="minority_fraction"):
            step_counts(100, 0.5, 5, 1.0)


class TestSplit:
    def test_balanced_halves(self):
        ds = gaussian_blobs(4, 30, 4, 3.0, seed=8)
        train, test = split(ds, 0.5, seed=0)
        np.testing.assert_array_equal(train.class_counts(), [15] * 4)
        np.testing.assert_array_equal(test.class_counts(), [15] * 4)

    def test_union_is_the_input(self):
        ds = gaussian_blobs(3, 21, 4, 3.0, seed=8)
        train, test = split(ds, 0.25, seed=1)
        combined = np.vstack([train.features, test.features])
        np.testing.assert_array_equal(np.sort(combined, axis=0),
                                      np.sort(ds.features, axis=0))
        assert len(train) + len(test) == len(ds)

    def test_disjoint(self):
        ds = gaussian_blobs(3, 20, 4, 3.0, seed=8)
        train, test = split(ds, 0.3, seed=2)
        train_rows = {row.tobytes() for row in train.features}
        test_rows = {row.tobytes() for row in test.features}
        assert not train_rows & test_rows

    def test_deterministic_per_seed(self):
        ds = gaussian_blobs(3, 20, 4, 3.0, seed=8)
        a_train, a_test = split(ds, 0.3, seed=5)
        b_train, b_test = split(ds, 0.3, seed=5)
        np.testing.assert_array_equal(a_train.features, b_train.features)
        np.testing.assert_array_equal(a_test.features, b_test.features)

    def test_tiny_class_rejected(self):
        ds = LabeledDataset(np.zeros((3, 2)), [0, 0, 1], k=2)
        with pytest.raises(ValueError, match="at least 2"):
            split(ds, 0.5, seed=0)

    def test_fraction_out_of_range(self):
        ds = gaussian_blobs(3, 20, 4, 3.0, seed=8)
        with pytest.raises(ValueError, match="test_fraction"):
            split(ds, 1.0, seed=0)
