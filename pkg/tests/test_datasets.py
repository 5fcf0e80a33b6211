import numpy as np
import pytest

from adaptive_k.datasets import NoiseMode, NoisyDataset, cluster_centers, inject_noise, make_blobs, subset
from adaptive_k.errors import DatasetError


class TestMakeBlobs:

    def test_basic_construction(self):
        ds = make_blobs(100, 2, 2, 6.0, seed=1)
        assert ds.features.shape == (100, 2)
        assert ds.n_samples == 100
        assert set(np.unique(ds.true_labels)) == {0, 1}
        assert not ds.noise_flags.any()
        assert np.array_equal(ds.observed_labels, ds.true_labels)
        assert ds.noise_ratio == 0.0

    def test_deterministic(self):
        a = make_blobs(300, 3, 4, 3.0, seed=11)
        b = make_blobs(300, 3, 4, 3.0, seed=11)
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.true_labels, b.true_labels)

    def test_different_seeds_differ(self):
        assert not np.array_equal(make_blobs(50, 2, 2, 3.0, seed=1).features,
                                  make_blobs(50, 2, 2, 3.0, seed=2).features)

    def test_balanced_classes(self):
        ds = make_blobs(1001, 2, 4, 3.0, seed=0)
        counts = np.bincount(ds.true_labels, minlength=4)
        assert counts.max() - counts.min() <= 1

    @pytest.mark.parametrize("n_features,n_classes", [(1, 3), (2, 2), (2, 4), (5, 10)])
    def test_center_separation(self, n_features, n_classes):
        centers = cluster_centers(n_features, n_classes, 3.0)
        distances = np.linalg.norm(centers[:, None, :] - centers[None, :, :], axis=-1)
        off_diagonal = distances[~np.eye(n_classes, dtype=bool)]
        assert off_diagonal.min() == pytest.approx(3.0)

    def test_well_separated_is_linearly_easy(self):
        ds = make_blobs(2000, 2, 4, 10.0, seed=5)
        centers = cluster_centers(2, 4, 10.0)
        nearest = np.argmin(np.linalg.norm(ds.features[:, None, :] - centers[None], axis=-1), axis=1)
        assert np.mean(nearest == ds.true_labels) > 0.99

    @pytest.mark.parametrize("args", [(0, 2, 2, 1.0), (10, 0, 2, 1.0), (10, 2, 1, 1.0), (10, 2, 2, 0.0)])
    def test_invalid(self, args):
        with pytest.raises(DatasetError):
            make_blobs(*args, seed=0)


class TestInjectNoise:

    def test_zero_noise_is_identity(self):
        ds = make_blobs(200, 2, 4, 3.0, seed=0)
        noisy = inject_noise(ds, 0.0, "directed", seed=1)
        assert not noisy.noise_flags.any()
        assert np.array_equal(noisy.observed_labels, ds.true_labels)

    @pytest.mark.parametrize("mode", list(NoiseMode))
    def test_exact_count(self, mode):
        ds = make_blobs(5000, 2, 4, 3.0, seed=0)
        noisy = inject_noise(ds, 0.4, mode, seed=3)
        assert int(noisy.noise_flags.sum()) == 2000
        assert np.array_equal(noisy.noise_flags, noisy.observed_labels != noisy.true_labels)
        assert np.array_equal(noisy.true_labels, ds.true_labels)
        assert noisy.noise_ratio == pytest.approx(0.4)

    def test_directed_is_cyclic(self):
        labels = np.arange(10)
        ds = NoisyDataset(features=np.zeros((10, 1)), observed_labels=labels.copy(), true_labels=labels,
                          noise_flags=np.zeros(10, dtype=bool), n_classes=10)
        noisy = inject_noise(ds, 1.0, NoiseMode.DIRECTED, seed=0)
        assert noisy.observed_labels[9] == 0
        assert np.array_equal(noisy.observed_labels, (labels + 1) % 10)

    def test_symmetric_covers_other_labels(self):
        ds = make_blobs(3000, 2, 4, 3.0, seed=0)
        noisy = inject_noise(ds, 1.0, "symmetric", seed=4)
        offsets = (noisy.observed_labels - noisy.true_labels) % 4
        assert set(np.unique(offsets)) == {1, 2, 3}

    @pytest.mark.parametrize("tau", [-0.1, 1.1])
    def test_invalid_tau(self, tau):
        with pytest.raises(DatasetError):
            inject_noise(make_blobs(10, 2, 2, 1.0, seed=0), tau, "directed", seed=0)

    def test_rejects_already_noisy(self):
        noisy = inject_noise(make_blobs(10, 2, 2, 1.0, seed=0), 0.5, "directed", seed=0)
        with pytest.raises(DatasetError):
            inject_noise(noisy, 0.5, "directed", seed=0)

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            inject_noise(make_blobs(10, 2, 2, 1.0, seed=0), 0.5, "uniform", seed=0)


def test_subset_keeps_alignment():
    ds = inject_noise(make_blobs(20, 2, 2, 3.0, seed=0), 0.5, "directed", seed=0)
    part = subset(ds, np.array([3, 0, 7]))
    assert part.n_samples == 3
    assert np.array_equal(part.features, ds.features[[3, 0, 7]])
    assert np.array_equal(part.noise_flags, ds.noise_flags[[3, 0, 7]])
    assert part.n_classes == 2
