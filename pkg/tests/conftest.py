import numpy as np
import pytest

from adaptive_k.datasets import inject_noise, make_blobs
from adaptive_k.theory import GaussianMixture


@pytest.fixture
def default_mixture():
    """(mu1, sigma1, mu2, sigma2, tau) = (0, 1, 5, 2, 0.4)"""
    return GaussianMixture(mu1=0.0, sigma1=1.0, mu2=5.0, sigma2=2.0, tau=0.4)


@pytest.fixture
def clean_mixture():
    return GaussianMixture(mu1=0.0, sigma1=1.0, mu2=5.0, sigma2=2.0, tau=0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_noisy_blobs():
    """小规模四分类数据：训练集 tau=0.3 定向噪声，测试集干净"""
    train = make_blobs(400, 2, 4, 4.0, seed=[7, 0])
    train = inject_noise(train, 0.3, "directed", seed=[7, 2])
    test = make_blobs(200, 2, 4, 4.0, seed=[7, 1])
    return train, test
