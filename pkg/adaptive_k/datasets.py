"""
数据集模块 - 生成桌面规模的合成分类数据并注入标签噪声
"""

import logging
import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .errors import DatasetError

logger = logging.getLogger(__name__)


class NoiseMode(str, Enum):
    # y -> (y + 1) mod C
    DIRECTED = "directed"
    # 在其余 C-1 个类别中均匀选择
    SYMMETRIC = "symmetric"


@dataclass(frozen=True)
class NoisyDataset:
    """
    带标签噪声的数据集

    observed_labels 是训练时可见的标签；true_labels 与 noise_flags 只供 Oracle 和评估使用。
    """
    features: np.ndarray
    observed_labels: np.ndarray
    true_labels: np.ndarray
    noise_flags: np.ndarray
    n_classes: int

    @property
    def n_samples(self):
        return int(self.features.shape[0])

    @property
    def noise_ratio(self):
        return float(np.mean(self.noise_flags)) if self.n_samples else 0.0


def cluster_centers(n_features, n_classes, class_separation):
    """
    类中心：前两维上的正多边形顶点（一维时沿直线等距排列），
    相邻中心的距离恰为 class_separation，其余两两距离不小于它
    """
    centers = np.zeros((n_classes, n_features), dtype=np.float64)
    if n_features == 1:
        centers[:, 0] = class_separation * np.arange(n_classes)
        return centers
    if n_classes == 2:
        radius = class_separation / 2.0
    else:
        radius = class_separation / (2.0 * math.sin(math.pi / n_classes))
    angles = 2.0 * math.pi * np.arange(n_classes) / n_classes
    centers[:, 0] = radius * np.cos(angles)
    centers[:, 1] = radius * np.sin(angles)
    return centers


def make_blobs(n_samples, n_features, n_classes, class_separation, seed, cluster_std=1.0):
    """
    生成各向同性高斯簇数据集（每类一个簇，无噪声）

    参数:
        n_samples: 样本数
        n_features: 特征维度
        n_classes: 类别数（>= 2）
        class_separation: 类中心最小间距
        seed: 随机种子，相同种子生成逐位相同的数据
        cluster_std: 簇内标准差

    返回:
        NoisyDataset，noise_flags 全为 False
    """
    if n_samples < 1 or n_features < 1:
        raise DatasetError(f"invalid sizes: n_samples={n_samples}, n_features={n_features}")
    if n_classes < 2:
        raise DatasetError(f"n_classes must be >= 2, got {n_classes}")
    if not class_separation > 0.0 or not cluster_std > 0.0:
        raise DatasetError("class_separation and cluster_std must be positive")

    rng = np.random.default_rng(seed)
    centers = cluster_centers(n_features, n_classes, class_separation)

    # 各类样本数尽量均衡
    labels = rng.permutation(np.arange(n_samples) % n_classes)
    features = centers[labels] + rng.normal(0.0, cluster_std, size=(n_samples, n_features))

    return NoisyDataset(
        features=features,
        observed_labels=labels.copy(),
        true_labels=labels,
        noise_flags=np.zeros(n_samples, dtype=bool),
        n_classes=n_classes,
    )


def inject_noise(ds, tau, mode, seed):
    """
    按比例 tau 注入标签噪声

    恰好 round(tau * n) 个样本（由种子均匀抽取）的标签被改写，true_labels 保持不变。
    """
    if not 0.0 <= tau <= 1.0:
        raise DatasetError(f"tau must be in [0, 1], got {tau}")
    if np.any(ds.noise_flags):
        raise DatasetError("dataset already contains label noise")
    mode = NoiseMode(mode)

    n = ds.n_samples
    n_noisy = int(round(tau * n))
    rng = np.random.default_rng(seed)
    chosen = rng.choice(n, size=n_noisy, replace=False)

    observed = ds.true_labels.copy()
    if mode is NoiseMode.DIRECTED:
        observed[chosen] = (ds.true_labels[chosen] + 1) % ds.n_classes
    else:
        # 偏移量 1..C-1，保证新标签与原标签不同
        offsets = rng.integers(1, ds.n_classes, size=n_noisy)
        observed[chosen] = (ds.true_labels[chosen] + offsets) % ds.n_classes

    noise_flags = observed != ds.true_labels
    logger.debug(f"注入 {mode.value} 噪声: {int(noise_flags.sum())}/{n} 个样本")
    return replace(ds, observed_labels=observed, noise_flags=noise_flags)


def subset(ds, indices):
    """按下标取子集（mini-batch）"""
    return NoisyDataset(
        features=ds.features[indices],
        observed_labels=ds.observed_labels[indices],
        true_labels=ds.true_labels[indices],
        noise_flags=ds.noise_flags[indices],
        n_classes=ds.n_classes,
    )
