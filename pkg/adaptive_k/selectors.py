"""
样本选择模块 - 给定一个mini-batch的逐样本损失，决定哪些样本参与梯度更新

包含四种选择策略：
- Vanilla: 使用全部样本（标准SGD）
- Oracle: 已知噪声标记，只保留干净样本
- MKL: 保留损失最小的 k 个样本
- AdaptiveK: 以滑动平均估计的平均损失为阈值，保留阈值以下的样本
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .errors import SelectionError


class SelectorKind(str, Enum):
    VANILLA = "vanilla"
    ORACLE = "oracle"
    MKL = "mkl"
    ADAPTIVE = "adaptive"


class ThresholdVariant(str, Enum):
    # m / (sqrt(v) + eps)
    NORMALIZED = "normalized"
    # m / (1 - beta1^step)，偏差修正后的平均损失
    BIAS_CORRECTED = "bias_corrected"


@dataclass(frozen=True)
class SelectorConfig:
    """选择器配置"""
    kind: SelectorKind = SelectorKind.ADAPTIVE
    k: Optional[int] = None
    k_fraction: Optional[float] = None
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    threshold_variant: ThresholdVariant = ThresholdVariant.NORMALIZED
    # 理论模拟中的"损失"来自实数轴上的正态分布，可以为负
    allow_negative_losses: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", SelectorKind(self.kind))
        object.__setattr__(self, "threshold_variant", ThresholdVariant(self.threshold_variant))
        self.validate()

    def validate(self):
        if not 0.0 < self.beta1 <= 1.0:
            raise SelectionError(f"beta1 must be in (0, 1], got {self.beta1}")
        if not 0.0 < self.beta2 <= 1.0:
            raise SelectionError(f"beta2 must be in (0, 1], got {self.beta2}")
        if not self.epsilon > 0.0:
            raise SelectionError(f"epsilon must be positive, got {self.epsilon}")
        if self.kind is SelectorKind.MKL:
            if self.k is None and self.k_fraction is None:
                raise SelectionError("invalid k")
            if self.k is not None and self.k <= 0:
                raise SelectionError("invalid k")
            if self.k is None and not 0.0 < self.k_fraction <= 1.0:
                raise SelectionError("invalid k")

    def resolve_k(self, batch_size):
        """MKL 的实际保留数；k 优先于 k_fraction"""
        if self.k is not None:
            return self.k
        return max(1, int(round(self.k_fraction * batch_size)))


@dataclass(frozen=True)
class ThresholdState:
    """AdaptiveK 的滑动平均状态"""
    m: float = 0.0
    v: float = 0.0
    step: int = 0

    def to_dict(self):
        return {"m": self.m, "v": self.v, "step": self.step}

    @classmethod
    def from_dict(cls, data):
        return cls(m=float(data["m"]), v=float(data["v"]), step=int(data["step"]))


@dataclass(frozen=True)
class BatchSelection:
    """单个mini-batch的选择结果"""
    selected: np.ndarray
    threshold: Optional[float] = None

    @property
    def n_selected(self):
        return int(np.count_nonzero(self.selected))

    @property
    def batch_size(self):
        return int(self.selected.shape[0])


def _check_losses(losses):
    losses = np.asarray(losses, dtype=np.float64)
    if losses.ndim != 1 or losses.shape[0] == 0:
        raise SelectionError("empty mini-batch")
    if not np.all(np.isfinite(losses)):
        raise SelectionError("non-finite loss")
    return losses


def select_vanilla(losses):
    """全部样本参与更新"""
    losses = _check_losses(losses)
    return BatchSelection(selected=np.ones(losses.shape[0], dtype=bool))


def select_mkl(losses, k):
    """
    保留损失最小的 k 个样本（Min-k Loss）

    参数:
        losses: 逐样本损失
        k: 保留数量，超过批次大小时全部保留

    返回:
        BatchSelection，损失相同时下标小的样本优先
    """
    if k is None or k <= 0:
        raise SelectionError("invalid k")
    losses = _check_losses(losses)
    order = np.argsort(losses, kind="stable")
    selected = np.zeros(losses.shape[0], dtype=bool)
    selected[order[:k]] = True
    return BatchSelection(selected=selected)


def select_oracle(noise_flags):
    """已知噪声标记时的理想选择：只保留干净样本，可能一个都不选"""
    flags = np.asarray(noise_flags, dtype=bool)
    if flags.ndim != 1 or flags.shape[0] == 0:
        raise SelectionError("empty mini-batch")
    return BatchSelection(selected=~flags)


def update_threshold(state, batch_mean_loss, config):
    """
    用当前批次的平均损失更新滑动平均，并给出本批次的阈值

    参数:
        state: 更新前的 ThresholdState
        batch_mean_loss: 当前批次平均损失 μ_b
        config: SelectorConfig（beta1/beta2/epsilon/threshold_variant）

    返回:
        (新的 ThresholdState, 阈值)
    """
    mu_b = float(batch_mean_loss)
    if not math.isfinite(mu_b):
        raise SelectionError("non-finite loss")
    if mu_b < 0.0 and not config.allow_negative_losses:
        raise SelectionError("negative mean loss")

    step = state.step + 1
    m = config.beta1 * state.m + (1.0 - config.beta1) * mu_b
    v = config.beta2 * state.v + (1.0 - config.beta2) * mu_b * mu_b

    if config.threshold_variant is ThresholdVariant.NORMALIZED:
        threshold = m / (math.sqrt(v) + config.epsilon)
    else:
        correction = 1.0 - config.beta1 ** step
        # beta1 == 1 时 m 恒为 0，修正项也为 0
        threshold = m / correction if correction > 0.0 else m

    return ThresholdState(m=m, v=v, step=step), threshold


def select_adaptive(losses, state, config):
    """
    Adaptive-k 选择：先更新阈值，再保留损失不超过阈值的样本

    返回:
        (BatchSelection, 新的 ThresholdState)
    """
    losses = _check_losses(losses)
    new_state, threshold = update_threshold(state, float(np.mean(losses)), config)
    selection = BatchSelection(selected=losses <= threshold, threshold=threshold)
    return selection, new_state


class SampleSelector:
    """带状态的选择器 - 封装配置与滑动平均状态，按批次顺序调用"""

    def __init__(self, config: SelectorConfig, state: Optional[ThresholdState] = None):
        self.config = config
        self.state = state or ThresholdState()

    @property
    def kind(self):
        return self.config.kind

    def reset(self):
        self.state = ThresholdState()

    def observe(self, losses):
        """只更新滑动平均，不做选择（用于 vanilla 阶段预热）"""
        losses = _check_losses(losses)
        self.state, threshold = update_threshold(self.state, float(np.mean(losses)), self.config)
        return threshold

    def select(self, losses, noise_flags=None) -> BatchSelection:
        kind = self.config.kind
        if kind is SelectorKind.VANILLA:
            return select_vanilla(losses)
        if kind is SelectorKind.MKL:
            losses = _check_losses(losses)
            return select_mkl(losses, self.config.resolve_k(losses.shape[0]))
        if kind is SelectorKind.ORACLE:
            losses = _check_losses(losses)
            if noise_flags is None or len(noise_flags) != losses.shape[0]:
                raise SelectionError("oracle selection requires one noise flag per sample")
            return select_oracle(noise_flags)
        selection, self.state = select_adaptive(losses, self.state, self.config)
        return selection
