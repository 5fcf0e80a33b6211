"""
指标模块 - 样本选择的 precision / recall、按 epoch 平均，以及噪声比例估计
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import MetricsError

PHASE_VANILLA = "vanilla"
PHASE_ADAPTIVE = "adaptive"
PHASE_STREAM = "stream"


@dataclass(frozen=True)
class SelectionMetrics:
    """
    单个批次的选择质量

    precision: 被选样本中干净样本的比例，未选任何样本时为 None
    recall: 干净样本中被选中的比例，批次中没有干净样本时为 None
    """
    precision: Optional[float]
    recall: Optional[float]
    selected_fraction: float
    clean_fraction_in_batch: float
    n_selected: int = 0
    n_clean: int = 0


@dataclass(frozen=True)
class AveragedMetrics:
    """一个 epoch 内批次指标的平均，未定义的值不参与平均"""
    precision: Optional[float]
    recall: Optional[float]
    selected_fraction: float
    clean_fraction_in_batch: float
    undefined_precision: int
    undefined_recall: int


def selection_metrics(mask, noise_flags) -> SelectionMetrics:
    """根据选择掩码和噪声标记计算 precision / recall"""
    mask = np.asarray(mask, dtype=bool)
    flags = np.asarray(noise_flags, dtype=bool)
    if mask.shape != flags.shape:
        raise MetricsError(f"length mismatch: mask {mask.shape} vs noise flags {flags.shape}")
    if mask.ndim != 1 or mask.shape[0] == 0:
        raise MetricsError("empty mini-batch")

    clean = ~flags
    n = mask.shape[0]
    n_selected = int(mask.sum())
    n_clean = int(clean.sum())
    hits = int(np.count_nonzero(mask & clean))

    return SelectionMetrics(
        precision=hits / n_selected if n_selected else None,
        recall=hits / n_clean if n_clean else None,
        selected_fraction=n_selected / n,
        clean_fraction_in_batch=n_clean / n,
        n_selected=n_selected,
        n_clean=n_clean,
    )


def _mean_defined(values):
    defined = [v for v in values if v is not None]
    return (float(np.mean(defined)) if defined else None), len(values) - len(defined)


def epoch_average(records) -> AveragedMetrics:
    """对一个 epoch 的批次指标取算术平均"""
    records = list(records)
    if not records:
        raise MetricsError("no records to average")
    precision, undefined_precision = _mean_defined([r.precision for r in records])
    recall, undefined_recall = _mean_defined([r.recall for r in records])
    return AveragedMetrics(
        precision=precision,
        recall=recall,
        selected_fraction=float(np.mean([r.selected_fraction for r in records])),
        clean_fraction_in_batch=float(np.mean([r.clean_fraction_in_batch for r in records])),
        undefined_precision=undefined_precision,
        undefined_recall=undefined_recall,
    )


def estimate_noise_ratio(trace, window=10):
    """
    用自适应阶段最后 window 个 epoch 的平均被选比例估计噪声比例

    返回:
        1 - mean(selected_fraction)，落在 [0, 1]
    """
    if window < 1:
        raise MetricsError(f"window must be >= 1, got {window}")
    adaptive = [epoch for epoch in trace.epochs if epoch.phase == PHASE_ADAPTIVE]
    if len(adaptive) < window:
        raise MetricsError(f"insufficient adaptive epochs: need {window}, have {len(adaptive)}")
    selected = float(np.mean([epoch.selected_fraction for epoch in adaptive[-window:]]))
    return min(1.0, max(0.0, 1.0 - selected))
