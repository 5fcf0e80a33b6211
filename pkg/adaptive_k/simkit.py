"""
实验模块 - 两阶段（vanilla -> 选择）的小批量训练器，以及基于理论混合分布的损失流模拟器
"""

import logging
import math
from dataclasses import asdict, dataclass, field, fields, replace
from typing import List, Optional

import numpy as np

from .datasets import subset
from .errors import ConfigError, TrainingDivergedError
from .metrics import PHASE_ADAPTIVE, PHASE_STREAM, PHASE_VANILLA, epoch_average, selection_metrics
from .model import MlpModel
from .selectors import SampleSelector, SelectorKind, select_vanilla

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainSchedule:
    """训练日程：先 vanilla_epochs 个全样本 epoch，再 adaptive_epochs 个选择 epoch"""
    vanilla_epochs: int = 10
    adaptive_epochs: int = 20
    batch_size: int = 32
    learning_rate: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.vanilla_epochs < 0 or self.adaptive_epochs < 0:
            raise ConfigError("epoch counts must be >= 0")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.learning_rate > 0.0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.seed < 0:
            raise ConfigError(f"seed must be unsigned, got {self.seed}")

    @property
    def total_epochs(self):
        return self.vanilla_epochs + self.adaptive_epochs


@dataclass
class IterationRecord:
    threshold: Optional[float]
    n_selected: int
    batch_size: int
    precision: Optional[float]
    recall: Optional[float]
    clean_fraction: float
    mean_loss_clean: Optional[float]
    mean_loss_noisy: Optional[float]

    @property
    def selected_fraction(self):
        return self.n_selected / self.batch_size

    @property
    def clean_fraction_in_batch(self):
        return self.clean_fraction


@dataclass
class EpochRecord:
    epoch: int
    phase: str
    test_acc: Optional[float] = None
    train_acc: Optional[float] = None
    mean_loss_clean: Optional[float] = None
    mean_loss_noisy: Optional[float] = None
    std_loss_clean: Optional[float] = None
    std_loss_noisy: Optional[float] = None
    precision: Optional[float] = None
    recall: Optional[float] = None
    selected_fraction: float = 0.0
    clean_fraction: float = 0.0
    skipped_updates: int = 0
    threshold_state: Optional[dict] = None
    iterations: List[IterationRecord] = field(default_factory=list)

    @property
    def thresholds(self):
        return [it.threshold for it in self.iterations]


@dataclass
class RunTrace:
    """一次运行的完整轨迹：元数据 + 每个 epoch 的记录"""
    metadata: dict
    epochs: List[EpochRecord] = field(default_factory=list)

    def max_test_accuracy(self):
        values = [e.test_acc for e in self.epochs if e.test_acc is not None]
        return max(values) if values else None

    def iterations(self):
        """按 (epoch, iter) 顺序遍历所有迭代记录"""
        for epoch in self.epochs:
            for index, record in enumerate(epoch.iterations, start=1):
                yield epoch.epoch, index, record

    def to_dict(self):
        return {
            "metadata": self.metadata,
            "epochs": [
                {**{f.name: getattr(e, f.name) for f in fields(e) if f.name != "iterations"},
                 "iterations": [
                     {"threshold": it.threshold, "n_selected": it.n_selected,
                      "precision": it.precision, "recall": it.recall,
                      "clean_fraction": it.clean_fraction}
                     for it in e.iterations
                 ]}
                for e in self.epochs
            ],
        }


def _mean_or_none(values):
    return float(np.mean(values)) if values.size else None


def _std_or_none(values):
    return float(np.std(values)) if values.size else None


def _iteration_record(losses, noise_flags, selection, threshold):
    metrics = selection_metrics(selection.selected, noise_flags)
    return IterationRecord(
        threshold=threshold,
        n_selected=metrics.n_selected,
        batch_size=len(losses),
        precision=metrics.precision,
        recall=metrics.recall,
        clean_fraction=metrics.clean_fraction_in_batch,
        mean_loss_clean=_mean_or_none(losses[~noise_flags]),
        mean_loss_noisy=_mean_or_none(losses[noise_flags]),
    )


def _close_epoch(record):
    averaged = epoch_average(record.iterations)
    record.precision = averaged.precision
    record.recall = averaged.recall
    record.selected_fraction = averaged.selected_fraction
    record.clean_fraction = averaged.clean_fraction_in_batch


def train(train_ds, test_ds, schedule, selector_config, hidden=64, warm_ema=False):
    """
    两阶段训练

    参数:
        train_ds: 带噪声的训练集（只用 observed_labels 训练，noise_flags 仅供 Oracle 和指标使用）
        test_ds: 干净测试集（用 true_labels 评估）
        schedule: TrainSchedule
        selector_config: 选择阶段使用的 SelectorConfig
        hidden: 隐层宽度
        warm_ema: vanilla 阶段是否也累积 Adaptive-k 的滑动平均

    返回:
        RunTrace
    """
    model = MlpModel(train_ds.features.shape[1], train_ds.n_classes, hidden=hidden, seed=schedule.seed)
    selector = SampleSelector(selector_config)
    feed_ema = warm_ema and selector.kind is SelectorKind.ADAPTIVE
    n = train_ds.n_samples

    trace = RunTrace(metadata={
        "kind": "train",
        "selector": selector_config.kind.value,
        "selector_config": {
            "k": selector_config.k,
            "k_fraction": selector_config.k_fraction,
            "beta1": selector_config.beta1,
            "beta2": selector_config.beta2,
            "epsilon": selector_config.epsilon,
            "threshold_variant": selector_config.threshold_variant.value,
        },
        "schedule": asdict(schedule),
        "hidden": hidden,
        "warm_ema": warm_ema,
        "n_train": n,
        "n_test": test_ds.n_samples,
        "noise_ratio": train_ds.noise_ratio,
        "iterations_per_epoch": math.ceil(n / schedule.batch_size),
    })

    for epoch in range(1, schedule.total_epochs + 1):
        phase = PHASE_VANILLA if epoch <= schedule.vanilla_epochs else PHASE_ADAPTIVE
        if epoch == schedule.vanilla_epochs + 1 and not feed_ema:
            selector.reset()

        # 每个 epoch 的打乱顺序只由 (运行种子, epoch) 决定
        order = np.random.default_rng([schedule.seed, epoch]).permutation(n)
        record = EpochRecord(epoch=epoch, phase=phase)

        for iteration, start in enumerate(range(0, n, schedule.batch_size), start=1):
            batch = subset(train_ds, order[start:start + schedule.batch_size])
            losses = model.per_sample_losses(batch.features, batch.observed_labels)
            if not np.all(np.isfinite(losses)):
                raise TrainingDivergedError(epoch, iteration)

            if phase == PHASE_VANILLA:
                selection = select_vanilla(losses)
                threshold = selector.observe(losses) if feed_ema else None
            else:
                selection = selector.select(losses, batch.noise_flags)
                threshold = selection.threshold

            if selection.n_selected == 0:
                record.skipped_updates += 1
                logger.info(f"epoch {epoch} iter {iteration}: 没有样本被选中，跳过更新")
            else:
                model.sgd_step(batch.features, batch.observed_labels, schedule.learning_rate,
                               mask=selection.selected)

            record.iterations.append(_iteration_record(losses, batch.noise_flags, selection, threshold))
            logger.debug(f"epoch {epoch} iter {iteration}: selected {selection.n_selected}/{len(losses)}"
                         f" threshold={threshold}")

        all_losses = model.per_sample_losses(train_ds.features, train_ds.observed_labels)
        if not np.all(np.isfinite(all_losses)):
            raise TrainingDivergedError(epoch, len(record.iterations))
        flags = train_ds.noise_flags
        record.mean_loss_clean = _mean_or_none(all_losses[~flags])
        record.mean_loss_noisy = _mean_or_none(all_losses[flags])
        record.std_loss_clean = _std_or_none(all_losses[~flags])
        record.std_loss_noisy = _std_or_none(all_losses[flags])
        record.train_acc = model.accuracy(train_ds.features, train_ds.observed_labels)
        record.test_acc = model.accuracy(test_ds.features, test_ds.true_labels)
        if selector.kind is SelectorKind.ADAPTIVE and (phase == PHASE_ADAPTIVE or feed_ema):
            record.threshold_state = selector.state.to_dict()
        _close_epoch(record)
        trace.epochs.append(record)

        logger.info(f"[{selector_config.kind.value}] epoch {epoch}/{schedule.total_epochs} ({phase}): "
                    f"test_acc={record.test_acc:.4f} selected={record.selected_fraction:.3f} "
                    f"loss clean/noisy={record.mean_loss_clean}/{record.mean_loss_noisy}")

    return trace


def simulate_stream(gm, n_batches, batch_size, selector_config, seed):
    """
    不训练模型，直接从混合分布抽取损失批次并运行选择器

    每个批次的 batch_size 个损失独立来自 gm，噪声标记即样本所属分量。

    返回:
        RunTrace，只有一个 phase 为 "stream" 的记录，包含全部批次
    """
    if n_batches < 1 or batch_size < 1:
        raise ConfigError(f"n_batches and batch_size must be >= 1, got {n_batches}, {batch_size}")
    rng = np.random.default_rng(seed)
    selector = SampleSelector(replace(selector_config, allow_negative_losses=True))
    record = EpochRecord(epoch=1, phase=PHASE_STREAM)

    for _ in range(n_batches):
        losses, flags = gm.sample(batch_size, rng)
        selection = selector.select(losses, flags)
        record.iterations.append(_iteration_record(losses, flags, selection, selection.threshold))

    if selector.kind is SelectorKind.ADAPTIVE:
        record.threshold_state = selector.state.to_dict()
    _close_epoch(record)
    return RunTrace(
        metadata={
            "kind": "stream",
            "selector": selector_config.kind.value,
            "mixture": gm.to_dict(),
            "n_batches": n_batches,
            "batch_size": batch_size,
            "seed": seed,
            "threshold_variant": selector_config.threshold_variant.value,
        },
        epochs=[record],
    )


def summarize_iterations(trace, window=None):
    """对最后 window 个迭代（默认全部）的选择指标取平均"""
    records = [record for _, _, record in trace.iterations()]
    if window is not None:
        records = records[-window:]
    return epoch_average(records)
