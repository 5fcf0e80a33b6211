"""
异常定义 - 样本选择、理论计算、训练与配置共用的异常层次
"""


class AdaptiveKError(Exception):
    """所有本项目异常的基类"""


class SelectionError(AdaptiveKError, ValueError):
    """选择器前置条件不满足（空批次、非有限损失、非法 k 等）"""


class TheoryError(AdaptiveKError, ValueError):
    """理论模块参数越界或分布退化"""


class QuadratureError(TheoryError):
    """数值积分未收敛"""

    def __init__(self, message, achieved_error=None):
        super().__init__(message)
        self.achieved_error = achieved_error


class DatasetError(AdaptiveKError, ValueError):
    """数据集构造或噪声注入参数非法"""


class MetricsError(AdaptiveKError, ValueError):
    """指标计算输入不一致"""


class TrainingDivergedError(AdaptiveKError, RuntimeError):
    """训练过程中出现非有限损失"""

    def __init__(self, epoch, iteration, message=None):
        super().__init__(message or f"non-finite loss at epoch {epoch}, iteration {iteration}")
        self.epoch = epoch
        self.iteration = iteration


class ConfigError(AdaptiveKError, ValueError):
    """配置文件或命令行参数非法"""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key
