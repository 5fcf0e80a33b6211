"""
配置管理模块 - 处理实验配置（YAML）的加载、合并、校验与保存
"""

import copy
import os

import yaml

from .errors import ConfigError

# 全局参数（所有子命令共用）
DEFAULT_GLOBAL_CONFIG = {
    "out": "results",
    "seed": 0,
    "format": "both",
}

# theory 子命令默认参数
DEFAULT_THEORY_CONFIG = {
    "mu1": 0.0,
    "sigma1": 1.0,
    "mu2": 5.0,
    "sigma2": 2.0,
    "tau": 0.4,
    "n": 10,
    "k": 6,
    "mu2_range": [0.0, 8.0, 0.1],
    "sigma2_range": [0.25, 4.0, 0.125],
    "taus": [0.1, 0.2, 0.3, 0.4],
    "point_only": False,
    "pdf_curves": True,
    "pdf_k_values": [1, 2, 4, 6, 8, 10],
    "pdf_x_range": [-5.0, 12.0, 0.05],
    "workers": 1,
}

# simulate 子命令默认参数
DEFAULT_SIMULATE_CONFIG = {
    "mu1": 0.0,
    "sigma1": 1.0,
    "mu2": 5.0,
    "sigma2": 2.0,
    "tau": 0.4,
    "n_batches": 10000,
    "batch_size": 10,
    "selector": "adaptive",
    "k": 6,
    "k_fraction": None,
    "beta1": 0.9,
    "beta2": 0.999,
    "epsilon": 1e-8,
    "threshold_variant": "bias_corrected",
    "summary_window": 5000,
}

# train 子命令默认参数 - 桌面规模的合成数据实验
DEFAULT_TRAIN_CONFIG = {
    "n_train": 5000,
    "n_test": 2000,
    "n_features": 2,
    "n_classes": 4,
    "class_separation": 6.0,  # 相邻类中心相距 6 个标准差，干净样本几乎不重叠
    "cluster_std": 1.0,
    "tau": 0.4,
    "noise_mode": "directed",
    "selectors": ["oracle", "vanilla", "mkl", "adaptive"],
    "seeds": 3,
    "vanilla_epochs": 10,
    "adaptive_epochs": 20,
    "batch_size": 32,
    "learning_rate": 0.1,
    "hidden": 64,
    "k": None,
    "k_fraction": None,
    "beta1": 0.9,
    "beta2": 0.999,
    "epsilon": 1e-8,
    "threshold_variant": "normalized",
    "warm_ema": False,
    "window": 10,
    "workers": 1,
}

DEFAULT_SECTIONS = {
    "theory": DEFAULT_THEORY_CONFIG,
    "simulate": DEFAULT_SIMULATE_CONFIG,
    "train": DEFAULT_TRAIN_CONFIG,
}

FORMATS = ("csv", "json", "both")

# 默认值为 None 的键的实际类型
OPTIONAL_TYPES = {
    "k": int,
    "k_fraction": float,
}


def default_config(command):
    """返回某个子命令的完整默认配置（全局参数 + 子命令参数）"""
    if command not in DEFAULT_SECTIONS:
        raise ConfigError(f"unknown command: {command}", key=command)
    config = copy.deepcopy(DEFAULT_GLOBAL_CONFIG)
    config.update(copy.deepcopy(DEFAULT_SECTIONS[command]))
    return config


def _coerce_scalar(key, value, kind):
    if kind is bool:
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "yes", "1", "on"):
            return True
        if isinstance(value, str) and value.lower() in ("false", "no", "0", "off"):
            return False
        raise ConfigError(f"invalid value for '{key}': expected boolean, got {value!r}", key=key)
    if kind is int:
        if isinstance(value, bool):
            raise ConfigError(f"invalid value for '{key}': expected integer, got {value!r}", key=key)
        if isinstance(value, int):
            return value
        if isinstance(value, float) and value.is_integer():
            return int(value)
        if isinstance(value, str):
            try:
                return int(value)
            except ValueError:
                pass
        raise ConfigError(f"invalid value for '{key}': expected integer, got {value!r}", key=key)
    if kind is float:
        if isinstance(value, bool):
            raise ConfigError(f"invalid value for '{key}': expected number, got {value!r}", key=key)
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"invalid value for '{key}': expected number, got {value!r}", key=key)
    if not isinstance(value, str):
        raise ConfigError(f"invalid value for '{key}': expected string, got {value!r}", key=key)
    return value


def coerce_value(key, value, default):
    """
    按默认值的类型校验并转换配置值

    参数:
        key: 配置键名（用于错误信息）
        value: 待转换的值（来自YAML或命令行字符串）
        default: 该键的默认值，决定目标类型

    返回:
        转换后的值
    """
    if default is None:
        if value is None or (isinstance(value, str) and value.lower() in ("none", "null", "")):
            return None
        return _coerce_scalar(key, value, OPTIONAL_TYPES.get(key, float))

    if isinstance(default, list):
        if isinstance(value, str):
            value = [item.strip() for item in value.split(",") if item.strip()]
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"invalid value for '{key}': expected list, got {value!r}", key=key)
        item_kind = type(default[0]) if default else str
        return [_coerce_scalar(key, item, item_kind) for item in value]

    return _coerce_scalar(key, value, type(default))


def apply_overrides(config, overrides):
    """将覆盖项合并进配置，未知键直接报错"""
    merged = copy.deepcopy(config)
    for key, value in overrides.items():
        if key not in merged:
            raise ConfigError(f"unknown config key: '{key}'", key=key)
        merged[key] = coerce_value(key, value, config[key])
    if merged.get("format") not in FORMATS:
        raise ConfigError(f"invalid value for 'format': {merged.get('format')!r}", key="format")
    return merged


def load_run_config(file_path, command):
    """
    从YAML文件加载某个子命令的配置

    文件顶层可以包含全局参数（out/seed/format）以及 theory/simulate/train 三个小节，
    其他任何键都会被拒绝。文件不存在时返回默认配置。
    """
    config = default_config(command)
    if file_path is None:
        return config
    if not os.path.exists(file_path):
        raise ConfigError(f"config file not found: {file_path}")

    try:
        with open(file_path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"malformed config file {file_path}: {e}")

    if not isinstance(data, dict):
        raise ConfigError(f"config file {file_path} must contain a mapping")

    overrides = {}
    for key, value in data.items():
        if key in DEFAULT_SECTIONS:
            if value is None:
                continue
            if not isinstance(value, dict):
                raise ConfigError(f"section '{key}' must be a mapping", key=key)
            if key != command:
                # 其他子命令的小节也要校验键名
                for sub_key in value:
                    if sub_key not in DEFAULT_SECTIONS[key]:
                        raise ConfigError(f"unknown config key: '{key}.{sub_key}'", key=f"{key}.{sub_key}")
                continue
            for sub_key, sub_value in value.items():
                if sub_key not in DEFAULT_SECTIONS[command]:
                    raise ConfigError(f"unknown config key: '{key}.{sub_key}'", key=f"{key}.{sub_key}")
                overrides[sub_key] = sub_value
        elif key in DEFAULT_GLOBAL_CONFIG:
            overrides[key] = value
        else:
            raise ConfigError(f"unknown config key: '{key}'", key=key)

    return apply_overrides(config, overrides)


def save_run_config(config, command, file_path):
    """保存生效配置到YAML文件，结构与 load_run_config 读取的一致"""
    data = {key: config[key] for key in DEFAULT_GLOBAL_CONFIG}
    data[command] = {key: config[key] for key in DEFAULT_SECTIONS[command]}

    directory = os.path.dirname(file_path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(file_path, "w", encoding="utf-8") as f:
        yaml.safe_dump(data, f, default_flow_style=False, sort_keys=False)
    return file_path
