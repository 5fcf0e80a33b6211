"""
输出模块 - 将理论网格、运行轨迹和汇总表写成可逐字节复现的 CSV / JSON 文件
"""

import csv
import json
import logging
import os

logger = logging.getLogger(__name__)

SURFACE_HEADER = ["mu1", "sigma1", "mu2", "sigma2", "tau", "n", "k",
                  "mse_sgd", "mse_mkl", "mse_adk", "mkl_beats_sgd", "adk_beats_mkl"]

TRACE_HEADER = ["epoch", "iter", "threshold", "n_selected", "batch_size",
                "precision", "recall", "mean_loss_clean", "mean_loss_noisy"]

SUMMARY_HEADER = ["selector", "tau", "seed", "max_test_acc", "est_noise_ratio"]

SUMMARY_MEANS_HEADER = ["selector", "tau", "mean_max_test_acc", "mean_est_noise_ratio", "runs"]


def format_value(value):
    """浮点数保留9位有效数字，布尔值写成0/1，缺失值写成空串"""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return f"{value:.9g}"
    if hasattr(value, "item"):
        return format_value(value.item())
    return str(value)


def round_floats(obj):
    """递归地把浮点数截到9位有效数字，保证 JSON 输出稳定"""
    if isinstance(obj, bool) or obj is None:
        return obj
    if isinstance(obj, float):
        return float(f"{obj:.9g}")
    if isinstance(obj, dict):
        return {key: round_floats(value) for key, value in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_floats(value) for value in obj]
    if hasattr(obj, "item"):
        return round_floats(obj.item())
    return obj


def trace_rows(trace):
    for epoch, index, it in trace.iterations():
        yield {
            "epoch": epoch, "iter": index, "threshold": it.threshold,
            "n_selected": it.n_selected, "batch_size": it.batch_size,
            "precision": it.precision, "recall": it.recall,
            "mean_loss_clean": it.mean_loss_clean, "mean_loss_noisy": it.mean_loss_noisy,
        }


class ArtifactWriter:
    """
    输出目录管理器

    记录本次写出的所有文件；with 块内抛出异常时删除这些文件，避免留下不完整的结果。
    """

    def __init__(self, out_dir):
        self.out_dir = out_dir
        self.written = []
        self._created_dir = False

    def __enter__(self):
        if not os.path.isdir(self.out_dir):
            os.makedirs(self.out_dir)
            self._created_dir = True
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is not None:
            self.cleanup()
        return False

    def path(self, name):
        return os.path.join(self.out_dir, name)

    def _register(self, name):
        path = self.path(name)
        directory = os.path.dirname(path)
        if directory and not os.path.isdir(directory):
            os.makedirs(directory)
        self.written.append(path)
        return path

    def write_csv(self, name, header, rows):
        path = self._register(name)
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([format_value(row.get(column)) for column in header])
        logger.info(f"已写出: {path}")
        return path

    def write_json(self, name, data):
        path = self._register(name)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(round_floats(data), f, indent=2, allow_nan=False)
            f.write("\n")
        logger.info(f"已写出: {path}")
        return path

    def write_trace(self, stem, trace, fmt="both"):
        """按格式写出一条运行轨迹（stem.csv 和/或 stem.json）"""
        paths = []
        if fmt in ("csv", "both"):
            paths.append(self.write_csv(f"{stem}.csv", TRACE_HEADER, trace_rows(trace)))
        if fmt in ("json", "both"):
            paths.append(self.write_json(f"{stem}.json", trace.to_dict()))
        return paths

    def adopt(self, path):
        """登记由其他函数写出的文件（例如 YAML 配置回显）"""
        self.written.append(path)
        return path

    def cleanup(self):
        for path in reversed(self.written):
            if os.path.exists(path):
                os.remove(path)
        self.written = []
        if self._created_dir and os.path.isdir(self.out_dir) and not os.listdir(self.out_dir):
            os.rmdir(self.out_dir)
        logger.info(f"已清理未完成的输出: {self.out_dir}")
