"""
命令行模块 - theory / simulate / train 三个子命令

用法示例：
    python -m adaptive_k.main theory --tau 0.4 --point-only
    python -m adaptive_k.main simulate --selector mkl --k 6 --out results/stream
    python -m adaptive_k.main train --selectors oracle,vanilla,mkl,adaptive --tau 0.4 --seeds 3

退出码：0 成功，1 运行错误，2 配置错误
"""

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .config import DEFAULT_SECTIONS, FORMATS, apply_overrides, load_run_config, save_run_config
from .datasets import NoiseMode, inject_noise, make_blobs
from .errors import AdaptiveKError, ConfigError, QuadratureError
from .export import SUMMARY_HEADER, SUMMARY_MEANS_HEADER, SURFACE_HEADER, ArtifactWriter
from .metrics import estimate_noise_ratio
from .selectors import SelectorConfig, SelectorKind, ThresholdVariant
from .simkit import TrainSchedule, simulate_stream, summarize_iterations, train
from .theory import (AxisSpec, GaussianMixture, adaptive_selection_rates, check_order, evaluate_point,
                     mkl_selection_rates, mse_surface, pdf_curves)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2

GLOBAL_FLAGS = ("config", "out", "seed", "format", "log_level")


def build_parser():
    """创建命令行参数解析器；每个配置键都有同名参数（下划线换成连字符）"""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", "-c", type=str, default=None, help="YAML配置文件路径")
    common.add_argument("--out", "-o", type=str, default=None, help="输出目录（默认: results）")
    common.add_argument("--seed", type=str, default=None, help="随机种子（默认: 0）")
    common.add_argument("--format", type=str, choices=FORMATS, default=None,
                        help="轨迹输出格式（默认: both）")
    common.add_argument("--log-level", type=str, default="INFO",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="日志级别")

    parser = argparse.ArgumentParser(prog="adaptive-k",
                                     description="Adaptive-k 样本选择：理论分析、损失流模拟与训练实验")
    subparsers = parser.add_subparsers(dest="command", required=True)
    descriptions = {
        "theory": "计算三种选择规则的 MSE 及参数网格",
        "simulate": "在混合分布损失流上运行选择器",
        "train": "在合成噪声数据集上训练并比较选择器",
    }
    for command, defaults in DEFAULT_SECTIONS.items():
        sub = subparsers.add_parser(command, parents=[common], help=descriptions[command])
        for key, default in defaults.items():
            flag = "--" + key.replace("_", "-")
            if isinstance(default, bool):
                sub.add_argument(flag, dest=key, nargs="?", const="true", default=None,
                                 help=f"默认: {default}")
            else:
                sub.add_argument(flag, dest=key, type=str, default=None, help=f"默认: {default}")
    return parser


def resolve_config(args):
    """默认值 < 配置文件 < 命令行参数"""
    config = load_run_config(args.config, args.command)
    overrides = {key: value for key, value in vars(args).items()
                 if key not in GLOBAL_FLAGS and key != "command" and value is not None}
    for key in ("out", "seed", "format"):
        value = getattr(args, key)
        if value is not None:
            overrides[key] = value
    config = apply_overrides(config, overrides)
    if config["seed"] < 0:
        raise ConfigError(f"seed must be unsigned, got {config['seed']}", key="seed")
    return config


def _mixture_from(config):
    return GaussianMixture(mu1=config["mu1"], sigma1=config["sigma1"], mu2=config["mu2"],
                           sigma2=config["sigma2"], tau=config["tau"])


def _selector_from(config, kind, **extra):
    return SelectorConfig(
        kind=SelectorKind(kind),
        k=extra.get("k", config["k"]),
        k_fraction=config["k_fraction"],
        beta1=config["beta1"],
        beta2=config["beta2"],
        epsilon=config["epsilon"],
        threshold_variant=ThresholdVariant(config["threshold_variant"]),
    )


def _validated(builder):
    """把领域对象构造时的参数错误统一转为配置错误"""
    try:
        return builder()
    except (ConfigError, QuadratureError):
        raise
    except (AdaptiveKError, ValueError) as e:
        raise ConfigError(str(e))


def _axis(name, values):
    if len(values) != 3:
        raise ConfigError(f"'{name}_range' must be [start, stop, step]", key=f"{name}_range")
    return AxisSpec(name, *values)


def cmd_theory(config, writer):
    """MSE 三元组、参数网格 surface.csv 以及可选的 pdf_curves.csv"""
    gm = _validated(lambda: _mixture_from(config))
    n, k = config["n"], config["k"]
    axes = None
    if not config["point_only"]:
        axes = _validated(lambda: [_axis("mu2", config["mu2_range"]), _axis("sigma2", config["sigma2_range"])])
        for tau in config["taus"]:
            _validated(lambda: GaussianMixture(mu1=gm.mu1, sigma1=gm.sigma1, tau=tau))

    _validated(lambda: check_order(n, k))
    report = evaluate_point(gm, n, k)
    print(f"mu1={gm.mu1:g} sigma1={gm.sigma1:g} mu2={gm.mu2:g} sigma2={gm.sigma2:g} tau={gm.tau:g} n={n} k={k}")
    print(f"MSE_SGD={report.mse_sgd:.9g} MSE_MKL={report.mse_mkl:.9g} MSE_adk={report.mse_adk:.9g}")

    if config["point_only"]:
        return

    rows = []
    for tau in config["taus"]:
        fixed = {"mu1": gm.mu1, "sigma1": gm.sigma1, "tau": tau}
        grid = mse_surface(axes, fixed, n, k, workers=config["workers"])
        rows.extend(grid.rows())
    writer.write_csv("surface.csv", SURFACE_HEADER, rows)

    if config["pdf_curves"]:
        start, stop, step = config["pdf_x_range"]
        xs = np.round(start + step * np.arange(int(np.floor((stop - start) / step + 1e-9)) + 1), 12)
        k_values = [value for value in config["pdf_k_values"] if 1 <= value <= n]
        curves = pdf_curves(gm, n, k, xs, k_values)
        header = list(curves)
        table = [{column: float(curves[column][i]) for column in header} for i in range(len(xs))]
        writer.write_csv("pdf_curves.csv", header, table)


def cmd_simulate(config, writer):
    """损失流模拟：写出轨迹，并打印长程指标与理论精确值的对比"""
    gm = _validated(lambda: _mixture_from(config))
    selector = _validated(lambda: _selector_from(config, config["selector"]))
    trace = simulate_stream(gm, config["n_batches"], config["batch_size"], selector, seed=config["seed"])
    writer.write_trace("stream_trace", trace, config["format"])

    window = min(config["summary_window"], config["n_batches"])
    summary = summarize_iterations(trace, window=window)
    print(f"selector={selector.kind.value} batches={config['n_batches']} batch_size={config['batch_size']} "
          f"window={window}")
    print(f"precision={_fmt(summary.precision)} recall={_fmt(summary.recall)} "
          f"selected_fraction={summary.selected_fraction:.3f}")

    if selector.kind is SelectorKind.MKL:
        kk = min(selector.resolve_k(config["batch_size"]), config["batch_size"])
        precision, recall = mkl_selection_rates(gm, config["batch_size"], kk)
        print(f"exact: precision={precision:.3f} recall={recall:.3f} selected_fraction="
              f"{kk / config['batch_size']:.3f}")
    elif selector.kind is SelectorKind.ADAPTIVE and selector.threshold_variant is ThresholdVariant.BIAS_CORRECTED:
        precision, recall, fraction = adaptive_selection_rates(gm)
        print(f"exact (threshold = mu_D): precision={precision:.3f} recall={recall:.3f} "
              f"selected_fraction={fraction:.3f}")


def _fmt(value):
    return "n/a" if value is None else f"{value:.3f}"


def _mkl_k(config):
    """MKL 的 k 未配置时按真实噪声比例设定：保留 (1 - tau) 的样本"""
    if config["k"] is not None or config["k_fraction"] is not None:
        return config["k"]
    return max(1, int(round((1.0 - config["tau"]) * config["batch_size"])))


def _run_training(spec):
    """单次训练（可在子进程中执行）"""
    config, selector, seed = spec
    train_ds = make_blobs(config["n_train"], config["n_features"], config["n_classes"],
                          config["class_separation"], seed=[seed, 0], cluster_std=config["cluster_std"])
    train_ds = inject_noise(train_ds, config["tau"], config["noise_mode"], seed=[seed, 2])
    test_ds = make_blobs(config["n_test"], config["n_features"], config["n_classes"],
                         config["class_separation"], seed=[seed, 1], cluster_std=config["cluster_std"])
    schedule = TrainSchedule(vanilla_epochs=config["vanilla_epochs"], adaptive_epochs=config["adaptive_epochs"],
                             batch_size=config["batch_size"], learning_rate=config["learning_rate"], seed=seed)
    selector_config = _selector_from(config, selector, k=_mkl_k(config))
    trace = train(train_ds, test_ds, schedule, selector_config, hidden=config["hidden"],
                  warm_ema=config["warm_ema"])
    trace.metadata.update({"seed": seed, "tau": config["tau"], "noise_mode": config["noise_mode"]})
    return trace


def cmd_train(config, writer):
    """对每个 (选择器, 种子) 训练一次，写出轨迹与 summary.csv"""
    selectors = config["selectors"]
    for name in selectors:
        _validated(lambda: SelectorKind(name))
    _validated(lambda: NoiseMode(config["noise_mode"]))
    _validated(lambda: make_blobs(config["n_test"], config["n_features"], config["n_classes"],
                                  config["class_separation"], seed=0, cluster_std=config["cluster_std"]))
    if config["n_train"] < 1:
        raise ConfigError(f"n_train must be >= 1, got {config['n_train']}", key="n_train")
    if config["seeds"] < 1:
        raise ConfigError("'seeds' must be >= 1", key="seeds")
    if not 0.0 <= config["tau"] <= 1.0:
        raise ConfigError(f"tau must be in [0, 1], got {config['tau']}", key="tau")
    _validated(lambda: TrainSchedule(config["vanilla_epochs"], config["adaptive_epochs"],
                                     config["batch_size"], config["learning_rate"], config["seed"]))
    for name in selectors:
        _validated(lambda: _selector_from(config, name, k=_mkl_k(config)))

    seeds = [config["seed"] + i for i in range(config["seeds"])]
    specs = [(config, name, seed) for name in selectors for seed in seeds]
    logger.info(f"共 {len(specs)} 次训练 (selectors={selectors}, seeds={seeds}, tau={config['tau']})")

    if config["workers"] > 1:
        with ProcessPoolExecutor(max_workers=config["workers"]) as pool:
            traces = list(pool.map(_run_training, specs))
    else:
        traces = [_run_training(spec) for spec in specs]

    rows = []
    for (_, name, seed), trace in zip(specs, traces):
        writer.write_trace(f"trace_{name}_tau{config['tau']:g}_seed{seed}", trace, config["format"])
        estimate = None
        if config["adaptive_epochs"] >= config["window"]:
            estimate = estimate_noise_ratio(trace, config["window"])
        rows.append({"selector": name, "tau": config["tau"], "seed": seed,
                     "max_test_acc": trace.max_test_accuracy(), "est_noise_ratio": estimate})

    means = []
    for name in selectors:
        group = [row for row in rows if row["selector"] == name]
        estimates = [row["est_noise_ratio"] for row in group if row["est_noise_ratio"] is not None]
        means.append({
            "selector": name, "tau": config["tau"],
            "mean_max_test_acc": float(np.mean([row["max_test_acc"] for row in group])),
            "mean_est_noise_ratio": float(np.mean(estimates)) if estimates else None,
            "runs": len(group),
        })

    writer.write_csv("summary.csv", SUMMARY_HEADER, rows)
    writer.write_csv("summary_means.csv", SUMMARY_MEANS_HEADER, means)

    print(f"{'selector':<10} {'tau':>5} {'mean_max_test_acc':>18} {'mean_est_noise_ratio':>21} {'runs':>5}")
    for row in means:
        print(f"{row['selector']:<10} {row['tau']:>5g} {row['mean_max_test_acc']:>18.4f} "
              f"{_fmt(row['mean_est_noise_ratio']):>21} {row['runs']:>5}")


COMMANDS = {
    "theory": cmd_theory,
    "simulate": cmd_simulate,
    "train": cmd_train,
}


def main(argv=None):
    """命令行入口，返回退出码"""
    parser = build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(level=getattr(logging, args.log_level),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    try:
        config = resolve_config(args)
    except ConfigError as e:
        print(f"配置错误: {e}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        with ArtifactWriter(config["out"]) as writer:
            COMMANDS[args.command](config, writer)
            save_run_config(config, args.command, writer.adopt(writer.path("config.yaml")))
    except ConfigError as e:
        print(f"配置错误: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:
        logger.exception(f"{args.command} 运行失败: {e}")
        return EXIT_RUNTIME
    return EXIT_OK
