"""
理论分析模块 - 干净/噪声损失的高斯混合模型下，三种选择规则的数值分析

包含：
- 混合分布的 pdf / cdf / 均值 / 方差
- 顺序统计量与 MKL 分布
- Adaptive-k 截断分布
- 三种规则相对干净样本分布的 MSE，以及参数网格扫描
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import integrate
from scipy.special import bdtr, comb, erf, erfc, gammaln

from .errors import QuadratureError, TheoryError

logger = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)
SQRT2PI = math.sqrt(2.0 * math.pi)

# 积分区间向两侧扩展的标准差倍数
INTEGRATION_WIDTH = 10.0
QUAD_EPSABS = 1e-10
QUAD_EPSREL = 1e-10
QUAD_LIMIT = 500
# 误差估计超过该值视为未收敛
QUAD_FAIL_TOLERANCE = 1e-7
MAX_ORDER_N = 64

SWEEPABLE = ("mu2", "sigma2", "tau")


@dataclass(frozen=True)
class GaussianMixture:
    """干净样本损失 N(mu1, sigma1^2) 与噪声样本损失 N(mu2, sigma2^2) 的混合，噪声比例 tau"""
    mu1: float = 0.0
    sigma1: float = 1.0
    mu2: float = 5.0
    sigma2: float = 2.0
    tau: float = 0.4

    def __post_init__(self):
        if not self.sigma1 > 0.0 or not self.sigma2 > 0.0:
            raise TheoryError(f"sigmas must be positive, got sigma1={self.sigma1}, sigma2={self.sigma2}")
        if not 0.0 <= self.tau <= 1.0:
            raise TheoryError(f"tau must be in [0, 1], got {self.tau}")

    def integration_bounds(self, width=INTEGRATION_WIDTH):
        spread = width * max(self.sigma1, self.sigma2)
        return min(self.mu1, self.mu2) - spread, max(self.mu1, self.mu2) + spread

    def sample(self, size, rng):
        """
        从混合分布采样

        返回:
            (values, noise_flags)，noise_flags 标记样本来自噪声分量
        """
        noise_flags = rng.random(size) < self.tau
        clean = rng.normal(self.mu1, self.sigma1, size)
        noisy = rng.normal(self.mu2, self.sigma2, size)
        return np.where(noise_flags, noisy, clean), noise_flags

    def to_dict(self):
        return {"mu1": self.mu1, "sigma1": self.sigma1, "mu2": self.mu2,
                "sigma2": self.sigma2, "tau": self.tau}


def _normal_pdf(x, mu, sigma):
    z = (np.asarray(x, dtype=np.float64) - mu) / sigma
    return np.exp(-0.5 * z * z) / (sigma * SQRT2PI)


def _normal_cdf(x, mu, sigma):
    z = (np.asarray(x, dtype=np.float64) - mu) / (sigma * SQRT2)
    return 0.5 * (1.0 + erf(z))


def _normal_sf(x, mu, sigma):
    z = (np.asarray(x, dtype=np.float64) - mu) / (sigma * SQRT2)
    return 0.5 * erfc(z)


def mixture_pdf(gm, x):
    """f_D(x) = (1 - tau) f1(x) + tau f2(x)"""
    return (1.0 - gm.tau) * _normal_pdf(x, gm.mu1, gm.sigma1) + gm.tau * _normal_pdf(x, gm.mu2, gm.sigma2)


def mixture_cdf(gm, x):
    """F_D(x) = (1 - tau) F1(x) + tau F2(x)，F1/F2 用误差函数表示"""
    return (1.0 - gm.tau) * _normal_cdf(x, gm.mu1, gm.sigma1) + gm.tau * _normal_cdf(x, gm.mu2, gm.sigma2)


def mixture_sf(gm, x):
    """1 - F_D(x)，右尾用 erfc 计算避免相消"""
    return (1.0 - gm.tau) * _normal_sf(x, gm.mu1, gm.sigma1) + gm.tau * _normal_sf(x, gm.mu2, gm.sigma2)


def mixture_moments(gm) -> Tuple[float, float]:
    """混合分布的均值与方差"""
    mu_d = (1.0 - gm.tau) * gm.mu1 + gm.tau * gm.mu2
    var_d = ((1.0 - gm.tau) * gm.sigma1 ** 2 + gm.tau * gm.sigma2 ** 2
             + (1.0 - gm.tau) * (gm.mu1 - mu_d) ** 2 + gm.tau * (gm.mu2 - mu_d) ** 2)
    return mu_d, var_d


def integrate_density(func, a, b, points=None, limit=QUAD_LIMIT):
    """
    自适应求积（QUADPACK）

    参数:
        func: 标量被积函数
        a, b: 有限积分区间
        points: 区间内的断点提示（分量均值等）
        limit: 最大子区间数

    返回:
        积分值；误差估计超过 QUAD_FAIL_TOLERANCE 时抛出 QuadratureError
    """
    inner = None
    if points:
        inner = sorted({p for p in points if a < p < b}) or None
    result = integrate.quad(func, a, b, points=inner, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL,
                            limit=limit, full_output=1)
    value, abserr = result[0], result[1]
    if not math.isfinite(value) or abserr > QUAD_FAIL_TOLERANCE:
        message = result[3] if len(result) > 3 else "quadrature did not converge"
        raise QuadratureError(f"{message} (achieved error {abserr:.3g})", achieved_error=abserr)
    return value


def _breakpoints(gm):
    mu_d, _ = mixture_moments(gm)
    return [gm.mu1, gm.mu2, mu_d]


def check_order(n, k):
    if n < 1 or n > MAX_ORDER_N:
        raise TheoryError(f"n must be in [1, {MAX_ORDER_N}], got {n}")
    if k < 1 or k > n:
        raise TheoryError(f"k must be in [1, n={n}], got {k}")


def order_statistic_pdf(gm, n, k, x):
    """
    第 k 个顺序统计量的 pdf:
    n f_D(x) C(n-1, k-1) F_D(x)^(k-1) (1 - F_D(x))^(n-k)

    二项式系数在对数空间计算，n 上限为 64。
    """
    check_order(n, k)
    log_comb = gammaln(n) - gammaln(k) - gammaln(n - k + 1)
    cdf = mixture_cdf(gm, x)
    sf = mixture_sf(gm, x)
    return n * mixture_pdf(gm, x) * math.exp(log_comb) * np.power(cdf, k - 1) * np.power(sf, n - k)


def mkl_pdf(gm, n, k, x):
    """
    MKL 分布的 pdf，即前 k 个顺序统计量 pdf 的算术平均

    sum_{p=1..k} C(n-1, p-1) F^(p-1) (1-F)^(n-p) 等于 Binomial(n-1, F) <= k-1 的概率，
    这里直接用二项分布累积函数求和。
    """
    check_order(n, k)
    if k == n:
        return np.asarray(mixture_pdf(gm, x), dtype=np.float64)
    cdf = mixture_cdf(gm, x)
    return (n / k) * mixture_pdf(gm, x) * bdtr(k - 1, n - 1, cdf)


def _moments_of(density, a, b, points, limit):
    mean = integrate_density(lambda t: t * density(t), a, b, points, limit)
    var = integrate_density(lambda t: (t - mean) ** 2 * density(t), a, b, points, limit)
    return mean, max(var, 0.0)


def mkl_moments(gm, n, k, limit=QUAD_LIMIT) -> Tuple[float, float]:
    """MKL 分布的均值和方差"""
    check_order(n, k)
    a, b = gm.integration_bounds()
    return _moments_of(lambda t: float(mkl_pdf(gm, n, k, t)), a, b, _breakpoints(gm), limit)


def mse_sgd(gm):
    """SGD（全部样本）相对干净分布的 MSE = 偏差^2 + 方差"""
    mu_d, var_d = mixture_moments(gm)
    return (mu_d - gm.mu1) ** 2 + var_d


def mse_mkl(gm, n, k, limit=QUAD_LIMIT):
    mu_mkl, var_mkl = mkl_moments(gm, n, k, limit)
    return (gm.mu1 - mu_mkl) ** 2 + var_mkl


def _truncation_mass(gm):
    mu_d, _ = mixture_moments(gm)
    mass = float(mixture_cdf(gm, mu_d))
    if not mass > 0.0:
        raise TheoryError("empty truncation region")
    return mu_d, mass


def adaptive_pdf(gm, x):
    """
    Adaptive-k 分布：混合分布在 mu_D 处截断并重新归一化

    x <= mu_D 时为 f_D(x) / F_D(mu_D)，否则为 0
    """
    mu_d, mass = _truncation_mass(gm)
    x = np.asarray(x, dtype=np.float64)
    return np.where(x <= mu_d, mixture_pdf(gm, x) / mass, 0.0)


def adaptive_moments(gm, limit=QUAD_LIMIT) -> Tuple[float, float]:
    """截断分布在 (-inf, mu_D] 上的均值和方差"""
    mu_d, mass = _truncation_mass(gm)
    a, _ = gm.integration_bounds()

    def density(t):
        return float(mixture_pdf(gm, t)) / mass

    return _moments_of(density, a, mu_d, _breakpoints(gm), limit)


def mse_adk(gm, limit=QUAD_LIMIT):
    mu_adk, var_adk = adaptive_moments(gm, limit)
    return (gm.mu1 - mu_adk) ** 2 + var_adk


def mkl_selection_rates(gm, n, k) -> Tuple[float, float]:
    """
    MKL 在混合分布批次上的期望 precision 与 recall

    以批次中干净样本数 c 为条件：某个干净样本被选中的概率为
    P(其余 c-1 个干净样本与 n-c 个噪声样本中小于它的不超过 k-1 个)。
    precision 对所有批次取平均；recall 只对至少含一个干净样本的批次取平均。
    """
    check_order(n, k)
    a, b = gm.integration_bounds()
    points = _breakpoints(gm)
    p_clean = 1.0 - gm.tau

    expected_clean_selected = 0.0
    recall_sum = 0.0
    recall_weight = 0.0
    for c in range(1, n + 1):
        weight = comb(n, c) * p_clean ** c * gm.tau ** (n - c)
        if weight == 0.0:
            continue
        if k >= n:
            q = 1.0
        else:
            idx_clean = np.arange(c)
            idx_noisy = np.arange(n - c + 1)

            def integrand(t, c=c, idx_clean=idx_clean, idx_noisy=idx_noisy):
                f1 = float(_normal_cdf(t, gm.mu1, gm.sigma1))
                f2 = float(_normal_cdf(t, gm.mu2, gm.sigma2))
                pmf_clean = comb(c - 1, idx_clean) * f1 ** idx_clean * (1.0 - f1) ** (c - 1 - idx_clean)
                pmf_noisy = comb(n - c, idx_noisy) * f2 ** idx_noisy * (1.0 - f2) ** (n - c - idx_noisy)
                below = np.convolve(pmf_clean, pmf_noisy)[:k].sum()
                return float(_normal_pdf(t, gm.mu1, gm.sigma1)) * below

            q = integrate_density(integrand, a, b, points)
        expected_clean_selected += weight * c * q
        recall_sum += weight * q
        recall_weight += weight

    precision = expected_clean_selected / k
    recall = recall_sum / recall_weight if recall_weight > 0.0 else float("nan")
    return precision, recall


def adaptive_selection_rates(gm) -> Tuple[float, float, float]:
    """阈值固定为 mu_D 时的总体 precision、recall 与被选比例"""
    mu_d, mass = _truncation_mass(gm)
    clean_below = float(_normal_cdf(mu_d, gm.mu1, gm.sigma1))
    precision = (1.0 - gm.tau) * clean_below / mass
    return precision, clean_below, mass


@dataclass(frozen=True)
class MseReport:
    """一个参数点上三种规则的 MSE"""
    mse_sgd: float
    mse_mkl: float
    mse_adk: float
    params: GaussianMixture
    n: int
    k: int

    @property
    def mkl_beats_sgd(self):
        return self.mse_mkl < self.mse_sgd

    @property
    def adk_beats_mkl(self):
        return self.mse_adk < self.mse_mkl

    def to_row(self):
        p = self.params
        return {
            "mu1": p.mu1, "sigma1": p.sigma1, "mu2": p.mu2, "sigma2": p.sigma2, "tau": p.tau,
            "n": self.n, "k": self.k,
            "mse_sgd": self.mse_sgd, "mse_mkl": self.mse_mkl, "mse_adk": self.mse_adk,
            "mkl_beats_sgd": self.mkl_beats_sgd, "adk_beats_mkl": self.adk_beats_mkl,
        }


def evaluate_point(gm, n, k) -> MseReport:
    return MseReport(mse_sgd=mse_sgd(gm), mse_mkl=mse_mkl(gm, n, k), mse_adk=mse_adk(gm),
                     params=gm, n=n, k=k)


@dataclass(frozen=True)
class AxisSpec:
    """扫描轴：参数名与闭区间 [start, stop]，步长 step"""
    name: str
    start: float
    stop: float
    step: float

    def __post_init__(self):
        if self.name not in SWEEPABLE:
            raise TheoryError(f"axis must be one of {SWEEPABLE}, got {self.name!r}")
        if not self.step > 0.0 or self.stop < self.start:
            raise TheoryError(f"invalid axis range for {self.name}: [{self.start}, {self.stop}] step {self.step}")

    def values(self):
        count = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return np.round(self.start + self.step * np.arange(count), 12)


@dataclass
class SurfaceGrid:
    """网格扫描结果，reports 按轴顺序行优先排列"""
    axes: List[AxisSpec]
    fixed: Dict[str, float]
    n: int
    k: int
    reports: List[MseReport] = field(default_factory=list)

    @property
    def shape(self):
        return tuple(len(axis.values()) for axis in self.axes)

    def report_at(self, *index):
        flat = int(np.ravel_multi_index(index, self.shape)) if self.axes else 0
        return self.reports[flat]

    def rows(self):
        return [report.to_row() for report in self.reports]


def mse_surface(axes, fixed, n, k, workers=1) -> SurfaceGrid:
    """
    在至多两个参数轴上扫描三种 MSE

    参数:
        axes: AxisSpec 列表（mu2 / sigma2 / tau 中的至多两个）
        fixed: 固定参数，至少包含 mu1、sigma1 以及未扫描的 mu2/sigma2/tau
        n, k: MKL 的批次大小与保留数
        workers: 并行进程数，>1 时使用进程池；输出顺序不受影响

    返回:
        SurfaceGrid
    """
    axes = list(axes)
    if len(axes) > 2:
        raise TheoryError("at most two swept parameters are supported")
    names = [axis.name for axis in axes]
    if len(set(names)) != len(names):
        raise TheoryError(f"duplicate axes: {names}")
    needed = {"mu1", "sigma1"} | (set(SWEEPABLE) - set(names))
    missing = sorted(needed - set(fixed))
    if missing:
        raise TheoryError(f"missing fixed parameters: {missing}")
    check_order(n, k)

    base = {key: float(fixed[key]) for key in needed}
    mixtures = []
    for combo in np.ndindex(*[len(axis.values()) for axis in axes]):
        params = dict(base)
        for axis, i in zip(axes, combo):
            params[axis.name] = float(axis.values()[i])
        mixtures.append(GaussianMixture(**params))

    grid = SurfaceGrid(axes=axes, fixed=base, n=n, k=k)
    evaluate = partial(evaluate_point, n=n, k=k)
    logger.info(f"扫描 {len(mixtures)} 个参数点 (axes={names}, n={n}, k={k}, workers={workers})")
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            grid.reports = list(pool.map(evaluate, mixtures, chunksize=16))
    else:
        row = len(axes[-1].values()) if axes else 1
        for i, gm in enumerate(mixtures):
            grid.reports.append(evaluate(gm))
            if (i + 1) % row == 0:
                logger.debug(f"完成 {i + 1}/{len(mixtures)}")
    return grid


def pdf_curves(gm, n, k, xs, k_values: Optional[List[int]] = None):
    """
    在给定横坐标上计算 f_D、f_MKL、f_adk 曲线

    返回:
        列名到数组的有序字典；k_values 中每个 k 额外生成一列 f_MKL_k<k>
    """
    xs = np.asarray(xs, dtype=np.float64)
    curves = {
        "x": xs,
        "f_D": mixture_pdf(gm, xs),
        "f_MKL": mkl_pdf(gm, n, k, xs),
        "f_adk": adaptive_pdf(gm, xs),
    }
    for extra in k_values or []:
        curves[f"f_MKL_k{extra}"] = mkl_pdf(gm, n, extra, xs)
    return curves
