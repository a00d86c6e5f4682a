"""
绘图数据生成 - 直方图、密度曲线、QQ 点对、研究汇总表与逐重复估计表
只输出数据表（pandas DataFrame），不做任何渲染
"""
from typing import Optional

import numpy as np
import pandas as pd

from nef_mp.core.context import MixingFamily, NefParams, StudySummary
from nef_mp.core.exceptions import DomainError
from nef_mp.core.nef import nef_cumulants, nef_pdf, sample_nef

PARAM_NAMES = ("mu", "sigma2", "phi")


def histogram_bins(sample, bins: int = 30, value_range: Optional[tuple[float, float]] = None) -> pd.DataFrame:
    """
    样本直方图

    Returns:
        DataFrame，列为 left, right, center, count, density
    """
    sample = np.asarray(sample, dtype=float).ravel()
    if sample.size == 0:
        raise DomainError("样本不能为空")
    counts, edges = np.histogram(sample, bins=bins, range=value_range)
    widths = np.diff(edges)
    return pd.DataFrame(
        {
            "left": edges[:-1],
            "right": edges[1:],
            "center": 0.5 * (edges[:-1] + edges[1:]),
            "count": counts,
            "density": counts / (sample.size * widths),
        }
    )


def density_range(p: NefParams, fam: MixingFamily, width: float = 40.0) -> tuple[float, float]:
    """μ ± width·√κ2"""
    half = width * np.sqrt(nef_cumulants(p, fam)[1])
    return p.mu - half, p.mu + half


def density_grid(
    p: NefParams,
    fam: MixingFamily,
    lower: Optional[float] = None,
    upper: Optional[float] = None,
    points: int = 2001,
) -> pd.DataFrame:
    """
    等距网格上的 NEF 密度

    Args:
        lower, upper: 网格范围，缺省为 μ ± 40√κ2
        points: 网格点数
    """
    if points < 2:
        raise DomainError(f"网格点数至少为 2，得到 {points}")
    default_lower, default_upper = density_range(p, fam)
    lower = default_lower if lower is None else lower
    upper = default_upper if upper is None else upper
    if not upper > lower:
        raise DomainError(f"要求 upper > lower，得到 [{lower}, {upper}]")
    y = np.linspace(lower, upper, points)
    return pd.DataFrame({"y": y, "pdf": nef_pdf(p, fam, y)})


def qq_pairs(
    data, p: NefParams, fam: MixingFamily, rng: np.random.Generator, draws: int = 1_000_000
) -> pd.DataFrame:
    """
    QQ 点对：经验分位数对拟合分位数，水平 k/(n+1)

    拟合分位数取自拟合分布的 draws 个 Monte Carlo 抽样。
    """
    data = np.sort(np.asarray(data, dtype=float).ravel())
    n = data.size
    if n == 0:
        raise DomainError("样本不能为空")
    levels = np.arange(1, n + 1) / (n + 1)
    simulated = sample_nef(p, fam, draws, rng)
    return pd.DataFrame(
        {"level": levels, "empirical": data, "fitted": np.quantile(simulated, levels)}
    )


def sums_histograms(samples: dict[float, np.ndarray], bins: int = 30) -> pd.DataFrame:
    """各 λ 的直方图，纵向拼接并加 lambda 列（所有 λ 共用分箱）"""
    pooled = np.concatenate([np.asarray(v, dtype=float) for v in samples.values()])
    value_range = (float(pooled.min()), float(pooled.max()))
    frames = []
    for lam, sample in samples.items():
        frame = histogram_bins(sample, bins=bins, value_range=value_range)
        frame.insert(0, "lambda", lam)
        frames.append(frame)
    return pd.concat(frames, ignore_index=True)


def study_table(summary: StudySummary) -> pd.DataFrame:
    """研究汇总表：每个参数一行"""
    def column(values):
        if values is None:
            return [np.nan] * len(PARAM_NAMES)
        return list(np.asarray(values, dtype=float))

    return pd.DataFrame(
        {
            "param": PARAM_NAMES,
            "true": summary.true_params.as_array(),
            "empirical_sd": column(summary.empirical_sd),
            "mean_se": column(summary.mean_se),
            "bias_em": column(summary.bias_em),
            "bias_mm": column(summary.bias_mm),
        }
    )


def replica_table(summary: StudySummary) -> pd.DataFrame:
    """
    逐重复估计表（MM 与 EM 估计的箱线图数据）

    Returns:
        DataFrame，列为 replica, discard, converged,
        mm_<参数>, em_<参数>, se_<参数>；缺失值为 NaN
    """
    def values(array):
        if array is None:
            return [np.nan] * len(PARAM_NAMES)
        return list(np.asarray(array, dtype=float))

    rows = []
    for outcome in summary.outcomes:
        row = {
            "replica": outcome.index,
            "discard": outcome.discard or "",
            "converged": bool(outcome.converged and outcome.em is not None),
        }
        for prefix, array in (("mm", outcome.mm), ("em", outcome.em), ("se", outcome.se)):
            row.update({f"{prefix}_{name}": v for name, v in zip(PARAM_NAMES, values(array))})
        rows.append(row)
    columns = ["replica", "discard", "converged"] + [
        f"{prefix}_{name}" for prefix in ("mm", "em", "se") for name in PARAM_NAMES
    ]
    return pd.DataFrame(rows, columns=columns)
