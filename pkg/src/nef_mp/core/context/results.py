# ============================================================================ #
#                              结果类                                          #
# ============================================================================ #
"""
估计与研究结果 dataclass：
  - EStepRecord: E 步后验期望（各字段为与数据等长的数组）
  - FitMethod: 估计方法枚举
  - FitResult: 单次拟合结果
  - StudySummary: Monte Carlo 研究汇总
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

import numpy as np

from nef_mp.core.context.params import NefParams, NormalParams


def _as_list(values) -> Optional[list]:
    if values is None:
        return None
    return [None if not np.isfinite(v) else float(v) for v in np.asarray(values, dtype=float).ravel()]


@dataclass(frozen=True)
class EStepRecord:
    """
    逐观测的后验期望 E[·|y_i]。

    Attributes:
        alpha: E[W|y]
        gamma: E[W⁻¹|y]
        delta: E[g(W)|y]
        lambda2: E[W²|y]（仅 full=True）
        tau: E[W·g(W)|y]（仅 full=True）
        nu: E[g(W)²|y]（仅 full=True）
        rho: E[W⁻²|y]（仅 full=True）
        varphi: E[W⁻¹·g(W)|y]（仅 full=True）
    """
    alpha: np.ndarray
    gamma: np.ndarray
    delta: np.ndarray
    lambda2: Optional[np.ndarray] = None
    tau: Optional[np.ndarray] = None
    nu: Optional[np.ndarray] = None
    rho: Optional[np.ndarray] = None
    varphi: Optional[np.ndarray] = None

    @property
    def full(self) -> bool:
        return self.lambda2 is not None

    def __len__(self) -> int:
        return len(self.alpha)

    def record(self, index: int) -> dict[str, float]:
        """第 index 个观测的全部期望"""
        names = ["alpha", "gamma", "delta"]
        if self.full:
            names += ["lambda2", "tau", "nu", "rho", "varphi"]
        return {name: float(getattr(self, name)[index]) for name in names}


class FitMethod(str, Enum):
    """估计方法"""
    MM = "MM"
    EM = "EM"
    NORMAL_MLE = "NormalMLE"


@dataclass(frozen=True)
class FitResult:
    """
    拟合结果。

    Attributes:
        params: 估计值（NEF 或正态）
        std_errors: 标准误，信息矩阵奇异时为 None
        loglik_trace: 每次迭代的观测对数似然
        iterations: 迭代次数
        converged: 是否满足收敛准则
        method: 估计方法
        mm_multiple_roots: 矩估计两个根都可行时置位
        information: 观测信息矩阵（3×3 或 2×2）
        error: 失败信息
    """
    params: Union[NefParams, NormalParams]
    std_errors: Optional[tuple[float, ...]]
    loglik_trace: tuple[float, ...]
    iterations: int
    converged: bool
    method: FitMethod
    mm_multiple_roots: bool = False
    information: Optional[np.ndarray] = field(default=None, compare=False)
    error: Optional[str] = None

    @property
    def loglik(self) -> Optional[float]:
        """最终对数似然"""
        return self.loglik_trace[-1] if self.loglik_trace else None

    def ascent_violations(self, slack: float = 1e-8) -> int:
        """对数似然轨迹中下降超过 slack 的次数"""
        trace = np.asarray(self.loglik_trace, dtype=float)
        if trace.size < 2:
            return 0
        return int(np.sum(np.diff(trace) < -slack))

    def to_dict(self) -> dict:
        return {
            "method": self.method.value,
            "params": self.params.to_dict(),
            "std_errors": list(self.std_errors) if self.std_errors is not None else None,
            "loglik": self.loglik,
            "loglik_trace": list(self.loglik_trace),
            "iterations": self.iterations,
            "converged": self.converged,
            "mm_multiple_roots": self.mm_multiple_roots,
            "information": (
                self.information.tolist() if self.information is not None else None
            ),
            "error": self.error,
        }


@dataclass(frozen=True)
class StudySummary:
    """
    Monte Carlo 研究汇总（参数顺序 μ, σ², φ）。

    Attributes:
        family: 混合族名称
        true_params: 真实参数
        n: 每个样本的长度
        requested: 请求的重复次数
        completed: 有效重复次数（= requested − 丢弃数）
        discards: 按原因分类的丢弃数
        empirical_sd: EM 估计的经验标准差（completed<2 时为 None）
        mean_se: Louis 标准误的均值
        bias_em: EM 估计偏差
        bias_mm: 矩估计偏差（仅可行的矩估计）
        mm_inadmissible_rate: 矩估计不可行比例
        ascent_violations: EM 对数似然下降次数合计
        not_converged: 达到 max_iter 仍未收敛的 EM 拟合数（默认仍计入汇总）
        singular_information: 信息矩阵奇异、不计入 mean_se 的重复数
        runtime: 运行时间（秒），默认不写入输出以保持可复现
        outcomes: 逐重复结果（按编号排列，不写入 to_dict）
    """
    family: str
    true_params: NefParams
    n: int
    requested: int
    completed: int
    discards: dict[str, int]
    empirical_sd: Optional[np.ndarray]
    mean_se: Optional[np.ndarray]
    bias_em: Optional[np.ndarray]
    bias_mm: Optional[np.ndarray]
    mm_inadmissible_rate: float
    ascent_violations: int = 0
    not_converged: int = 0
    singular_information: int = 0
    runtime: Optional[float] = None
    outcomes: tuple = field(default=(), compare=False, repr=False)

    def to_dict(self) -> dict:
        out = {
            "family": self.family,
            "true_params": self.true_params.to_dict(),
            "n": self.n,
            "requested": self.requested,
            "completed": self.completed,
            "discards": dict(self.discards),
            "empirical_sd": _as_list(self.empirical_sd),
            "mean_se": _as_list(self.mean_se),
            "bias_em": _as_list(self.bias_em),
            "bias_mm": _as_list(self.bias_mm),
            "mm_inadmissible_rate": self.mm_inadmissible_rate,
            "ascent_violations": self.ascent_violations,
            "not_converged": self.not_converged,
            "singular_information": self.singular_information,
        }
        if self.runtime is not None:
            out["runtime"] = self.runtime
        return out
