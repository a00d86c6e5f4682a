# ============================================================================ #
#                              参数配置类                                      #
# ============================================================================ #
"""
数值计算使用的参数 dataclass，包括：
  - GigParams: 广义逆高斯核 u^(p−1)·exp{−½(a·u + b/u)} 的参数
  - NefParams: NEF 分布参数 (μ, σ², φ)
  - NormalParams: 正态基准模型参数 (μ, σ²)，对应 φ=∞
  - MpCountParams: 混合泊松计数参数 (λ, φ, 混合族)
  - SummandSpec: 随机和中 i.i.d. 被加项 X_n 的分布
  - StableCfSpec: 稳定特征函数 Ψ(t) 的描述

注意：所有配置均为不可变对象，构造时校验定义域。
"""
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np

from nef_mp.core.context.family import MixingFamily
from nef_mp.core.exceptions import DomainError


def _require_finite(**values: float) -> None:
    for name, value in values.items():
        if not np.isfinite(value):
            raise DomainError(f"{name} 必须为有限值，得到 {value}")


def _require_positive(**values: float) -> None:
    _require_finite(**values)
    for name, value in values.items():
        if value <= 0:
            raise DomainError(f"{name} 必须大于 0，得到 {value}")


# region GIG 参数


@dataclass(frozen=True)
class GigParams:
    """
    广义逆高斯核参数。

    Attributes:
        a: u 的系数，a > 0
        b: 1/u 的系数，b ≥ 0
        p: 幂指数；b = 0 时必须 p > 0（Gamma 极限）
    """
    a: float
    b: float
    p: float

    def __post_init__(self):
        _require_positive(a=self.a)
        _require_finite(b=self.b, p=self.p)
        if self.b < 0:
            raise DomainError(f"b 必须非负，得到 {self.b}")
        if self.b == 0 and self.p <= 0:
            raise DomainError(f"b=0 时要求 p>0，得到 p={self.p}")


# endregion


# region NEF 参数


@dataclass(frozen=True)
class NefParams:
    """
    NEF 分布参数。

    Attributes:
        mu: 位置/均值 μ
        sigma2: 尺度 σ² > 0
        phi: 潜变量离散参数 φ > 0
    """
    mu: float
    sigma2: float
    phi: float

    def __post_init__(self):
        _require_finite(mu=self.mu)
        _require_positive(sigma2=self.sigma2, phi=self.phi)

    def as_array(self) -> np.ndarray:
        """按 (μ, σ², φ) 顺序返回数组"""
        return np.array([self.mu, self.sigma2, self.phi], dtype=float)

    @classmethod
    def from_array(cls, values) -> "NefParams":
        mu, sigma2, phi = (float(v) for v in values)
        return cls(mu=mu, sigma2=sigma2, phi=phi)

    def to_dict(self) -> dict:
        return {"mu": self.mu, "sigma2": self.sigma2, "phi": self.phi}


@dataclass(frozen=True)
class NormalParams:
    """正态模型参数（NEF 的 φ→∞ 极限）"""
    mu: float
    sigma2: float

    def __post_init__(self):
        _require_finite(mu=self.mu)
        _require_positive(sigma2=self.sigma2)

    def as_array(self) -> np.ndarray:
        return np.array([self.mu, self.sigma2], dtype=float)

    def to_dict(self) -> dict:
        return {"mu": self.mu, "sigma2": self.sigma2}


# endregion


# region 混合泊松计数与被加项


@dataclass(frozen=True)
class MpCountParams:
    """
    混合泊松计数 N_λ 的参数：N | W=w ~ Poisson(λw)。

    Attributes:
        lam: 速率 λ > 0
        phi: 潜变量离散参数 φ > 0
        family: 混合族（Gamma → NB，InverseGaussian → PIG）
    """
    lam: float
    phi: float
    family: MixingFamily

    def __post_init__(self):
        _require_positive(lam=self.lam, phi=self.phi)


class SummandKind(str, Enum):
    """被加项分布类型"""
    EXPONENTIAL = "exp"
    NORMAL = "normal"
    CUSTOM = "custom"


@dataclass(frozen=True)
class SummandSpec:
    """
    i.i.d. 被加项 X_n 的分布。

    Attributes:
        kind: 分布类型
        mu: E(X₁)
        sigma2: Var(X₁) > 0
        sampler: 自定义采样器 (rng, size) -> 样本，仅 CUSTOM 使用
    """
    kind: SummandKind
    mu: float
    sigma2: float
    sampler: Optional[Callable[[np.random.Generator, int], np.ndarray]] = None

    def __post_init__(self):
        _require_finite(mu=self.mu)
        _require_positive(sigma2=self.sigma2)
        if self.kind == SummandKind.CUSTOM and self.sampler is None:
            raise DomainError("自定义被加项必须提供 sampler")
        if self.kind == SummandKind.EXPONENTIAL and self.mu <= 0:
            raise DomainError(f"指数分布均值必须大于 0，得到 {self.mu}")

    @classmethod
    def exponential(cls, mean: float) -> "SummandSpec":
        """均值为 mean 的指数分布（方差 mean²）"""
        return cls(kind=SummandKind.EXPONENTIAL, mu=mean, sigma2=mean * mean)

    @classmethod
    def normal(cls, mu: float, sigma2: float) -> "SummandSpec":
        return cls(kind=SummandKind.NORMAL, mu=mu, sigma2=sigma2)

    @classmethod
    def custom(
        cls,
        sampler: Callable[[np.random.Generator, int], np.ndarray],
        mu: float,
        sigma2: float,
    ) -> "SummandSpec":
        """用户自定义采样器，须同时给出真实的均值与方差"""
        return cls(kind=SummandKind.CUSTOM, mu=mu, sigma2=sigma2, sampler=sampler)

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """抽取 size 个被加项"""
        if self.kind == SummandKind.EXPONENTIAL:
            return rng.exponential(scale=self.mu, size=size)
        if self.kind == SummandKind.NORMAL:
            return rng.normal(loc=self.mu, scale=np.sqrt(self.sigma2), size=size)
        return np.asarray(self.sampler(rng, size), dtype=float)

    def describe(self) -> str:
        if self.kind == SummandKind.EXPONENTIAL:
            return f"exp:{self.mu}"
        if self.kind == SummandKind.NORMAL:
            return f"normal:{self.mu},{self.sigma2}"
        return f"custom(mu={self.mu},sigma2={self.sigma2})"


# endregion


# region 稳定特征函数


class StableKind(str, Enum):
    """稳定特征函数类型"""
    SYMMETRIC_ALPHA_STABLE = "sas"
    NORMAL_DRIFT = "normal"


@dataclass(frozen=True)
class StableCfSpec:
    """
    α-稳定特征函数 Ψ(t)。

    - SYMMETRIC_ALPHA_STABLE: Ψ(t) = exp(−c|t|^α)，c>0，α∈(0,2]
    - NORMAL_DRIFT: Ψ(t) = exp(itμ − σ²t²/2)

    SymmetricAlphaStable(c, 2) 与 NormalDrift(0, 2c) 相同。
    """
    kind: StableKind
    c: Optional[float] = None
    alpha: Optional[float] = None
    mu: Optional[float] = None
    sigma2: Optional[float] = None

    def __post_init__(self):
        if self.kind == StableKind.SYMMETRIC_ALPHA_STABLE:
            if self.c is None or self.alpha is None:
                raise DomainError("对称 α-稳定需要 c 和 alpha")
            _require_positive(c=self.c, alpha=self.alpha)
            if self.alpha > 2:
                raise DomainError(f"alpha 必须位于 (0, 2]，得到 {self.alpha}")
        else:
            if self.mu is None or self.sigma2 is None:
                raise DomainError("正态漂移需要 mu 和 sigma2")
            _require_finite(mu=self.mu)
            _require_positive(sigma2=self.sigma2)

    @classmethod
    def symmetric_alpha_stable(cls, c: float, alpha: float) -> "StableCfSpec":
        return cls(kind=StableKind.SYMMETRIC_ALPHA_STABLE, c=c, alpha=alpha)

    @classmethod
    def normal_drift(cls, mu: float, sigma2: float) -> "StableCfSpec":
        return cls(kind=StableKind.NORMAL_DRIFT, mu=mu, sigma2=sigma2)

    def describe(self) -> str:
        if self.kind == StableKind.SYMMETRIC_ALPHA_STABLE:
            return f"sas:{self.c},{self.alpha}"
        return f"normal:{self.mu},{self.sigma2}"


# endregion
