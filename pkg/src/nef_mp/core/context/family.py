# ============================================================================ #
#                            混合族配置类                                      #
# ============================================================================ #
"""
指数族潜变量（混合族）的描述 dataclass：
  - FamilyTag: 混合族标签枚举
  - MixingFamily: 混合族完整描述（b(·)、ξ₀、各阶导数常数、d/g/h 函数等）

W_φ 的密度为 exp{φ[wξ₀ − b(ξ₀)] + d(φ) + φg(w) + h(w)}，E(W_φ)=b′(ξ₀)=1。
预定义实例见 nef_mp.core.families。
"""
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np

from nef_mp.core.exceptions import UnsupportedFamilyError


class FamilyTag(str, Enum):
    """混合族标签"""
    GAMMA = "gamma"
    INVERSE_GAUSSIAN = "ig"
    GHS = "ghs"


@dataclass(frozen=True)
class MixingFamily:
    """
    混合族描述。

    Attributes:
        tag: 混合族标签
        name: 潜变量名称（Gamma / InverseGaussian / GHS）
        nef_name: 对应的 NEF 极限分布简称（NG / NIG / NGHS）
        count_name: 对应的混合泊松计数分布简称（NB / PIG / MP-GHS）
        xi0: 自然参数 ξ₀
        b2: b″(ξ₀)
        b3: b⁽³⁾(ξ₀)
        b4: b⁽⁴⁾(ξ₀)
        b: 累积函数 b(θ)，接受复数数组（主值分支）
        d: d(φ)，GHS 为 None
        d1: d′(φ)
        d2: d″(φ)
        d1_inverse: d′ 的反函数 v(·)
        d1_lower: d′ 值域下界（v 的参数必须严格大于该值）
        g: g(w)
        h: h(w)
        sampler: (rng, phi, size) -> W 样本
    """
    tag: FamilyTag
    name: str
    nef_name: str
    count_name: str
    xi0: float
    b2: float
    b3: float
    b4: float
    b: Callable[[np.ndarray], np.ndarray]
    d: Optional[Callable[[float], float]] = None
    d1: Optional[Callable[[float], float]] = None
    d2: Optional[Callable[[float], float]] = None
    d1_inverse: Optional[Callable[[float], float]] = None
    d1_lower: Optional[float] = None
    g: Optional[Callable[[np.ndarray], np.ndarray]] = None
    h: Optional[Callable[[np.ndarray], np.ndarray]] = None
    sampler: Optional[Callable[[np.random.Generator, float, int], np.ndarray]] = None

    @property
    def b_xi0(self) -> float:
        """b(ξ₀)"""
        return float(np.real(self.b(np.complex128(self.xi0))))

    @property
    def supports_density(self) -> bool:
        """是否具有可用的潜变量密度（GHS 仅支持累积量）"""
        return self.d is not None and self.g is not None and self.h is not None

    def require_density(self, operation: str) -> None:
        """不支持密度相关运算时抛出 UnsupportedFamilyError"""
        if not self.supports_density:
            raise UnsupportedFamilyError(self.name, operation)

    def __str__(self) -> str:
        return self.name
