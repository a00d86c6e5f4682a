"""预定义混合族实例：GAMMA（→ NB / NG）、INVERSE_GAUSSIAN（→ PIG / NIG）、GHS（仅累积量）"""
import logging

import numpy as np
from scipy.optimize import brentq
from scipy.special import digamma, gammaln, polygamma

from nef_mp.core.context import FamilyTag, MixingFamily
from nef_mp.core.exceptions import DomainError

logger = logging.getLogger(__name__)

# d′ 反函数求根区间
PHI_BRACKET = (1e-8, 1e8)


# region Gamma 潜变量：W ~ Gamma(shape=φ, rate=φ)


def _gamma_b(theta):
    return -np.log(-theta)


def _gamma_d(phi):
    return phi * np.log(phi) - gammaln(phi)


def _gamma_d1(phi):
    return np.log(phi) + 1.0 - digamma(phi)


def _gamma_d2(phi):
    return 1.0 / phi - polygamma(1, phi)


def _gamma_d1_inverse(x: float) -> float:
    """
    解 log φ + 1 − ψ(φ) = x。

    左侧在 (0,∞) 上严格递减，值域为 (1,∞)；根落在区间外时截断并告警。
    """
    if not x > 1.0:
        raise DomainError(f"Gamma 族 d′ 的值域为 (1,∞)，得到 {x}")
    target = x - 1.0
    f = lambda phi: np.log(phi) - digamma(phi) - target  # noqa: E731
    lo, hi = PHI_BRACKET
    if f(hi) > 0:
        logger.warning("φ 的根超出上界 %.0e，截断到上界 (x−1=%.3e)", hi, target)
        return hi
    if f(lo) < 0:
        logger.warning("φ 的根低于下界 %.0e，截断到下界 (x−1=%.3e)", lo, target)
        return lo
    return float(brentq(f, lo, hi, xtol=1e-14, rtol=1e-14, maxiter=500))


def _gamma_g(w):
    return np.log(w)


def _gamma_h(w):
    return -np.log(w)


def _gamma_sampler(rng: np.random.Generator, phi: float, size: int) -> np.ndarray:
    return rng.gamma(shape=phi, scale=1.0 / phi, size=size)


GAMMA = MixingFamily(
    tag=FamilyTag.GAMMA,
    name="Gamma",
    nef_name="NG",
    count_name="NB",
    xi0=-1.0,
    b2=1.0,
    b3=2.0,
    b4=6.0,
    b=_gamma_b,
    d=_gamma_d,
    d1=_gamma_d1,
    d2=_gamma_d2,
    d1_inverse=_gamma_d1_inverse,
    d1_lower=1.0,
    g=_gamma_g,
    h=_gamma_h,
    sampler=_gamma_sampler,
)

# endregion


# region 逆高斯潜变量：W ~ IG(均值 1, 形状 φ)


def _ig_b(theta):
    return -np.sqrt(-2.0 * theta)


def _ig_d(phi):
    return 0.5 * np.log(phi)


def _ig_d1(phi):
    return 0.5 / phi


def _ig_d2(phi):
    return -0.5 / (phi * phi)


def _ig_d1_inverse(x: float) -> float:
    if not x > 0.0:
        raise DomainError(f"逆高斯族 d′ 的值域为 (0,∞)，得到 {x}")
    return 0.5 / x


def _ig_g(w):
    return -0.5 / w


def _ig_h(w):
    return -0.5 * np.log(2.0 * np.pi * w**3)


def _ig_sampler(rng: np.random.Generator, phi: float, size: int) -> np.ndarray:
    return rng.wald(mean=1.0, scale=phi, size=size)


INVERSE_GAUSSIAN = MixingFamily(
    tag=FamilyTag.INVERSE_GAUSSIAN,
    name="InverseGaussian",
    nef_name="NIG",
    count_name="PIG",
    xi0=-0.5,
    b2=1.0,
    b3=3.0,
    b4=15.0,
    b=_ig_b,
    d=_ig_d,
    d1=_ig_d1,
    d2=_ig_d2,
    d1_inverse=_ig_d1_inverse,
    d1_lower=0.0,
    g=_ig_g,
    h=_ig_h,
    sampler=_ig_sampler,
)

# endregion


# region 广义双曲正割潜变量（仅累积量）


def _ghs_b(theta):
    # ½·log(1 + tan²θ) = −½·log(cos²θ)
    return -0.5 * np.log(np.cos(theta) ** 2)


GHS = MixingFamily(
    tag=FamilyTag.GHS,
    name="GHS",
    nef_name="NGHS",
    count_name="MP-GHS",
    xi0=-0.75 * np.pi,
    b2=2.0,
    b3=4.0,
    b4=16.0,
    b=_ghs_b,
)

# endregion


FAMILIES: dict[FamilyTag, MixingFamily] = {
    FamilyTag.GAMMA: GAMMA,
    FamilyTag.INVERSE_GAUSSIAN: INVERSE_GAUSSIAN,
    FamilyTag.GHS: GHS,
}


def get_family(tag) -> MixingFamily:
    """按标签（"gamma" / "ig" / "ghs" 或 FamilyTag）取混合族"""
    try:
        return FAMILIES[FamilyTag(tag)]
    except ValueError:
        raise DomainError(f"未知的混合族: {tag}") from None
