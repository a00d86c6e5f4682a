# ============================================================================ #
#                          NEF 分布族核心函数                                  #
# ============================================================================ #
"""
正态-指数族 (NEF) 分布 Y = μW + σ√W·Z 的核心运算：
  - mixing_pdf / mixing_cf / mixing_mgf: 潜变量 W_φ 的密度与特征函数
  - nef_cf / nef_pdf / nef_log_pdf / nef_cdf: NEF 分布的特征函数、密度、分布函数
  - nef_cumulants / nef_skew_kurt / nef_kurtosis_ratio / nef_raw_moments: 累积量与矩
  - sample_latent / sample_nef: 按随机表示精确抽样
  - posterior_gig_params / posterior_expectation_quad: W | Y=y 的后验（GIG 核）
  - asymmetric_laplace_pdf / nef_to_nig_classical: 子模型与经典参数化

密度闭式：Gamma 潜变量为正态-伽马 (NG)，含 𝒦_{φ−½}；逆高斯潜变量为 NIG，含 𝒦₋₁。
GHS 潜变量仅支持累积量相关运算。
"""
import logging
from typing import Callable

import numpy as np
from scipy.integrate import quad

from nef_mp.core.context import FamilyTag, MixingFamily, NefParams
from nef_mp.core.exceptions import DomainError
from nef_mp.core.special import (
    ArrayLike,
    gig_kernel_mode,
    integrate_about,
    log_gig_normalizer,
)

logger = logging.getLogger(__name__)

# |y| < 该系数·√κ2 时 Gamma 族密度改用积分（Bessel 小自变量奇异）
SMALL_Y_FACTOR = 1e-6

# 分布函数与归一化检查的积分半宽（单位 √κ2）
TAIL_WIDTH = 40.0


def _finalize(values: np.ndarray) -> ArrayLike:
    values = np.asarray(values)
    return values.item() if values.ndim == 0 else values


# region 潜变量 W_φ


def mixing_log_pdf(fam: MixingFamily, phi: float, w: ArrayLike) -> ArrayLike:
    """log f_W(w) = φ[wξ₀ − b(ξ₀)] + d(φ) + φg(w) + h(w)"""
    fam.require_density("mixing_pdf")
    if not phi > 0:
        raise DomainError(f"phi 必须大于 0，得到 {phi}")
    w = np.asarray(w, dtype=float)
    if np.any(w <= 0):
        raise DomainError("w 必须大于 0")
    return _finalize(phi * (w * fam.xi0 - fam.b_xi0) + fam.d(phi) + phi * fam.g(w) + fam.h(w))


def mixing_pdf(fam: MixingFamily, phi: float, w: ArrayLike) -> ArrayLike:
    """潜变量 W_φ 的密度（单位均值指数族）"""
    return _finalize(np.exp(mixing_log_pdf(fam, phi, w)))


def mixing_mgf(fam: MixingFamily, phi: float, s: ArrayLike) -> ArrayLike:
    """E[exp(sW)] = exp{−φ[b(ξ₀) − b(ξ₀ + s/φ)]}，s 可为复数（主值分支）"""
    s = np.asarray(s, dtype=complex)
    theta = fam.xi0 + s / phi
    return _finalize(np.exp(-phi * (fam.b_xi0 - fam.b(theta))))


def mixing_cf(fam: MixingFamily, phi: float, t: ArrayLike) -> ArrayLike:
    """W_φ 的特征函数 exp{−φ[b(ξ₀) − b(ξ₀ + it/φ)]}"""
    return mixing_mgf(fam, phi, 1j * np.asarray(t, dtype=float))


def sample_latent(fam: MixingFamily, phi: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """抽取 n 个 W_φ：Gamma(形状 φ, 速率 φ) 或 IG(均值 1, 形状 φ)"""
    fam.require_density("sample_latent")
    if n < 0:
        raise DomainError(f"样本量必须非负，得到 {n}")
    return fam.sampler(rng, phi, n)


# endregion


# region 特征函数


def nef_exponent(p: NefParams, t: ArrayLike) -> ArrayLike:
    """条件正态的指数 itμ − t²σ²/2"""
    t = np.asarray(t, dtype=float)
    return 1j * t * p.mu - 0.5 * t * t * p.sigma2


def nef_cf(p: NefParams, fam: MixingFamily, t: ArrayLike) -> ArrayLike:
    """
    NEF 特征函数 exp{−φ[b(ξ₀) − b(ξ₀ + φ⁻¹(itμ − t²σ²/2))]}。

    即潜变量矩母函数在复自变量 itμ − t²σ²/2 处的值。
    """
    return mixing_mgf(fam, p.phi, nef_exponent(p, t))


# endregion


# region 后验 GIG 核


def posterior_gig_params(
    p: NefParams, fam: MixingFamily, y: ArrayLike
) -> tuple[np.ndarray, np.ndarray, float]:
    """
    W | Y=y 的后验核 u^(p−1)·exp{−½(a·u + b/u)} 参数。

    Gamma: a = μ²/σ² + 2φ, b = y²/σ², p = φ − ½
    IG:    a = μ²/σ² + φ,  b = y²/σ² + φ, p = −1

    Returns:
        (a, b, p)，a 与 b 与 y 同形
    """
    fam.require_density("posterior_gig_params")
    y = np.asarray(y, dtype=float)
    base = p.mu * p.mu / p.sigma2
    b = y * y / p.sigma2
    if fam.tag == FamilyTag.GAMMA:
        a = np.full_like(b, base + 2.0 * p.phi)
        return a, b, p.phi - 0.5
    a = np.full_like(b, base + p.phi)
    return a, b + p.phi, -1.0


def _log_density_constant(p: NefParams, fam: MixingFamily, y: np.ndarray) -> np.ndarray:
    """log f(y) 中与后验归一化常数无关的部分"""
    const = (
        -0.5 * np.log(2.0 * np.pi * p.sigma2)
        + y * p.mu / p.sigma2
        + fam.d(p.phi)
        - p.phi * fam.b_xi0
    )
    if fam.tag == FamilyTag.INVERSE_GAUSSIAN:
        const = const - 0.5 * np.log(2.0 * np.pi)
    return const


def _mixture_log_integrand(p: NefParams, fam: MixingFamily, y: float) -> Callable[[float], float]:
    """s = log w 下混合积分 normal(y; μw, σ²w)·f_W(w)·w 的对数被积函数"""
    log_phi_part = fam.d(p.phi) - p.phi * fam.b_xi0

    def log_integrand(s: float) -> float:
        w = np.exp(s)
        if w == 0.0 or not np.isfinite(w):
            return -np.inf
        log_normal = -0.5 * np.log(2.0 * np.pi * p.sigma2 * w) - (y - p.mu * w) ** 2 / (
            2.0 * p.sigma2 * w
        )
        log_mix = p.phi * w * fam.xi0 + log_phi_part + p.phi * fam.g(w) + fam.h(w)
        return log_normal + log_mix + s

    return log_integrand


def _mixture_scale(p: NefParams, fam: MixingFamily, y: float) -> tuple[float, float]:
    a, b, q = posterior_gig_params(p, fam, y)
    a, b = float(a), float(b)
    if b == 0.0 and q <= 0.0:
        # 后验不可积；以 y 附近的正 b 给出积分分段位置
        b = (SMALL_Y_FACTOR * np.sqrt(p.sigma2)) ** 2 / p.sigma2
    return gig_kernel_mode(a, b, q)


def posterior_expectation_quad(
    p: NefParams,
    fam: MixingFamily,
    y: float,
    func: Callable[[np.ndarray], np.ndarray],
) -> float:
    """
    E[func(W) | Y=y]，对混合积分直接做数值积分（不使用 Bessel 函数）。

    用作 E 步闭式的核对基准，以及 y≈0 时的回退计算。
    """
    log_integrand = _mixture_log_integrand(p, fam, y)
    center, scale = _mixture_scale(p, fam, y)
    shift = log_integrand(center)

    def weight(s: float) -> float:
        return np.exp(log_integrand(s) - shift)

    def weighted(s: float) -> float:
        wt = weight(s)
        return wt * float(func(np.exp(s))) if wt > 0 else 0.0

    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        den = integrate_about(weight, center, scale)
        num = integrate_about(weighted, center, scale)
    return float(num / den)


def _log_pdf_quadrature(p: NefParams, fam: MixingFamily, y: float) -> float:
    if fam.tag == FamilyTag.GAMMA and y == 0.0 and p.phi <= 0.5:
        # 后验核在 0 附近不可积，密度在 y=0 处发散
        return np.inf
    log_integrand = _mixture_log_integrand(p, fam, y)
    center, scale = _mixture_scale(p, fam, y)
    shift = log_integrand(center)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        value = integrate_about(lambda s: np.exp(log_integrand(s) - shift), center, scale)
    return float(np.log(value) + shift)


# endregion


# region 密度


def nef_log_pdf(p: NefParams, fam: MixingFamily, y: ArrayLike, method: str = "auto") -> ArrayLike:
    """
    log f(y)，全程对数尺度计算。

    Args:
        p: NEF 参数
        fam: 混合族（GHS 不支持）
        y: 观测值，标量或数组
        method: "auto"（闭式，Gamma 族 |y| < 10⁻⁶·√κ2 时改用积分）
            或 "quadrature"（全部用混合积分）

    Raises:
        UnsupportedFamilyError: GHS 族
    """
    fam.require_density("nef_pdf")
    y = np.asarray(y, dtype=float)
    if method == "quadrature":
        out = np.vectorize(lambda v: _log_pdf_quadrature(p, fam, v), otypes=[float])(y)
        return _finalize(out)
    if method != "auto":
        raise DomainError(f"未知的计算方法: {method}")

    a, b, q = posterior_gig_params(p, fam, y)
    small = np.zeros(y.shape, dtype=bool)
    if fam.tag == FamilyTag.GAMMA:
        kappa2 = nef_cumulants(p, fam)[1]
        small = np.abs(y) < SMALL_Y_FACTOR * np.sqrt(kappa2)

    out = np.empty(y.shape, dtype=float)
    regular = ~small
    if np.any(regular):
        out[regular] = _log_density_constant(p, fam, y[regular]) + log_gig_normalizer(
            a[regular], b[regular], q
        )
    if np.any(small):
        logger.debug("|y| 过小，%d 个点改用混合积分计算密度", int(np.sum(small)))
        out[small] = [_log_pdf_quadrature(p, fam, float(v)) for v in y[small]]
    return _finalize(out)


def nef_pdf(p: NefParams, fam: MixingFamily, y: ArrayLike, method: str = "auto") -> ArrayLike:
    """NEF 密度，见 nef_log_pdf"""
    return _finalize(np.exp(nef_log_pdf(p, fam, y, method=method)))


def nef_cdf(p: NefParams, fam: MixingFamily, x: ArrayLike) -> ArrayLike:
    """
    分布函数，对密度做分段自适应积分。

    从 μ − 40√κ2 起，按 x 排序后逐段累加；Gamma 族 φ<½ 时 0 处的可积奇点作为分段点。
    """
    fam.require_density("nef_cdf")
    x = np.asarray(x, dtype=float)
    flat = x.ravel()
    order = np.argsort(flat)
    kappa2 = nef_cumulants(p, fam)[1]
    start = min(p.mu - TAIL_WIDTH * np.sqrt(kappa2), float(flat.min()) if flat.size else 0.0)

    pdf = lambda v: float(nef_pdf(p, fam, v))  # noqa: E731
    cdf = np.empty(flat.shape, dtype=float)
    total, prev = 0.0, start
    for idx in order:
        cur = flat[idx]
        if cur > prev:
            points = [0.0] if prev < 0.0 < cur else None
            total += quad(pdf, prev, cur, points=points, limit=200, epsabs=1e-13)[0]
            prev = cur
        cdf[idx] = total
    return _finalize(np.clip(cdf, 0.0, 1.0).reshape(x.shape))


def asymmetric_laplace_pdf(mu: float, sigma2: float, y: ArrayLike) -> ArrayLike:
    """
    非对称 Laplace 密度（NG 在 φ=1 时的子模型）。

    κ = (√(2σ²+μ²) − μ)/(√2·σ)；
    f(y) = (√2/σ)·κ/(1+κ²)·exp(−√2κy/σ)（y ≥ 0），exp(√2y/(σκ))（y < 0）。
    """
    y = np.asarray(y, dtype=float)
    sigma = np.sqrt(sigma2)
    kappa = (np.sqrt(2.0 * sigma2 + mu * mu) - mu) / (np.sqrt(2.0) * sigma)
    scale = np.sqrt(2.0) / sigma * kappa / (1.0 + kappa * kappa)
    expo = np.where(y >= 0, -np.sqrt(2.0) * kappa * y / sigma, np.sqrt(2.0) * y / (sigma * kappa))
    return _finalize(scale * np.exp(expo))


def nef_to_nig_classical(p: NefParams) -> dict[str, float]:
    """NIG(μ,σ²,φ) 的经典参数 (α, β, 位置=0, δ)"""
    alpha = np.sqrt(p.phi / p.sigma2 + p.mu**2 / p.sigma2**2)
    return {
        "alpha": float(alpha),
        "beta": float(p.mu / p.sigma2),
        "location": 0.0,
        "delta": float(np.sqrt(p.phi * p.sigma2)),
    }


# endregion


# region 累积量与矩


def nef_cumulants(p: NefParams, fam: MixingFamily) -> tuple[float, float, float, float]:
    """前四阶累积量 (κ1, κ2, κ3, κ4)，适用于全部三种混合族"""
    mu, s2, phi = p.mu, p.sigma2, p.phi
    k1 = mu
    k2 = (mu**2 * fam.b2 + phi * s2) / phi
    k3 = (mu**3 * fam.b3 + 3.0 * phi * s2 * mu * fam.b2) / phi**2
    k4 = (
        mu**4 * fam.b4 + 6.0 * phi * s2 * mu**2 * fam.b3 + 3.0 * phi**2 * s2**2 * fam.b2
    ) / phi**3
    return float(k1), float(k2), float(k3), float(k4)


def nef_skew_kurt(p: NefParams, fam: MixingFamily) -> tuple[float, float]:
    """(偏度 β1 = κ3/κ2^{3/2}, 超额峰度 β2 = κ4/κ2² − 3)"""
    _, k2, k3, k4 = nef_cumulants(p, fam)
    return k3 / k2**1.5, k4 / k2**2 - 3.0


def nef_kurtosis_ratio(p: NefParams, fam: MixingFamily) -> float:
    """不减 3 的峰度比 κ4/κ2²"""
    _, k2, _, k4 = nef_cumulants(p, fam)
    return k4 / k2**2


def nef_raw_moments(p: NefParams, fam: MixingFamily) -> tuple[float, float, float]:
    """原点矩 (μ1, μ2, μ3)"""
    k1, k2, k3, _ = nef_cumulants(p, fam)
    m1 = k1
    m2 = k2 + m1**2
    m3 = k3 + 3.0 * m1 * m2 - 2.0 * m1**3
    return m1, m2, m3


# endregion


# region 抽样


def sample_nef(p: NefParams, fam: MixingFamily, n: int, rng: np.random.Generator) -> np.ndarray:
    """
    按随机表示 Y = μW + σ√W·Z 抽取 n 个样本。

    先抽 W，再抽 Z；给定 rng 状态时结果确定。
    """
    if n < 1:
        raise DomainError(f"样本量必须至少为 1，得到 {n}")
    w = sample_latent(fam, p.phi, n, rng)
    z = rng.standard_normal(n)
    return p.mu * w + np.sqrt(p.sigma2 * w) * z


# endregion
