# ============================================================================ #
#                         混合泊松计数与随机和                                 #
# ============================================================================ #
"""
混合泊松计数 N_λ（N | W=w ~ Poisson(λw)）与正规化随机和 S̃_λ：
  - mp_pmf: 计数概率（NB 闭式；PIG 混合积分或 Bessel 闭式）
  - mp_moments: (E N_λ, Var N_λ)
  - sample_mp_count: 两阶段精确抽样
  - sample_normalized_sum(s): S̃_λ = (1/√λ)·Σ_{i≤N}(X_i + μ(1/√λ − 1))，N=0 时为 0
  - ks_distance: 样本与 NEF 极限分布的 Kolmogorov 距离
"""
from typing import Optional, Union

import numpy as np
from scipy import stats
from scipy.special import gammaln

from nef_mp.core.context import FamilyTag, MpCountParams, NefParams, SummandSpec, MixingFamily
from nef_mp.core.exceptions import DomainError
from nef_mp.core.nef import mixing_log_pdf, nef_cdf, sample_latent
from nef_mp.core.special import ArrayLike, gig_kernel_mode, integrate_about, log_bessel_k


def _finalize(values: np.ndarray) -> ArrayLike:
    values = np.asarray(values)
    return values.item() if values.ndim == 0 else values


# region 计数概率


def _nb_log_pmf(c: MpCountParams, n: np.ndarray) -> np.ndarray:
    lam, phi = c.lam, c.phi
    return (
        gammaln(n + phi)
        - gammaln(n + 1.0)
        - gammaln(phi)
        + n * np.log(lam / (lam + phi))
        + phi * np.log(phi / (lam + phi))
    )


def _pig_log_pmf_bessel(c: MpCountParams, n: np.ndarray) -> np.ndarray:
    """
    λⁿ/n!·√(2φ/π)·e^φ·(φ/(φ+2λ))^{(n−½)/2}·𝒦_{n−½}(√(φ(φ+2λ)))
    """
    lam, phi = c.lam, c.phi
    order = n - 0.5
    return (
        n * np.log(lam)
        - gammaln(n + 1.0)
        + 0.5 * np.log(2.0 * phi / np.pi)
        + phi
        + 0.5 * order * np.log(phi / (phi + 2.0 * lam))
        + log_bessel_k(order, np.sqrt(phi * (phi + 2.0 * lam)))
    )


def _mixed_log_pmf_quadrature(c: MpCountParams, n: int) -> float:
    """∫ Poisson(n; λw)·f_W(w) dw，在 s = log w 上积分"""
    lam, phi, fam = c.lam, c.phi, c.family

    def log_integrand(s: float) -> float:
        w = np.exp(s)
        if w == 0.0 or not np.isfinite(w):
            return -np.inf
        return n * np.log(lam * w) - lam * w - gammaln(n + 1.0) + mixing_log_pdf(fam, phi, w) + s

    # Gamma: w^{n+φ−1}e^{−(λ+φ)w}；IG: GIG(2λ+φ, φ, n−½)
    if fam.tag == FamilyTag.GAMMA:
        center, scale = gig_kernel_mode(2.0 * (lam + phi), 0.0, n + phi)
    else:
        center, scale = gig_kernel_mode(2.0 * lam + phi, phi, n - 0.5)
    shift = log_integrand(center)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        value = integrate_about(lambda s: np.exp(log_integrand(s) - shift), center, scale)
    return float(np.log(value) + shift)


def mp_log_pmf(c: MpCountParams, n: ArrayLike, method: str = "auto") -> ArrayLike:
    """
    log P(N_λ = n)。

    Args:
        c: 计数参数
        n: 非负整数（标量或数组）
        method: "auto"（NB 闭式，PIG 积分）、"quadrature"（均用混合积分）
            或 "bessel"（PIG 用 Bessel 闭式）
    """
    c.family.require_density("mp_pmf")
    n = np.asarray(n, dtype=float)
    if np.any(n < 0) or np.any(n != np.floor(n)):
        raise DomainError("n 必须为非负整数")
    if method not in ("auto", "quadrature", "bessel"):
        raise DomainError(f"未知的计算方法: {method}")

    if method == "quadrature":
        out = np.vectorize(lambda k: _mixed_log_pmf_quadrature(c, int(k)), otypes=[float])(n)
    elif c.family.tag == FamilyTag.GAMMA:
        out = _nb_log_pmf(c, n)
    elif method == "bessel":
        out = _pig_log_pmf_bessel(c, n)
    else:
        out = np.vectorize(lambda k: _mixed_log_pmf_quadrature(c, int(k)), otypes=[float])(n)
    return _finalize(out)


def mp_pmf(c: MpCountParams, n: ArrayLike, method: str = "auto") -> ArrayLike:
    """P(N_λ = n)，见 mp_log_pmf"""
    return _finalize(np.exp(mp_log_pmf(c, n, method=method)))


def mp_moments(c: MpCountParams) -> tuple[float, float]:
    """(E N_λ, Var N_λ) = (λ, λ + λ²b″(ξ₀)/φ)"""
    return c.lam, c.lam + c.lam**2 * c.family.b2 / c.phi


def pmf_truncation(c: MpCountParams, width: float = 20.0, tol: float = 1e-16) -> int:
    """
    求和截断点：λ + width·sd + 50，再加上几何尾部衰减到 tol 所需的项数。

    NB / PIG 的尾部按 r = λ/(λ − φξ₀) 的几何速率衰减。
    """
    mean, var = mp_moments(c)
    rate = c.lam / (c.lam - c.phi * c.family.xi0)
    extra = np.log(tol) / np.log(rate)
    return int(np.ceil(mean + width * np.sqrt(var) + 50.0 + extra))


# endregion


# region 抽样


def sample_mp_count(
    c: MpCountParams, rng: np.random.Generator, size: Optional[int] = None
) -> Union[int, np.ndarray]:
    """先抽 W，再抽 Poisson(λW)；size=None 时返回单个整数"""
    n = 1 if size is None else size
    w = sample_latent(c.family, c.phi, n, rng)
    counts = rng.poisson(c.lam * w)
    return int(counts[0]) if size is None else counts


def _normalize(total: ArrayLike, count: ArrayLike, lam: float, mu: float) -> ArrayLike:
    scale = 1.0 / np.sqrt(lam)
    return scale * (total + count * mu * (scale - 1.0))


def sample_normalized_sum(c: MpCountParams, s: SummandSpec, rng: np.random.Generator) -> float:
    """单个 S̃_λ；N=0 时返回 0"""
    count = sample_mp_count(c, rng)
    if count == 0:
        return 0.0
    x = s.draw(rng, count)
    return float(_normalize(np.sum(x), count, c.lam, s.mu))


def sample_normalized_sums(
    c: MpCountParams, s: SummandSpec, size: int, rng: np.random.Generator
) -> np.ndarray:
    """size 个独立 S̃_λ（向量化：先抽全部计数，再一次抽取全部被加项）"""
    if size < 1:
        raise DomainError(f"重复次数必须至少为 1，得到 {size}")
    counts = sample_mp_count(c, rng, size=size)
    x = s.draw(rng, int(counts.sum()))
    owners = np.repeat(np.arange(size), counts)
    totals = np.bincount(owners, weights=x, minlength=size)
    return np.where(counts == 0, 0.0, _normalize(totals, counts, c.lam, s.mu))


# endregion


def ks_distance(sample: ArrayLike, p: NefParams, fam: MixingFamily) -> float:
    """经验分布与 NEF 分布函数之间的 Kolmogorov 距离"""
    sample = np.asarray(sample, dtype=float).ravel()
    if sample.size == 0:
        raise DomainError("样本不能为空")
    result = stats.kstest(sample, lambda x: nef_cdf(p, fam, x))
    return float(result.statistic)
