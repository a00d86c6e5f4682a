# ============================================================================ #
#                          MP-稳定特征函数                                     #
# ============================================================================ #
"""
MP-稳定律的特征函数：
  - stable_log_cf: 内置 α-稳定输入的解析 log Ψ(t)
  - mp_stable_cf: exp{−φ[b(ξ₀) − b(ξ₀ + φ⁻¹·log Ψ(t))]}
  - nb_stable_symmetric_cf / nb_stable_symmetric_pdf: 对称输入下的 NB-稳定律（α=2 有 Bessel 密度）
  - pig_stable_symmetric_cf: 对称输入下的 PIG-稳定律
  - fourier_inversion_pdf: 特征函数数值反演（密度核对基准）

log Ψ 由 StableCfSpec 解析给出，不对数值 Ψ 取复对数。
"""
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.special import gammaln

from nef_mp.core.context import MixingFamily, NefParams, StableCfSpec, StableKind
from nef_mp.core.exceptions import DomainError
from nef_mp.core.nef import mixing_mgf
from nef_mp.core.special import ArrayLike, log_bessel_k


def _finalize(values: np.ndarray) -> ArrayLike:
    values = np.asarray(values)
    return values.item() if values.ndim == 0 else values


def stable_log_cf(psi: StableCfSpec, t: ArrayLike) -> ArrayLike:
    """log Ψ(t)：−c|t|^α 或 itμ − σ²t²/2"""
    t = np.asarray(t, dtype=float)
    if psi.kind == StableKind.SYMMETRIC_ALPHA_STABLE:
        return _finalize((-psi.c * np.abs(t) ** psi.alpha).astype(complex))
    return _finalize(1j * t * psi.mu - 0.5 * psi.sigma2 * t * t)


def mp_stable_cf(fam: MixingFamily, phi: float, psi: StableCfSpec, t: ArrayLike) -> ArrayLike:
    """
    MP-稳定特征函数 exp{−φ[b(ξ₀) − b(ξ₀ + φ⁻¹·log Ψ(t))]}。

    Raises:
        UnsupportedFamilyError: GHS 族
    """
    fam.require_density("mp_stable_cf")
    if not phi > 0:
        raise DomainError(f"phi 必须大于 0，得到 {phi}")
    return mixing_mgf(fam, phi, stable_log_cf(psi, t))


def nb_stable_symmetric_cf(c: float, phi: float, t: ArrayLike, alpha: float = 2.0) -> ArrayLike:
    """(1 + (c/φ)|t|^α)^{−φ}"""
    t = np.asarray(t, dtype=float)
    return _finalize((1.0 + (c / phi) * np.abs(t) ** alpha) ** (-phi))


def nb_stable_symmetric_pdf(c: float, phi: float, y: ArrayLike) -> ArrayLike:
    """
    α=2 时 NB-稳定律的密度：

        (φ/c)^{φ/2+¼}·2^{½−φ}·𝒦_{φ−½}(|y|√(φ/c))·|y|^{φ−½} / (√π·Γ(φ))

    与 NG(0, 2c, φ) 相同。y=0 处取极限 √(φ/c)·Γ(φ−½)/(2√π·Γ(φ))，φ ≤ ½ 时发散。
    """
    if not (c > 0 and phi > 0):
        raise DomainError(f"要求 c>0 且 phi>0，得到 c={c}, phi={phi}")
    y = np.abs(np.asarray(y, dtype=float))
    out = np.empty(y.shape, dtype=float)
    pos = y > 0
    if np.any(pos):
        yp = y[pos]
        log_f = (
            (0.5 * phi + 0.25) * np.log(phi / c)
            + (0.5 - phi) * np.log(2.0)
            + log_bessel_k(phi - 0.5, yp * np.sqrt(phi / c))
            + (phi - 0.5) * np.log(yp)
            - 0.5 * np.log(np.pi)
            - gammaln(phi)
        )
        out[pos] = np.exp(log_f)
    if np.any(~pos):
        if phi > 0.5:
            limit = np.exp(
                0.5 * np.log(phi / c) + gammaln(phi - 0.5) - np.log(2.0 * np.sqrt(np.pi)) - gammaln(phi)
            )
        else:
            limit = np.inf
        out[~pos] = limit
    return _finalize(out)


def pig_stable_symmetric_cf(c: float, phi: float, t: ArrayLike, alpha: float = 2.0) -> ArrayLike:
    """exp{φ(1 − √(1 + 2(c/φ)|t|^α))}，PIG 计数下对称稳定输入的极限特征函数"""
    t = np.asarray(t, dtype=float)
    return _finalize(np.exp(phi * (1.0 - np.sqrt(1.0 + 2.0 * (c / phi) * np.abs(t) ** alpha))))


def nb_stable_as_nef(c: float, phi: float) -> NefParams:
    """α=2 的 NB-稳定律即 NG(0, 2c, φ)"""
    return NefParams(mu=0.0, sigma2=2.0 * c, phi=phi)


def fourier_inversion_pdf(cf: Callable[[np.ndarray], np.ndarray], y: float) -> float:
    """
    f(y) = (1/π)∫₀^∞ Re(e^{−ity}ψ(t)) dt
         = (1/π)∫₀^∞ [Re ψ(t)·cos(ty) + Im ψ(t)·sin(ty)] dt

    y ≠ 0 时使用 QUADPACK 的 Fourier 权函数积分。
    """
    re = lambda t: float(np.real(cf(t)))  # noqa: E731
    im = lambda t: float(np.imag(cf(t)))  # noqa: E731
    if y == 0.0:
        return quad(re, 0.0, np.inf, limit=500, epsabs=1e-13)[0] / np.pi
    w = abs(y)
    sign = 1.0 if y > 0 else -1.0
    cos_part = quad(re, 0.0, np.inf, weight="cos", wvar=w, limlst=200)[0]
    sin_part = quad(im, 0.0, np.inf, weight="sin", wvar=w, limlst=200)[0]
    return (cos_part + sign * sin_part) / np.pi
