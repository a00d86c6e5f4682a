# ============================================================================ #
#                              特殊函数                                        #
# ============================================================================ #
"""
数值稳健的特殊函数：
  - log_bessel_k: 第三类修正 Bessel 函数 𝒦_ν(x) 的对数
  - dlog_bessel_k_dorder / d2log_bessel_k_dorder2: 对阶数 ν 的一、二阶导数
  - gig_log_normalizer / gig_moment / gig_log_moment_stats: GIG 核的归一化常数与矩

GIG 核为 u^(p−1)·exp{−½(a·u + b/u)}，u > 0。
所有函数均为纯函数，可在多线程中并发调用。
带 GigParams 参数的函数为标量接口；log_gig_normalizer / gig_power_moment /
gig_log_stats 为逐元素广播的数组接口，供 E 步等向量化计算使用。
"""
import logging
from typing import Callable, Union

import numpy as np
from scipy.integrate import quad
from scipy.special import digamma, gammaln, kve, polygamma

from nef_mp.core.context import GigParams
from nef_mp.core.exceptions import DomainError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

LOG2 = np.log(2.0)

# Debye 一致渐近展开的适用阶数下限
DEBYE_MIN_ORDER = 50.0

# 阶数导数的差分步长
DORDER_STEP = 1e-6
D2ORDER_STEP = 1e-3


def _finalize(values: np.ndarray) -> ArrayLike:
    """0 维结果返回 float，其余原样返回数组"""
    values = np.asarray(values)
    return float(values) if values.ndim == 0 else values


def _check_bessel_args(order, arg) -> tuple[np.ndarray, np.ndarray]:
    order = np.asarray(order, dtype=float)
    arg = np.asarray(arg, dtype=float)
    if not (np.all(np.isfinite(order)) and np.all(np.isfinite(arg))):
        raise DomainError("Bessel 函数的阶数与自变量必须为有限值")
    if np.any(arg <= 0):
        raise DomainError("Bessel 函数自变量必须大于 0")
    return np.broadcast_arrays(order, arg)


# region log 𝒦_ν(x)


def _log_bessel_k_small_arg(v: float, x: float) -> float:
    """小自变量渐近式：𝒦_v(x) ≈ Γ(v)/2·(2/x)^v，v≈0 时 𝒦₀(x) ≈ −log(x/2) − γ"""
    if v > 1e-10:
        return gammaln(v) - LOG2 + v * (LOG2 - np.log(x))
    inner = max(-np.log(x / 2.0) - np.euler_gamma, np.finfo(float).tiny)
    return float(np.log(inner))


def _log_bessel_k_debye(v: np.ndarray, x: np.ndarray) -> np.ndarray:
    """大阶数 Debye 一致渐近展开（取四项修正）"""
    z = x / v
    sq = np.sqrt(1.0 + z * z)
    t = 1.0 / sq
    t2 = t * t
    eta = sq + np.log(z / (1.0 + sq))
    u1 = t * (3.0 - 5.0 * t2) / 24.0
    u2 = t2 * (81.0 - 462.0 * t2 + 385.0 * t2**2) / 1152.0
    u3 = t**3 * (30375.0 - 369603.0 * t2 + 765765.0 * t2**2 - 425425.0 * t2**3) / 414720.0
    u4 = t2**2 * (
        4465125.0
        - 94121676.0 * t2
        + 349922430.0 * t2**2
        - 446185740.0 * t2**3
        + 185910725.0 * t2**4
    ) / 39813120.0
    series = 1.0 - u1 / v + u2 / v**2 - u3 / v**3 + u4 / v**4
    return 0.5 * np.log(np.pi / (2.0 * v)) - v * eta - 0.25 * np.log1p(z * z) + np.log(series)


def _log_bessel_k_recurrence(v: float, x: float) -> float:
    """
    比值形式的前向递推：r_ν = 𝒦_{ν+1}/𝒦_ν 满足 r_ν = 1/r_{ν−1} + 2ν/x。
    起点 ν₀ = v − ⌊v⌋ ∈ [0, 1)。
    """
    nu0 = v - np.floor(v)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        l0 = np.log(kve(nu0, x)) - x
        l1 = np.log(kve(nu0 + 1.0, x)) - x
    if not (np.isfinite(l0) and np.isfinite(l1)):
        return _log_bessel_k_small_arg(v, x)
    if v < nu0 + 0.5:
        return float(l0)

    result = l1
    ratio = np.exp(l1 - l0)
    nuk = nu0 + 1.0
    while nuk < v - 0.5:
        ratio = 1.0 / ratio + 2.0 * nuk / x
        result += np.log(ratio)
        nuk += 1.0
    return float(result)


def _log_kve(order: np.ndarray, arg: np.ndarray) -> np.ndarray:
    """log(𝒦_ν(x)·eˣ)，对阶数取绝对值（𝒦 关于阶数对称）"""
    v = np.abs(order)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        result = np.log(kve(v, arg))

    bad = ~np.isfinite(result)
    if np.any(bad):
        v_bad, x_bad = v[bad], arg[bad]
        fixed = np.empty_like(v_bad)
        large = v_bad > DEBYE_MIN_ORDER
        if np.any(large):
            fixed[large] = _log_bessel_k_debye(v_bad[large], x_bad[large])
        for i in np.flatnonzero(~large):
            fixed[i] = _log_bessel_k_recurrence(v_bad[i], x_bad[i])
        result = np.array(result, dtype=float)
        result[bad] = fixed + x_bad
    return result


def log_bessel_k(order: ArrayLike, arg: ArrayLike) -> ArrayLike:
    """
    log 𝒦_order(arg)，逐元素广播。

    主路径为 scipy 指数缩放的 kve；溢出时按阶数回退到 Debye 展开
    （|ν| > 50）或比值递推。

    Args:
        order: 阶数，任意实数
        arg: 自变量，必须大于 0

    Returns:
        log 𝒦_order(arg)

    Raises:
        DomainError: arg ≤ 0 或输入非有限
    """
    order, arg = _check_bessel_args(order, arg)
    return _finalize(_log_kve(order, arg) - arg)


def dlog_bessel_k_dorder(order: ArrayLike, arg: ArrayLike) -> ArrayLike:
    """∂/∂ν log 𝒦_ν(arg) 在 ν=order 处的值（中心差分，步长 10⁻⁶·max(1,|ν|)）"""
    order, arg = _check_bessel_args(order, arg)
    h = DORDER_STEP * np.maximum(1.0, np.abs(order))
    return _finalize((_log_kve(order + h, arg) - _log_kve(order - h, arg)) / (2.0 * h))


def d2log_bessel_k_dorder2(order: ArrayLike, arg: ArrayLike) -> ArrayLike:
    """∂²/∂ν² log 𝒦_ν(arg)（五点差分）"""
    order, arg = _check_bessel_args(order, arg)
    h = D2ORDER_STEP * np.maximum(1.0, np.abs(order))
    f = lambda k: _log_kve(order + k * h, arg)  # noqa: E731
    numer = -f(2) + 16.0 * f(1) - 30.0 * f(0) + 16.0 * f(-1) - f(-2)
    return _finalize(numer / (12.0 * h * h))


# endregion


# region 众数附近分段积分


def integrate_about(
    func: Callable[[float], float],
    center: float,
    scale: float,
    width: float = 12.0,
) -> float:
    """
    在 (−∞, ∞) 上积分，以 center ± width·scale 为分段点。

    被积函数应已在 center 处归一到 O(1) 量级。
    """
    lo = center - width * scale
    hi = center + width * scale
    opts = dict(limit=200, epsabs=1e-14 * scale, epsrel=1e-12)
    core = quad(func, lo, hi, **opts)[0]
    left = quad(func, -np.inf, lo, **opts)[0]
    right = quad(func, hi, np.inf, **opts)[0]
    return left + core + right


def gig_kernel_mode(a: float, b: float, q: float) -> tuple[float, float]:
    """
    s = log u 下 GIG 核 exp(q·s − ½(a·eˢ + b·e⁻ˢ)) 的众数与曲率尺度。

    Returns:
        (s*, 1/√曲率)
    """
    root = np.sqrt(q * q + a * b)
    if q >= 0:
        u_star = (q + root) / a
    else:
        u_star = b / (root - q)
    curvature = 0.5 * (a * u_star + b / u_star)
    return float(np.log(u_star)), float(1.0 / np.sqrt(curvature))


def _gig_kernel_integral(a: float, b: float, q: float, log_power: int = 0) -> tuple[float, float]:
    """
    ∫ sᴸ·exp(q·s − ½(a·eˢ + b·e⁻ˢ)) ds 的数值积分。

    Returns:
        (缩放后的积分值, 对数缩放量)，积分 = 值 × exp(缩放量)
    """
    s_star, scale = gig_kernel_mode(a, b, q)

    def log_kernel(s: float) -> float:
        value = q * s - 0.5 * a * np.exp(s)
        if b > 0:
            value -= 0.5 * b * np.exp(-s)
        return value

    shift = log_kernel(s_star)

    def integrand(s: float) -> float:
        value = np.exp(log_kernel(s) - shift)
        return value * s**log_power if log_power else value

    with np.errstate(over="ignore", invalid="ignore"):
        return integrate_about(integrand, s_star, scale), shift


# endregion


# region GIG 归一化常数与矩（数组接口）


def log_gig_normalizer(a: ArrayLike, b: ArrayLike, p: ArrayLike) -> ArrayLike:
    """
    log ∫₀^∞ u^(p−1)·exp{−½(au + b/u)} du，逐元素。

    b>0: log 2 + (p/2)·log(b/a) + log 𝒦_p(√(ab))；
    b=0: Gamma 极限 log Γ(p) + p·log(2/a)，p ≤ 0 时积分发散返回 +inf。
    """
    a, b, p = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a, b, p)))
    out = np.empty(a.shape, dtype=float)
    pos = b > 0
    if np.any(pos):
        ap, bp, pp = a[pos], b[pos], p[pos]
        out[pos] = LOG2 + 0.5 * pp * np.log(bp / ap) + log_bessel_k(pp, np.sqrt(ap * bp))
    zero = ~pos
    if np.any(zero):
        az, pz = a[zero], p[zero]
        with np.errstate(invalid="ignore"):
            out[zero] = np.where(pz > 0, gammaln(np.abs(pz)) + pz * np.log(2.0 / az), np.inf)
    return _finalize(out)


def gig_power_moment(a: ArrayLike, b: ArrayLike, p: ArrayLike, k: float) -> ArrayLike:
    """
    E[U^k]，U ~ GIG(a, b, p)，逐元素。

    b>0: (b/a)^{k/2}·𝒦_{p+k}(√(ab))/𝒦_p(√(ab))；
    b=0: Γ(p+k)/Γ(p)·(2/a)^k，p+k ≤ 0 时矩不存在返回 +inf。
    """
    a, b, p = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a, b, p)))
    out = np.empty(a.shape, dtype=float)
    pos = b > 0
    if np.any(pos):
        ap, bp, pp = a[pos], b[pos], p[pos]
        x = np.sqrt(ap * bp)
        out[pos] = np.exp(
            0.5 * k * np.log(bp / ap) + log_bessel_k(pp + k, x) - log_bessel_k(pp, x)
        )
    zero = ~pos
    if np.any(zero):
        az, pz = a[zero], p[zero]
        exists = pz + k > 0
        with np.errstate(invalid="ignore"):
            vals = np.exp(
                gammaln(np.abs(pz + k)) - gammaln(np.abs(pz)) + k * np.log(2.0 / az)
            )
        out[zero] = np.where(exists, vals, np.inf)
    return _finalize(out)


def gig_log_stats(a: ArrayLike, b: ArrayLike, p: ArrayLike) -> tuple[ArrayLike, ArrayLike]:
    """
    (E[log U], Var[log U])，U ~ GIG(a, b, p)，逐元素。

    log 归一化常数关于 p 的一、二阶导数：
    b>0: ½log(b/a) + ∂ₚlog𝒦ₚ(√(ab))，∂²ₚlog𝒦ₚ(√(ab))；
    b=0: ψ(p) + log(2/a)，ψ₁(p)。
    """
    a, b, p = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a, b, p)))
    mean = np.empty(a.shape, dtype=float)
    var = np.empty(a.shape, dtype=float)
    pos = b > 0
    if np.any(pos):
        ap, bp, pp = a[pos], b[pos], p[pos]
        x = np.sqrt(ap * bp)
        mean[pos] = 0.5 * np.log(bp / ap) + dlog_bessel_k_dorder(pp, x)
        var[pos] = d2log_bessel_k_dorder2(pp, x)
    zero = ~pos
    if np.any(zero):
        az, pz = a[zero], p[zero]
        proper = pz > 0
        with np.errstate(invalid="ignore"):
            mean[zero] = np.where(proper, digamma(np.abs(pz)) + np.log(2.0 / az), -np.inf)
            var[zero] = np.where(proper, polygamma(1, np.abs(pz)), np.inf)
    return _finalize(mean), _finalize(var)


# endregion


# region GIG 归一化常数与矩（GigParams 接口）


def gig_log_normalizer(g: GigParams, method: str = "closed") -> float:
    """
    GIG 核的对数归一化常数。

    Args:
        g: GIG 参数
        method: "closed"（Bessel / Gamma 闭式）或 "quadrature"（数值积分）
    """
    if method == "quadrature":
        value, shift = _gig_kernel_integral(g.a, g.b, g.p)
        return float(np.log(value) + shift)
    if method != "closed":
        raise DomainError(f"未知的计算方法: {method}")
    return float(log_gig_normalizer(g.a, g.b, g.p))


def gig_moment(g: GigParams, power_k: int, log_power_l: int = 0, method: str = "auto") -> float:
    """
    E[U^K·(log U)^L]，U ~ GIG(a, b, p)。

    Args:
        g: GIG 参数
        power_k: 幂次 K（整数）
        log_power_l: 对数幂次 L ≥ 0
        method: "auto"（L=0 用 Bessel 比值闭式，L≥1 用积分）或 "quadrature"

    Raises:
        DomainError: 矩不存在（b=0 且 p+K ≤ 0）或参数非法
    """
    if int(power_k) != power_k or int(log_power_l) != log_power_l or log_power_l < 0:
        raise DomainError("K 必须为整数，L 必须为非负整数")
    power_k, log_power_l = int(power_k), int(log_power_l)
    if g.b == 0 and g.p + power_k <= 0:
        raise DomainError(f"b=0 时 E[U^{power_k}] 要求 p+K>0，得到 p={g.p}")

    if method == "auto" and log_power_l == 0:
        return float(gig_power_moment(g.a, g.b, g.p, power_k))
    if method not in ("auto", "quadrature"):
        raise DomainError(f"未知的计算方法: {method}")

    num, num_shift = _gig_kernel_integral(g.a, g.b, g.p + power_k, log_power_l)
    den, den_shift = _gig_kernel_integral(g.a, g.b, g.p)
    return float(num / den * np.exp(num_shift - den_shift))


def gig_log_moment_stats(g: GigParams) -> tuple[float, float]:
    """(E[log U], Var[log U])，由阶数导数闭式给出"""
    mean, var = gig_log_stats(g.a, g.b, g.p)
    return float(mean), float(var)


# endregion
