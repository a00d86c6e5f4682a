# ============================================================================ #
#                              参数估计                                        #
# ============================================================================ #
"""
NEF 分布的参数估计：
  - method_of_moments: 三阶矩方程的二次式求 φ̃，再回代 σ̃²
  - e_step / m_step / em_fit: 以 GIG 后验期望为基础的 EM 算法
  - observed_information: Louis 观测信息矩阵（参数顺序 μ, σ², φ）
  - numerical_observed_information: 对数似然的中心差分负 Hessian（核对基准）
  - standard_errors: √diag(I⁻¹)，矩阵奇异或非正定时返回 None
  - normal_mle: 正态模型（φ→∞ 极限）的最大似然估计

y=0 的观测在 Gamma 族下后验核退化为 b=0 的 Gamma 核，此时 E[W⁻¹|y] 等量
可能为无穷；所有 y²·E[W⁻¹|y] 型乘积在 y=0 处按 0 处理。
"""
import logging
from typing import Optional

import numpy as np

from nef_mp.core.context import (
    EStepRecord,
    FamilyTag,
    FitMethod,
    FitResult,
    GigParams,
    MixingFamily,
    NefParams,
    NormalParams,
)
from nef_mp.core.exceptions import (
    DomainError,
    InadmissibleEstimateError,
    MStepDomainError,
    NumericalFailureError,
)
from nef_mp.core.nef import (
    SMALL_Y_FACTOR,
    nef_cumulants,
    nef_log_pdf,
    posterior_expectation_quad,
    posterior_gig_params,
)
from nef_mp.core.special import gig_log_stats, gig_moment, gig_power_moment

logger = logging.getLogger(__name__)

# ==================== 默认值 ==================== #
DEFAULT_EPSILON = 1e-4
DEFAULT_MAX_ITER = 500
# 数值 Hessian 的相对步长
HESSIAN_REL_STEP = 1e-4
# 二次项系数相对于其他系数小于该值时退化为一次方程
MM_DEGENERATE_TOL = 1e-12


def _as_data(data, min_size: int = 1) -> np.ndarray:
    y = np.asarray(data, dtype=float).ravel()
    if y.size < min_size:
        raise DomainError(f"数据长度至少为 {min_size}，得到 {y.size}")
    if not np.all(np.isfinite(y)):
        raise DomainError("数据含有非有限值")
    return y


def _masked(weight: np.ndarray, values: np.ndarray) -> np.ndarray:
    """weight·values，weight=0 处取 0（屏蔽 0·∞）"""
    with np.errstate(invalid="ignore"):
        return np.where(weight == 0.0, 0.0, weight * values)


def loglik(data, p: NefParams, fam: MixingFamily) -> float:
    """观测数据对数似然 Σ log f(y_i)"""
    y = _as_data(data)
    return float(np.sum(nef_log_pdf(p, fam, y)))


# region 矩估计


def mm_from_moments(
    m1: float, m2: float, m3: float, fam: MixingFamily
) -> tuple[NefParams, bool]:
    """
    由前三阶原点矩求矩估计。

    φ̃ 满足 Aφ̃² + Bφ̃ + C = 0：
        A = 3M₁M₂ − 2M₁³ − M₃
        B = b″(ξ₀)(3M₁M₂ − 3M₁³)
        C = M₁³(b‴(ξ₀) − 3b″(ξ₀)²)
    σ̃² = M₂ − M₁²(1 + b″(ξ₀)/φ̃)。

    Returns:
        (估计值, 是否两个根都可行)

    Raises:
        InadmissibleEstimateError: 不存在 φ̃>0 且 σ̃²>0 的实根
    """
    b2, b3 = fam.b2, fam.b3
    coef_a = 3.0 * m1 * m2 - 2.0 * m1**3 - m3
    coef_b = b2 * (3.0 * m1 * m2 - 3.0 * m1**3)
    coef_c = m1**3 * (b3 - 3.0 * b2 * b2)

    roots: list[float] = []
    scale = max(abs(coef_b), abs(coef_c), np.finfo(float).tiny)
    if abs(coef_a) <= MM_DEGENERATE_TOL * scale:
        if coef_b != 0.0:
            roots.append(-coef_c / coef_b)
    else:
        disc = coef_b * coef_b - 4.0 * coef_a * coef_c
        if disc >= 0.0:
            # 数值稳定的求根公式
            q = -0.5 * (coef_b + np.copysign(np.sqrt(disc), coef_b))
            roots.append(q / coef_a)
            if q != 0.0:
                roots.append(coef_c / q)

    candidates = []
    for phi in roots:
        if not (np.isfinite(phi) and phi > 0):
            continue
        sigma2 = m2 - m1 * m1 * (1.0 + b2 / phi)
        if sigma2 > 0:
            candidates.append((sigma2, phi))
    if not candidates:
        raise InadmissibleEstimateError(
            f"矩估计无可行根 (A={coef_a:.6g}, B={coef_b:.6g}, C={coef_c:.6g})"
        )
    candidates.sort()
    sigma2, phi = candidates[-1]
    return NefParams(mu=m1, sigma2=sigma2, phi=phi), len(candidates) > 1


def method_of_moments(data, fam: MixingFamily) -> FitResult:
    """
    矩估计：μ̃ = M₁，φ̃ 取二次方程的可行根，σ̃² 由二阶矩回代。

    Raises:
        DomainError: 数据少于 3 个或样本方差为 0
        InadmissibleEstimateError: 无可行根
    """
    y = _as_data(data, min_size=3)
    if not np.var(y) > 0:
        raise DomainError("样本方差为 0，矩估计无定义")
    m1, m2, m3 = (float(np.mean(y**k)) for k in (1, 2, 3))
    params, multiple = mm_from_moments(m1, m2, m3, fam)
    if multiple:
        logger.info("矩估计两个根均可行，取 σ̃² 较大的根")
    return FitResult(
        params=params,
        std_errors=None,
        loglik_trace=(),
        iterations=0,
        converged=True,
        method=FitMethod.MM,
        mm_multiple_roots=multiple,
    )


# endregion


# region E 步


_QUAD_FUNCS = {
    "alpha": lambda w: w,
    "gamma": lambda w: 1.0 / w,
    "delta": np.log,
    "lambda2": lambda w: w * w,
    "tau": lambda w: w * np.log(w),
    "nu": lambda w: np.log(w) ** 2,
    "rho": lambda w: w**-2.0,
    "varphi": lambda w: np.log(w) / w,
}


def _gamma_records_closed(a, b, q: float, full: bool) -> dict[str, np.ndarray]:
    """Gamma 族：Bessel 比值与阶数导数闭式"""
    out = {
        "alpha": gig_power_moment(a, b, q, 1),
        "gamma": gig_power_moment(a, b, q, -1),
    }
    mean_log, var_log = gig_log_stats(a, b, q)
    out["delta"] = np.asarray(mean_log, dtype=float)
    if full:
        out["lambda2"] = gig_power_moment(a, b, q, 2)
        out["rho"] = gig_power_moment(a, b, q, -2)
        # E[W^K·log W] = E[W^K]·E_{p+K}[log W]
        out["tau"] = out["alpha"] * np.asarray(gig_log_stats(a, b, q + 1.0)[0])
        with np.errstate(invalid="ignore"):
            out["varphi"] = out["gamma"] * np.asarray(gig_log_stats(a, b, q - 1.0)[0])
        out["nu"] = np.asarray(var_log) + out["delta"] ** 2
    return {k: np.atleast_1d(np.asarray(v, dtype=float)) for k, v in out.items()}


def _gamma_records_quadrature(a, b, q: float, full: bool) -> dict[str, np.ndarray]:
    """Gamma 族：对数矩改用 GIG 数值积分"""
    out = {
        "alpha": np.atleast_1d(gig_power_moment(a, b, q, 1)),
        "gamma": np.atleast_1d(gig_power_moment(a, b, q, -1)),
    }
    keys = ["delta"] + (["tau", "nu", "varphi"] if full else [])
    for key in keys:
        out[key] = np.empty(len(a), dtype=float)
    for i, (ai, bi) in enumerate(zip(a, b)):
        g = GigParams(a=float(ai), b=float(bi), p=q)
        out["delta"][i] = gig_moment(g, 0, 1, method="quadrature")
        if full:
            out["tau"][i] = gig_moment(g, 1, 1, method="quadrature")
            out["nu"][i] = gig_moment(g, 0, 2, method="quadrature")
            if bi == 0 and q - 1.0 <= 0:
                out["varphi"][i] = -np.inf
            else:
                out["varphi"][i] = gig_moment(g, -1, 1, method="quadrature")
    if full:
        out["lambda2"] = np.atleast_1d(gig_power_moment(a, b, q, 2))
        out["rho"] = np.atleast_1d(gig_power_moment(a, b, q, -2))
    return out


def _ig_records(a, b, q: float, full: bool) -> dict[str, np.ndarray]:
    """逆高斯族：g(w) = −1/(2w)，各对数型期望化为倒数矩"""
    alpha = np.atleast_1d(np.asarray(gig_power_moment(a, b, q, 1), dtype=float))
    gamma = np.atleast_1d(np.asarray(gig_power_moment(a, b, q, -1), dtype=float))
    out = {"alpha": alpha, "gamma": gamma, "delta": -0.5 * gamma}
    if full:
        rho = np.atleast_1d(np.asarray(gig_power_moment(a, b, q, -2), dtype=float))
        # p=−1 时 𝒦₁ = 𝒦₋₁，E[W²|y] = b/a
        out["lambda2"] = np.asarray(b, dtype=float) / np.asarray(a, dtype=float)
        out["tau"] = np.full_like(alpha, -0.5)
        out["rho"] = rho
        out["nu"] = 0.25 * rho
        out["varphi"] = -0.5 * rho
    return out


def e_step(
    data,
    p: NefParams,
    fam: MixingFamily,
    full: bool = False,
    log_moments: str = "bessel",
) -> EStepRecord:
    """
    逐观测的后验期望。

    Args:
        data: 观测
        p: 当前参数
        fam: 混合族（Gamma 或逆高斯）
        full: 是否计算信息矩阵所需的全部 8 个期望
        log_moments: Gamma 族对数型期望的算法，"bessel"（阶数导数闭式）
            或 "quadrature"（GIG 数值积分）

    Raises:
        UnsupportedFamilyError: GHS 族
    """
    fam.require_density("e_step")
    y = _as_data(data)
    a, b, q = posterior_gig_params(p, fam, y)
    a, b = np.atleast_1d(a), np.atleast_1d(b)

    if fam.tag == FamilyTag.INVERSE_GAUSSIAN:
        return EStepRecord(**_ig_records(a, b, q, full))

    if log_moments not in ("bessel", "quadrature"):
        raise DomainError(f"未知的对数矩算法: {log_moments}")

    # b=0 且 p≤0（φ≤½）时后验不可积，改为在 y_eps 处对混合积分求期望
    improper = (b == 0.0) & (q <= 0.0)
    proper = ~improper
    names = list(_QUAD_FUNCS) if full else ["alpha", "gamma", "delta"]
    out = {name: np.empty(y.shape, dtype=float) for name in names}

    if np.any(proper):
        compute = _gamma_records_closed if log_moments == "bessel" else _gamma_records_quadrature
        records = compute(a[proper], b[proper], q, full)
        for name in names:
            out[name][proper] = records[name]
    if np.any(improper):
        y_eps = SMALL_Y_FACTOR * np.sqrt(nef_cumulants(p, fam)[1])
        logger.warning(
            "φ=%.4g ≤ ½ 时 y=0 的后验不可积，%d 个观测改在 y=%.3e 处用积分计算",
            p.phi,
            int(np.sum(improper)),
            y_eps,
        )
        fallback = {
            name: posterior_expectation_quad(p, fam, y_eps, _QUAD_FUNCS[name]) for name in names
        }
        for name in names:
            out[name][improper] = fallback[name]
    return EStepRecord(**out)


# endregion


# region M 步与 EM


def m_step(
    data, estep: EStepRecord, fam: MixingFamily, iteration: Optional[int] = None
) -> NefParams:
    """
    闭式 M 步：
        μ = Σy/Σα
        σ² = mean(y²γ − 2μy + μ²α)
        φ = v(b(ξ₀) − ξ₀·mean(α) − mean(δ))，v 为 d′ 的反函数

    Raises:
        MStepDomainError: v 的参数越界或 σ² 非正
    """
    y = _as_data(data)
    if len(estep) != y.size:
        raise DomainError(f"E 步记录长度 {len(estep)} 与数据长度 {y.size} 不一致")

    alpha, gamma, delta = estep.alpha, estep.gamma, estep.delta
    mu = float(y.sum() / alpha.sum())
    sigma2 = float(np.mean(_masked(y * y, gamma) - 2.0 * mu * y + mu * mu * alpha))
    x = float(fam.b_xi0 - fam.xi0 * np.mean(alpha) - np.mean(delta))

    if not (np.isfinite(mu) and np.isfinite(sigma2) and sigma2 > 0):
        raise MStepDomainError(f"M 步得到非法的 (μ, σ²) = ({mu}, {sigma2})", iteration)
    if not (np.isfinite(x) and x > fam.d1_lower):
        raise MStepDomainError(
            f"d′ 反函数参数 {x} 不在 ({fam.d1_lower}, ∞) 内，E 步结果可能已损坏", iteration
        )
    try:
        return NefParams(mu=mu, sigma2=sigma2, phi=fam.d1_inverse(x))
    except DomainError as e:
        raise MStepDomainError(str(e), iteration) from e


def fallback_init(data) -> NefParams:
    """矩估计不可行时的 EM 初值 (M₁, 样本方差, 1)"""
    y = _as_data(data, min_size=2)
    return NefParams(mu=float(np.mean(y)), sigma2=float(np.var(y)), phi=1.0)


def _initial_params(y: np.ndarray, fam: MixingFamily) -> tuple[NefParams, bool]:
    try:
        mm = method_of_moments(y, fam)
        return mm.params, mm.mm_multiple_roots
    except InadmissibleEstimateError as e:
        logger.warning("矩估计不可行 (%s)，改用 (M₁, 样本方差, 1) 作为初值", e)
        return fallback_init(y), False


def em_fit(
    data,
    fam: MixingFamily,
    init: Optional[NefParams] = None,
    epsilon: float = DEFAULT_EPSILON,
    max_iter: int = DEFAULT_MAX_ITER,
    log_moments: str = "bessel",
    information: bool = True,
) -> FitResult:
    """
    EM 估计。

    从 init（缺省为矩估计）出发交替 E/M 步，直到 ‖Ψ⁽ʳ⁺¹⁾−Ψ⁽ʳ⁾‖/‖Ψ⁽ʳ⁾‖ < ε
    或达到 max_iter。每步记录观测对数似然；结束后计算 Louis 信息矩阵与标准误。

    Raises:
        MStepDomainError: M 步越界（携带迭代编号）
        NumericalFailureError: 对数似然出现非有限值
    """
    fam.require_density("em_fit")
    if not epsilon > 0:
        raise DomainError(f"epsilon 必须大于 0，得到 {epsilon}")
    if max_iter < 1:
        raise DomainError(f"max_iter 必须至少为 1，得到 {max_iter}")
    y = _as_data(data, min_size=3)

    multiple = False
    if init is None:
        init, multiple = _initial_params(y, fam)
    current = init
    first = loglik(y, current, fam)
    if not np.isfinite(first):
        raise NumericalFailureError(f"初值处对数似然非有限: {first}", 0)
    trace = [first]

    converged = False
    iterations = 0
    for iteration in range(1, max_iter + 1):
        estep = e_step(y, current, fam, log_moments=log_moments)
        updated = m_step(y, estep, fam, iteration=iteration)
        value = loglik(y, updated, fam)
        if not np.isfinite(value):
            raise NumericalFailureError(f"对数似然非有限: {value}", iteration)
        trace.append(value)

        old = current.as_array()
        change = np.linalg.norm(updated.as_array() - old) / np.linalg.norm(old)
        current, iterations = updated, iteration
        logger.debug("迭代 %d: loglik=%.10g, 相对变化=%.3e", iteration, value, change)
        if change < epsilon:
            converged = True
            break

    if converged:
        logger.info("EM 收敛：%d 次迭代，loglik=%.6f", iterations, trace[-1])
    else:
        logger.warning("EM 在 %d 次迭代内未收敛", max_iter)

    info = observed_information(y, current, fam, log_moments=log_moments) if information else None
    return FitResult(
        params=current,
        std_errors=standard_errors(info) if info is not None else None,
        loglik_trace=tuple(trace),
        iterations=iterations,
        converged=converged,
        method=FitMethod.EM,
        mm_multiple_roots=multiple,
        information=info,
    )


# endregion


# region 观测信息矩阵


def observed_information(
    data,
    p: NefParams,
    fam: MixingFamily,
    estep: Optional[EStepRecord] = None,
    include_score_term: bool = True,
    log_moments: str = "bessel",
) -> np.ndarray:
    """
    Louis 观测信息矩阵，参数顺序 (μ, σ², φ)。

    include_score_term=True 时为 E(−H|Y) − Σᵢ Cov(sᵢ|yᵢ)，
    即一般形式 E(−H|Y) − E(SSᵀ|Y) + E(S|Y)E(S|Y)ᵀ；
    False 时返回两项形式 E(−H|Y) − E(SSᵀ|Y)，仅在驻点处与前者相同。
    """
    y = _as_data(data)
    if estep is None or not estep.full:
        estep = e_step(y, p, fam, full=True, log_moments=log_moments)
    n = y.size
    mu, s2, phi = p.mu, p.sigma2, p.phi
    s4, s6 = s2 * s2, s2 * s2 * s2
    xi0 = fam.xi0
    al, ga, de = estep.alpha, estep.gamma, estep.delta
    y2 = y * y

    neg_h = np.zeros((3, 3))
    neg_h[0, 0] = al.sum() / s2
    neg_h[0, 1] = neg_h[1, 0] = (y - mu * al).sum() / s4
    neg_h[1, 1] = -n / (2.0 * s4) + (_masked(y2, ga) - 2.0 * mu * y + mu * mu * al).sum() / s6
    neg_h[2, 2] = -n * fam.d2(phi)

    # 完全数据得分：
    #   s_μ  = (y − μw)/σ²
    #   s_σ² = −1/(2σ²) + A/w − yμ/σ⁴ + Bw,  A = y²/(2σ⁴), B = μ²/(2σ⁴)
    #   s_φ  = ξ₀w − b(ξ₀) + d′(φ) + g(w)
    big_a = y2 / (2.0 * s4)
    big_b = mu * mu / (2.0 * s4)
    with np.errstate(invalid="ignore"):
        var_w = estep.lambda2 - al * al
        var_iw = estep.rho - ga * ga
        cov_w_iw = 1.0 - al * ga
        var_g = estep.nu - de * de
        cov_w_g = estep.tau - al * de
        cov_iw_g = estep.varphi - ga * de

    cov = np.zeros((3, 3))
    cov[0, 0] = (mu * mu / s4 * var_w).sum()
    cov[0, 1] = (-(mu / s2) * (_masked(big_a, cov_w_iw) + big_b * var_w)).sum()
    cov[0, 2] = (-(mu / s2) * (xi0 * var_w + cov_w_g)).sum()
    cov[1, 1] = (
        _masked(big_a * big_a, var_iw)
        + big_b * big_b * var_w
        + 2.0 * big_b * _masked(big_a, cov_w_iw)
    ).sum()
    cov[1, 2] = (
        _masked(big_a, xi0 * cov_w_iw + cov_iw_g) + big_b * (xi0 * var_w + cov_w_g)
    ).sum()
    cov[2, 2] = (xi0 * xi0 * var_w + 2.0 * xi0 * cov_w_g + var_g).sum()
    cov = np.triu(cov) + np.triu(cov, 1).T

    info = neg_h - cov
    if not include_score_term:
        score = np.array(
            [
                ((y - mu * al) / s2).sum(),
                (-0.5 / s2 + _masked(big_a, ga) - y * mu / s4 + big_b * al).sum(),
                (xi0 * al - fam.b_xi0 + fam.d1(phi) + de).sum(),
            ]
        )
        info = info - np.outer(score, score)
    if not np.all(np.isfinite(info)):
        logger.warning("观测信息矩阵含非有限元素")
    return info


def numerical_observed_information(
    data, p: NefParams, fam: MixingFamily, rel_step: float = HESSIAN_REL_STEP
) -> np.ndarray:
    """
    对数似然的中心差分负 Hessian。

    步长 h = rel_step·(max(|μ|, σ), σ², φ)。
    """
    y = _as_data(data)
    theta = p.as_array()
    h = rel_step * np.array([max(abs(p.mu), np.sqrt(p.sigma2)), p.sigma2, p.phi])

    def f(shift: np.ndarray) -> float:
        return loglik(y, NefParams.from_array(theta + shift), fam)

    f0 = f(np.zeros(3))
    hess = np.zeros((3, 3))
    for i in range(3):
        ei = np.zeros(3)
        ei[i] = h[i]
        hess[i, i] = (f(ei) - 2.0 * f0 + f(-ei)) / (h[i] * h[i])
        for j in range(i + 1, 3):
            ej = np.zeros(3)
            ej[j] = h[j]
            hess[i, j] = hess[j, i] = (
                f(ei + ej) - f(ei - ej) - f(-ei + ej) + f(-ei - ej)
            ) / (4.0 * h[i] * h[j])
    return -hess


def standard_errors(info: np.ndarray) -> Optional[tuple[float, ...]]:
    """√diag(I⁻¹)；I 奇异、非正定或含非有限值时返回 None"""
    info = np.asarray(info, dtype=float)
    if not np.all(np.isfinite(info)):
        return None
    try:
        np.linalg.cholesky(info)
        inverse = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        logger.warning("观测信息矩阵奇异或非正定，标准误不可用")
        return None
    diag = np.diag(inverse)
    if not np.all(diag > 0):
        return None
    return tuple(float(v) for v in np.sqrt(diag))


# endregion


def normal_mle(data) -> FitResult:
    """
    正态模型最大似然估计（φ→∞ 的基准模型）。

    Raises:
        DomainError: 数据少于 2 个或方差为 0
    """
    y = _as_data(data, min_size=2)
    n = y.size
    mu = float(np.mean(y))
    sigma2 = float(np.var(y))
    if not sigma2 > 0:
        raise DomainError("样本方差为 0，正态模型退化")
    value = -0.5 * n * (np.log(2.0 * np.pi * sigma2) + 1.0)
    info = np.diag([n / sigma2, n / (2.0 * sigma2 * sigma2)])
    return FitResult(
        params=NormalParams(mu=mu, sigma2=sigma2),
        std_errors=(float(np.sqrt(sigma2 / n)), float(sigma2 * np.sqrt(2.0 / n))),
        loglik_trace=(float(value),),
        iterations=0,
        converged=True,
        method=FitMethod.NORMAL_MLE,
        information=info,
    )
