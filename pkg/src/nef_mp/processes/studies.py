# ============================================================================ #
#                         Monte Carlo 研究驱动                                 #
# ============================================================================ #
"""
CLI 与 Hydra 批量研究共用的模拟驱动：
  - mc_study: 重复 (抽样 → 矩估计 → EM → Louis 标准误)，汇总为 StudySummary
  - sums_demo: 各 λ 下的正规化随机和样本及其与极限律的 KS 距离
  - stability_check: 复合特征函数与极限特征函数的逐点误差

每个重复 / 每个 λ 使用由主种子派生的独立子流，
串行与并行执行结果一致。
"""
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from tqdm import tqdm

from nef_mp.core.context import (
    FamilyTag,
    MixingFamily,
    MpCountParams,
    NefParams,
    StableCfSpec,
    StableKind,
    StudySummary,
    SummandSpec,
)
from nef_mp.core.exceptions import (
    DomainError,
    InadmissibleEstimateError,
    MStepDomainError,
    NefError,
)
from nef_mp.core.families import get_family
from nef_mp.core.nef import nef_cf, sample_nef
from nef_mp.core.stability import mp_stable_cf, nb_stable_symmetric_cf, pig_stable_symmetric_cf
from nef_mp.core.sums import ks_distance, sample_normalized_sums
from nef_mp.processes.estimation import (
    DEFAULT_EPSILON,
    DEFAULT_MAX_ITER,
    em_fit,
    fallback_init,
    method_of_moments,
)
from nef_mp.utils.common_utils import spawn_seeds

logger = logging.getLogger(__name__)

# ==================== 丢弃原因 ==================== #
DISCARD_M_STEP = "m_step_domain"
DISCARD_NUMERICAL = "numerical_failure"
DISCARD_NOT_CONVERGED = "not_converged"
DISCARD_REASONS = (DISCARD_M_STEP, DISCARD_NUMERICAL, DISCARD_NOT_CONVERGED)


# region Monte Carlo 估计研究


@dataclass(frozen=True)
class ReplicaOutcome:
    """
    单个重复的结果（可跨进程传递）

    em 为 None 表示 EM 失败（discard 给出原因）；
    se 为 None 表示信息矩阵奇异，估计值仍参与汇总。
    """
    index: int
    mm: Optional[np.ndarray]
    em: Optional[np.ndarray]
    se: Optional[np.ndarray]
    discard: Optional[str] = None
    ascent_violations: int = 0
    converged: bool = True

    @property
    def mm_inadmissible(self) -> bool:
        return self.mm is None


@dataclass(frozen=True)
class ReplicaTask:
    index: int
    family: str
    true_params: tuple[float, float, float]
    n: int
    seed: np.random.SeedSequence
    epsilon: float
    max_iter: int


def run_replica(task: ReplicaTask) -> ReplicaOutcome:
    """抽样 n 个观测，矩估计作初值运行 EM；数值失败记为丢弃而不抛出"""
    fam = get_family(task.family)
    p = NefParams(*task.true_params)
    rng = np.random.default_rng(task.seed)
    y = sample_nef(p, fam, task.n, rng)

    mm = None
    try:
        mm = method_of_moments(y, fam).params
    except InadmissibleEstimateError:
        pass
    init = mm if mm is not None else fallback_init(y)
    mm_array = mm.as_array() if mm is not None else None

    try:
        fit = em_fit(y, fam, init=init, epsilon=task.epsilon, max_iter=task.max_iter)
    except MStepDomainError as e:
        logger.debug("重复 %d 丢弃: %s", task.index, e)
        return ReplicaOutcome(task.index, mm_array, None, None, DISCARD_M_STEP)
    except NefError as e:
        logger.debug("重复 %d 丢弃: %s", task.index, e)
        return ReplicaOutcome(task.index, mm_array, None, None, DISCARD_NUMERICAL)

    if not fit.converged:
        logger.debug("重复 %d 在 %d 次迭代内未收敛", task.index, task.max_iter)
    return ReplicaOutcome(
        index=task.index,
        mm=mm_array,
        em=fit.params.as_array(),
        se=np.asarray(fit.std_errors) if fit.std_errors is not None else None,
        ascent_violations=fit.ascent_violations(),
        converged=fit.converged,
    )


def summarize_replicas(
    fam: MixingFamily,
    true_params: NefParams,
    n: int,
    outcomes: Sequence[ReplicaOutcome],
    runtime: Optional[float] = None,
    drop_not_converged: bool = False,
) -> StudySummary:
    """
    汇总各重复结果。

    completed = requested − 丢弃数；经验标准差用 ddof=1，completed<2 时为 None。
    未收敛的 EM 估计默认保留（小样本下 φ 的重尾正来自这些重复），
    drop_not_converged=True 时记为 not_converged 丢弃。
    标准误均值只统计信息矩阵可逆的重复；矩估计偏差只统计可行的矩估计。
    """
    requested = len(outcomes)
    discards = {reason: 0 for reason in DISCARD_REASONS}
    kept: list[ReplicaOutcome] = []
    for outcome in outcomes:
        reason = outcome.discard
        if reason is None and drop_not_converged and not outcome.converged:
            reason = DISCARD_NOT_CONVERGED
        if reason is None:
            kept.append(outcome)
        else:
            discards[reason] += 1
    completed = len(kept)
    truth = true_params.as_array()

    em = np.array([o.em for o in kept]) if kept else None
    with_se = [o.se for o in kept if o.se is not None]
    mm = np.array([o.mm for o in outcomes if o.mm is not None])
    inadmissible = sum(o.mm_inadmissible for o in outcomes)

    return StudySummary(
        family=fam.name,
        true_params=true_params,
        n=n,
        requested=requested,
        completed=completed,
        discards=discards,
        empirical_sd=em.std(axis=0, ddof=1) if completed >= 2 else None,
        mean_se=np.mean(with_se, axis=0) if with_se else None,
        bias_em=em.mean(axis=0) - truth if completed >= 1 else None,
        bias_mm=mm.mean(axis=0) - truth if mm.size else None,
        mm_inadmissible_rate=inadmissible / requested if requested else 0.0,
        ascent_violations=int(sum(o.ascent_violations for o in outcomes)),
        not_converged=sum(o.em is not None and not o.converged for o in outcomes),
        singular_information=sum(o.se is None for o in kept),
        runtime=runtime,
        outcomes=tuple(outcomes),
    )


def mc_study(
    fam: MixingFamily,
    true_params: NefParams,
    n: int,
    replicas: int,
    seed: int,
    workers: int = 1,
    epsilon: float = DEFAULT_EPSILON,
    max_iter: int = DEFAULT_MAX_ITER,
    progress: bool = False,
    record_runtime: bool = False,
    drop_not_converged: bool = False,
) -> StudySummary:
    """
    Monte Carlo 估计研究。

    Args:
        fam: 混合族（Gamma 或逆高斯）
        true_params: 真实参数
        n: 每个样本的长度
        replicas: 重复次数
        seed: 主种子，第 i 个重复使用 SeedSequence(seed).spawn(replicas)[i]
        workers: 进程数，1 表示串行
        epsilon, max_iter: EM 收敛参数
        progress: 是否显示进度条
        record_runtime: 是否在汇总中记录运行时间（默认不记录以保持输出可复现）
        drop_not_converged: 是否把未收敛的重复从汇总中剔除

    Returns:
        StudySummary，outcomes 字段按重复编号保存逐重复的 MM/EM 估计与标准误
    """
    fam.require_density("mc_study")
    if n < 3 or replicas < 1 or workers < 1:
        raise DomainError(f"要求 n≥3, replicas≥1, workers≥1，得到 n={n}, replicas={replicas}, workers={workers}")
    tasks = [
        ReplicaTask(
            index=i,
            family=fam.tag.value,
            true_params=(true_params.mu, true_params.sigma2, true_params.phi),
            n=n,
            seed=child,
            epsilon=epsilon,
            max_iter=max_iter,
        )
        for i, child in enumerate(spawn_seeds(seed, replicas))
    ]
    logger.info("开始 %s 族 Monte Carlo 研究：n=%d, 重复 %d 次, 进程数 %d", fam.name, n, replicas, workers)

    start = time.perf_counter()
    bar = dict(total=replicas, disable=not progress, desc=f"{fam.nef_name} n={n}")
    if workers > 1:
        chunksize = max(1, replicas // (4 * workers))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(tqdm(pool.map(run_replica, tasks, chunksize=chunksize), **bar))
    else:
        outcomes = [run_replica(task) for task in tqdm(tasks, **bar)]
    elapsed = time.perf_counter() - start

    summary = summarize_replicas(
        fam,
        true_params,
        n,
        outcomes,
        runtime=elapsed if record_runtime else None,
        drop_not_converged=drop_not_converged,
    )
    logger.info(
        "研究完成：有效 %d/%d（未收敛 %d），矩估计不可行比例 %.2f%%，用时 %.1f 秒",
        summary.completed,
        summary.requested,
        summary.not_converged,
        100.0 * summary.mm_inadmissible_rate,
        elapsed,
    )
    return summary


# endregion


# region 随机和收敛演示


@dataclass(frozen=True)
class SumsDemoResult:
    """
    随机和演示结果。

    Attributes:
        limit: 极限 NEF 参数 (E X, Var X, φ)
        samples: λ → S̃_λ 样本
        ks_table: 每个 λ 的样本量、均值、方差与 KS 距离
    """
    limit: NefParams
    samples: dict[float, np.ndarray]
    ks_table: pd.DataFrame


def sums_demo(
    fam: MixingFamily,
    lambdas: Sequence[float],
    phi: float,
    summand: SummandSpec,
    replicas: int,
    seed: int,
    progress: bool = False,
) -> SumsDemoResult:
    """
    对每个 λ 抽取 replicas 个 S̃_λ，并计算与极限律 NEF(E X, Var X, φ) 的 KS 距离。

    第 i 个 λ 使用 SeedSequence(seed).spawn(len(lambdas))[i]。
    """
    fam.require_density("sums_demo")
    limit = NefParams(mu=summand.mu, sigma2=summand.sigma2, phi=phi)
    samples: dict[float, np.ndarray] = {}
    rows = []
    for lam, child in tqdm(
        list(zip(lambdas, spawn_seeds(seed, len(lambdas)))), disable=not progress, desc="λ"
    ):
        counts = MpCountParams(lam=float(lam), phi=phi, family=fam)
        sample = sample_normalized_sums(counts, summand, replicas, np.random.default_rng(child))
        samples[float(lam)] = sample
        distance = ks_distance(sample, limit, fam)
        logger.info("λ=%g: KS 距离 %.4f", lam, distance)
        rows.append(
            {
                "lambda": float(lam),
                "replicas": replicas,
                "mean": float(np.mean(sample)),
                "var": float(np.var(sample, ddof=1)) if replicas > 1 else float("nan"),
                "ks": distance,
            }
        )
    return SumsDemoResult(limit=limit, samples=samples, ks_table=pd.DataFrame(rows))


# endregion


# region 稳定性核对


def reference_stable_cf(
    fam: MixingFamily, phi: float, psi: StableCfSpec, t: np.ndarray
) -> np.ndarray:
    """
    不经复合直接写出的极限特征函数：
      NormalDrift → 对应 NEF(μ, σ², φ) 的特征函数
      对称 α-稳定 → NB / PIG 稳定律的闭式
    """
    t = np.asarray(t, dtype=float)
    if psi.kind == StableKind.NORMAL_DRIFT:
        return np.asarray(nef_cf(NefParams(psi.mu, psi.sigma2, phi), fam, t))
    if fam.tag == FamilyTag.GAMMA:
        return np.asarray(nb_stable_symmetric_cf(psi.c, phi, t, psi.alpha), dtype=complex)
    return np.asarray(pig_stable_symmetric_cf(psi.c, phi, t, psi.alpha), dtype=complex)


def stability_check(
    fam: MixingFamily, phi: float, psi: StableCfSpec, t: Sequence[float]
) -> pd.DataFrame:
    """逐点比较 mp_stable_cf 与 reference_stable_cf"""
    t = np.asarray(t, dtype=float)
    composed = np.atleast_1d(np.asarray(mp_stable_cf(fam, phi, psi, t), dtype=complex))
    direct = np.atleast_1d(reference_stable_cf(fam, phi, psi, t))
    table = pd.DataFrame(
        {
            "t": np.atleast_1d(t),
            "composed_re": composed.real,
            "composed_im": composed.imag,
            "direct_re": direct.real,
            "direct_im": direct.imag,
            "abs_error": np.abs(composed - direct),
        }
    )
    logger.info("%s 族稳定性核对：最大误差 %.3e", fam.name, float(table["abs_error"].max()))
    return table


# endregion
