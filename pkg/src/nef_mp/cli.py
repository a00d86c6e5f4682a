# ============================================================================ #
#                              命令行入口                                      #
# ============================================================================ #
"""
nef-mp 命令行工具

子命令:
    fit              对单列 CSV 数据做矩估计 + EM 拟合（可选绘图数据）
    mc-study         Monte Carlo 估计研究（经验标准差 vs Louis 标准误）
    sums-demo        正规化混合泊松随机和的弱收敛演示
    stability-check  MP-稳定复合特征函数与极限特征函数的逐点误差
    density          在网格上列出 NEF 密度
    sample           抽取 NEF 样本

退出码:
    0  成功
    2  输入或配置错误（文件不可读、参数非法、混合族不支持）
    3  数值失败（仍写出带 error 字段的部分报告）

日志与进度条写到标准错误，--json 的报告写到标准输出。
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ValidationError
from scipy import stats

from nef_mp import __version__
from nef_mp.core.context import FamilyTag, MixingFamily
from nef_mp.core.exceptions import (
    DomainError,
    InadmissibleEstimateError,
    InputDataError,
    NumericalFailureError,
    UnsupportedFamilyError,
)
from nef_mp.core.families import GAMMA, INVERSE_GAUSSIAN
from nef_mp.core.nef import nef_to_nig_classical, sample_nef
from nef_mp.postprocesses.plot_data import (
    density_grid,
    density_range,
    histogram_bins,
    qq_pairs,
    replica_table,
    study_table,
    sums_histograms,
)
from nef_mp.preprocess.builders import build_family, build_nef_params, parse_stable, parse_summand
from nef_mp.preprocess.config.models import (
    DensityConfig,
    FamilyEnum,
    FitConfig,
    McStudyConfig,
    RunConfig,
    SampleConfig,
    StabilityCheckConfig,
    SumsDemoConfig,
)
from nef_mp.processes.estimation import (
    em_fit,
    method_of_moments,
    normal_mle,
    numerical_observed_information,
)
from nef_mp.processes.studies import mc_study, stability_check, sums_demo
from nef_mp.utils.common_utils import (
    dumps_json,
    log_returns,
    read_series_csv,
    run_metadata,
    save_to_json,
    spawn_generators,
    write_csv,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3


# region 公共工具


def _configure_logging(config: RunConfig) -> None:
    level = logging.DEBUG if config.verbose else logging.WARNING if config.quiet else logging.INFO
    logging.basicConfig(
        level=level,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )


def _metadata(config: RunConfig) -> dict:
    flags = config.model_dump(mode="json")
    flags.pop("seed", None)
    return run_metadata(config.seed, flags)


def _out_dir(config: RunConfig) -> Optional[Path]:
    return Path(config.out) if config.out else None


def _emit_report(config: RunConfig, report: dict, filename: str) -> None:
    """报告写入 out 目录，--json 时同时打印到标准输出"""
    out = _out_dir(config)
    if out is not None:
        save_to_json(report, out / filename)
    if config.emit_json:
        print(dumps_json(report))


def _emit_table(config: RunConfig, frame: pd.DataFrame, filename: str, metadata: dict) -> None:
    """CSV 写入 out 目录；未指定 out 时写到标准输出"""
    out = _out_dir(config)
    if out is not None:
        write_csv(frame, out / filename, metadata)
    else:
        sys.stdout.write("# " + dumps_json(metadata, indent=None) + "\n")
        frame.to_csv(sys.stdout, index=False, lineterminator="\n", float_format="%.12g")


# endregion


# region fit


def _fit_families(config: FitConfig) -> list[MixingFamily]:
    if config.family == FamilyEnum.BOTH:
        return [GAMMA, INVERSE_GAUSSIAN]
    fam = build_family(config)
    fam.require_density("fit")
    return [fam]


def _describe_data(y: np.ndarray) -> dict:
    return {
        "n": int(y.size),
        "mean": float(np.mean(y)),
        "var": float(np.var(y)),
        "skewness": float(stats.skew(y)),
        "excess_kurtosis": float(stats.kurtosis(y)),
    }


def _fit_one(
    y: np.ndarray, fam: MixingFamily, config: FitConfig, rng: np.random.Generator
) -> tuple[dict, Optional[str]]:
    """单个混合族的拟合报告；数值失败时返回 (部分报告, 错误信息)"""
    entry: dict = {"family": fam.name, "model": fam.nef_name}
    init = None
    try:
        mm = method_of_moments(y, fam)
        entry["mm"] = mm.to_dict()
        init = mm.params
    except InadmissibleEstimateError as e:
        entry["mm"] = {"error": str(e)}

    try:
        fit = em_fit(y, fam, init=init, epsilon=config.epsilon, max_iter=config.max_iter)
    except NumericalFailureError as e:
        entry["em"] = {"error": str(e), "iteration": e.iteration}
        entry["error"] = str(e)
        return entry, str(e)

    entry["em"] = fit.to_dict()
    if fam.tag == FamilyTag.INVERSE_GAUSSIAN:
        entry["nig_classical"] = nef_to_nig_classical(fit.params)
    if config.hessian_check and fit.information is not None:
        numeric = numerical_observed_information(y, fit.params, fam)
        scale = max(float(np.max(np.abs(numeric))), np.finfo(float).tiny)
        entry["hessian_check"] = {
            "numerical_information": numeric.tolist(),
            # 以数值矩阵最大元素为尺度的相对差
            "max_rel_diff": float(np.max(np.abs(fit.information - numeric)) / scale),
        }
    if config.plots:
        out = _out_dir(config) or Path.cwd()
        metadata = _metadata(config)
        write_csv(histogram_bins(y, bins=config.bins), out / f"fit_{fam.tag.value}_hist.csv", metadata)
        write_csv(
            qq_pairs(y, fit.params, fam, rng, draws=config.qq_draws),
            out / f"fit_{fam.tag.value}_qq.csv",
            metadata,
        )
    return entry, None


def cmd_fit(config: FitConfig) -> int:
    """fit 子命令"""
    families = _fit_families(config)
    raw = read_series_csv(config.input)
    y = log_returns(raw) if config.prices else raw
    if y.size < 3:
        raise InputDataError(f"拟合至少需要 3 个观测，得到 {y.size}")

    report: dict = {"metadata": _metadata(config), "data": _describe_data(y)}
    try:
        normal = normal_mle(y)
    except DomainError as e:
        raise InputDataError(str(e)) from e
    report["normal"] = normal.to_dict()

    fits = {}
    table = [{"model": "Normal", "n_params": 2, "loglik": normal.loglik}]
    errors = []
    for fam, rng in zip(families, spawn_generators(config.seed, len(families))):
        entry, error = _fit_one(y, fam, config, rng)
        fits[fam.tag.value] = entry
        if error is not None:
            errors.append(f"{fam.name}: {error}")
            continue
        table.append({"model": fam.nef_name, "n_params": 3, "loglik": entry["em"]["loglik"]})
    report["fits"] = fits
    report["loglik_table"] = table
    if errors:
        report["error"] = "; ".join(errors)

    _emit_report(config, report, "fit.json")
    if not config.emit_json:
        for row in table:
            print(f"✓ {row['model']:>6}: loglik = {row['loglik']:.6f}")
    return EXIT_NUMERICAL if errors else EXIT_OK


# endregion


# region 研究与演示


def cmd_mc_study(config: McStudyConfig) -> int:
    """mc-study 子命令"""
    fam = build_family(config)
    summary = mc_study(
        fam,
        build_nef_params(config),
        n=config.n,
        replicas=config.replicas,
        seed=config.seed,
        workers=config.workers,
        epsilon=config.epsilon,
        max_iter=config.max_iter,
        progress=not config.quiet,
        record_runtime=config.record_runtime,
        drop_not_converged=config.drop_not_converged,
    )
    metadata = _metadata(config)
    report = {"metadata": metadata, "summary": summary.to_dict()}
    _emit_report(config, report, "mc_study.json")
    out = _out_dir(config)
    if out is not None:
        write_csv(study_table(summary), out / "mc_study.csv", metadata)
        write_csv(replica_table(summary), out / "mc_study_replicas.csv", metadata)
    if not config.emit_json:
        print(study_table(summary).to_string(index=False))
    return EXIT_OK


def cmd_sums_demo(config: SumsDemoConfig) -> int:
    """sums-demo 子命令"""
    fam = build_family(config)
    result = sums_demo(
        fam,
        config.lambdas,
        phi=config.phi,
        summand=parse_summand(config.summand),
        replicas=config.replicas,
        seed=config.seed,
        progress=not config.quiet,
    )
    metadata = _metadata(config)
    out = _out_dir(config)
    if out is not None:
        samples = pd.concat(
            [pd.DataFrame({"lambda": lam, "value": s}) for lam, s in result.samples.items()],
            ignore_index=True,
        )
        hist = sums_histograms(result.samples, bins=config.bins)
        density = density_grid(
            result.limit, fam, float(hist["left"].min()), float(hist["right"].max()), config.grid_points
        )
        write_csv(samples, out / "sums_demo_samples.csv", metadata)
        write_csv(result.ks_table, out / "sums_demo_ks.csv", metadata)
        write_csv(hist, out / "sums_demo_hist.csv", metadata)
        write_csv(density, out / "sums_demo_density.csv", metadata)
    report = {
        "metadata": metadata,
        "limit": result.limit.to_dict(),
        "ks_table": result.ks_table.to_dict(orient="records"),
    }
    _emit_report(config, report, "sums_demo.json")
    if not config.emit_json:
        print(result.ks_table.to_string(index=False))
    return EXIT_OK


def cmd_stability_check(config: StabilityCheckConfig) -> int:
    """stability-check 子命令"""
    fam = build_family(config)
    t = np.linspace(config.t_min, config.t_max, config.t_points)
    table = stability_check(fam, config.phi, parse_stable(config.stable), t)
    metadata = _metadata(config)
    out = _out_dir(config)
    if out is not None:
        write_csv(table, out / "stability_check.csv", metadata)
    report = {"metadata": metadata, "max_abs_error": float(table["abs_error"].max())}
    _emit_report(config, report, "stability_check.json")
    if not config.emit_json:
        print(f"✓ 最大误差: {report['max_abs_error']:.3e}")
    return EXIT_OK


def cmd_density(config: DensityConfig) -> int:
    """density 子命令"""
    fam = build_family(config)
    fam.require_density("density")
    p = build_nef_params(config)
    lower, upper = config.lower, config.upper
    if lower is None or upper is None:
        default_lower, default_upper = density_range(p, fam, config.width)
        lower = default_lower if lower is None else lower
        upper = default_upper if upper is None else upper
    _emit_table(config, density_grid(p, fam, lower, upper, config.points), "density.csv", _metadata(config))
    return EXIT_OK


def cmd_sample(config: SampleConfig) -> int:
    """sample 子命令"""
    fam = build_family(config)
    fam.require_density("sample")
    y = sample_nef(build_nef_params(config), fam, config.n, np.random.default_rng(config.seed))
    _emit_table(config, pd.DataFrame({"y": y}), "sample.csv", _metadata(config))
    return EXIT_OK


# endregion


# region 参数解析


COMMANDS: dict[str, tuple[Callable[[BaseModel], int], type[RunConfig]]] = {
    "fit": (cmd_fit, FitConfig),
    "mc-study": (cmd_mc_study, McStudyConfig),
    "sums-demo": (cmd_sums_demo, SumsDemoConfig),
    "stability-check": (cmd_stability_check, StabilityCheckConfig),
    "density": (cmd_density, DensityConfig),
    "sample": (cmd_sample, SampleConfig),
}


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--family", help="混合族: gamma | ig（fit 还可用 both）")
    common.add_argument("--seed", type=int, help="主随机种子")
    common.add_argument("--out", help="输出目录")
    common.add_argument("--json", dest="emit_json", action="store_true", help="在标准输出打印 JSON 报告")
    common.add_argument("--workers", type=int, help="并行进程数")
    common.add_argument("-v", "--verbose", action="store_true", help="输出调试日志")
    common.add_argument("-q", "--quiet", action="store_true", help="只输出警告与错误")
    return common


def _add_params(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--mu", type=float, help="位置参数 μ")
    parser.add_argument("--sigma2", type=float, help="尺度参数 σ²")
    parser.add_argument("--phi", type=float, help="离散参数 φ")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nef-mp", description="NEF 分布与混合泊松随机和工具")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common_parser()

    fit = sub.add_parser("fit", parents=[common], help="拟合单列 CSV 数据")
    fit.add_argument("input", help="单列数值 CSV（可选一行表头）")
    ingest = fit.add_mutually_exclusive_group()
    ingest.add_argument("--prices", action="store_true", help="输入为价格，先取对数收益率")
    ingest.add_argument("--returns", action="store_true", help="输入为收益率（默认）")
    fit.add_argument("--plots", action="store_true", help="输出直方图与 QQ 绘图数据")
    fit.add_argument("--epsilon", type=float, help="EM 收敛阈值")
    fit.add_argument("--max-iter", type=int, help="EM 最大迭代次数")
    fit.add_argument("--qq-draws", type=int, help="QQ 拟合分位数的抽样数")
    fit.add_argument("--bins", type=int, help="直方图分箱数")
    fit.add_argument(
        "--no-hessian-check", dest="hessian_check", action="store_false", help="不做数值 Hessian 核对"
    )

    mc = sub.add_parser("mc-study", parents=[common], help="Monte Carlo 估计研究")
    _add_params(mc)
    mc.add_argument("--n", type=int, help="样本长度")
    mc.add_argument("--replicas", type=int, help="重复次数")
    mc.add_argument("--epsilon", type=float, help="EM 收敛阈值")
    mc.add_argument("--max-iter", type=int, help="EM 最大迭代次数")
    mc.add_argument("--record-runtime", action="store_true", help="记录运行时间")
    mc.add_argument(
        "--drop-not-converged", action="store_true", help="剔除未收敛的重复（默认保留在汇总中）"
    )

    sums = sub.add_parser("sums-demo", parents=[common], help="随机和弱收敛演示")
    sums.add_argument("--lambdas", help="逗号分隔的 λ 列表")
    sums.add_argument("--phi", type=float, help="离散参数 φ")
    sums.add_argument("--summand", help="exp:MEAN 或 normal:MU,SIGMA2")
    sums.add_argument("--replicas", type=int, help="每个 λ 的样本量")
    sums.add_argument("--bins", type=int, help="直方图分箱数")
    sums.add_argument("--grid-points", type=int, help="极限密度网格点数")

    stab = sub.add_parser("stability-check", parents=[common], help="稳定性特征函数核对")
    stab.add_argument("--phi", type=float, help="离散参数 φ")
    stab.add_argument("--stable", help="normal:MU,SIGMA2 或 sas:C,ALPHA")
    stab.add_argument("--t-min", type=float, help="t 网格下限")
    stab.add_argument("--t-max", type=float, help="t 网格上限")
    stab.add_argument("--t-points", type=int, help="t 网格点数")

    dens = sub.add_parser("density", parents=[common], help="列出 NEF 密度")
    _add_params(dens)
    dens.add_argument("--lower", type=float, help="网格下限")
    dens.add_argument("--upper", type=float, help="网格上限")
    dens.add_argument("--width", type=float, help="缺省范围半宽（以 √κ2 为单位）")
    dens.add_argument("--points", type=int, help="网格点数")

    samp = sub.add_parser("sample", parents=[common], help="抽取 NEF 样本")
    _add_params(samp)
    samp.add_argument("--n", type=int, help="样本量")

    return parser


# endregion


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler, model = COMMANDS[args.command]

    # None 表示未指定，交给 Pydantic 默认值
    values = {k: v for k, v in vars(args).items() if v is not None}
    try:
        config = model(**values)
    except ValidationError as e:
        print(f"配置验证失败:\n{e}", file=sys.stderr)
        return EXIT_INPUT

    _configure_logging(config)
    try:
        return handler(config)
    except (InputDataError, UnsupportedFamilyError, DomainError) as e:
        logger.error("%s", e)
        return EXIT_INPUT
    except NumericalFailureError as e:
        logger.error("数值失败: %s", e)
        _emit_report(config, {"metadata": _metadata(config), "error": str(e)}, f"{args.command}.json")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
