"""
Monte Carlo 批量研究脚本

使用 Hydra + hydra-list-sweeper 对 (族, μ, σ², φ, n) 扫参，每组参数跑一次 mc_study。

使用方法:
    uv run python run_study.py                                  # 使用根目录 config.yaml
    uv run python run_study.py --multirun                       # 按 sweeper 扫参
    uv run python run_study.py --config-file=conf/gamma.yaml    # 指定其他 YAML

输出:
    results/<NNN>_<studyname>.json
    results/_index.md                 （研究索引表，供人工审阅记录）
"""
import atexit
import sys
from datetime import datetime
from pathlib import Path

import hydra
from omegaconf import DictConfig, OmegaConf
from pydantic import ValidationError

from nef_mp.core.exceptions import NefError
from nef_mp.preprocess.builders import build_family, build_nef_params
from nef_mp.preprocess.config.models import StudyConfig
from nef_mp.preprocess.config.resolvers import register_resolvers
from nef_mp.processes.studies import mc_study
from nef_mp.utils.common_utils import run_metadata, save_to_json

# 注册自定义 resolver（必须在 @hydra.main 之前）
register_resolvers()

# 输出目录（基于启动命令时的当前工作目录）
RESULTS_DIR = Path.cwd() / "results"

# ---------------------------------------------------------------------------
# 运行计数器 & 索引收集
# Hydra multirun 在同一进程内多次调用 main()，因此模块级变量可跨调用共享
# ---------------------------------------------------------------------------
_run_counter: int = 0
_run_registry: list[dict] = []


def _next_run_number() -> int:
    """返回下一个递增编号（从 1 开始）。"""
    global _run_counter
    _run_counter += 1
    return _run_counter


def _extract_key_params(config: StudyConfig, summary: dict) -> dict[str, str]:
    """提取研究参数与主要结果，用于索引表展示。"""
    params: dict[str, str] = {
        "族": config.family.value,
        "μ": str(config.mu),
        "σ²": str(config.sigma2),
        "φ": str(config.phi),
        "n": str(config.n),
        "有效/请求": f"{summary['completed']}/{summary['requested']}",
        "MM 不可行率": f"{100.0 * summary['mm_inadmissible_rate']:.1f}%",
    }
    return params


def _generate_index_md() -> None:
    """生成 Markdown 索引文件。在所有 Hydra 多次运行结束后调用。"""
    if not _run_registry:
        return

    index_path = RESULTS_DIR / "_index.md"

    # 收集所有出现过的参数列名（保持插入顺序）
    all_param_keys: list[str] = []
    for entry in _run_registry:
        for k in entry["params"]:
            if k not in all_param_keys:
                all_param_keys.append(k)

    lines: list[str] = []
    timestamp = datetime.now().strftime("%Y-%m-%d %H:%M")
    lines.append("# 研究索引表")
    lines.append("")
    lines.append(f"> 生成时间: {timestamp}  ")
    lines.append(f"> 共 {len(_run_registry)} 组研究")
    lines.append("")

    header_cols = ["编号", "研究名称"] + all_param_keys + ["审阅备注"]
    lines.append("| " + " | ".join(header_cols) + " |")
    lines.append("| " + " | ".join(["---"] * len(header_cols)) + " |")

    for entry in _run_registry:
        num = entry["number"]
        name = entry["studyname"]
        param_cells = [entry["params"].get(k, "-") for k in all_param_keys]
        row = [f"{num:03d}", f"`{name}`"] + param_cells + [""]
        lines.append("| " + " | ".join(row) + " |")

    lines.append("")

    index_path.parent.mkdir(parents=True, exist_ok=True)
    with open(index_path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines))

    print(f"\n📋 索引文件已生成: {index_path}")


# 注册退出钩子，确保在所有 main() 调用结束后生成索引
atexit.register(_generate_index_md)


def _has_hydra_config_override(args: list[str]) -> bool:
    """检测是否已显式传入 Hydra 配置路径参数。"""
    return (
        "--config-path" in args
        or "--config-name" in args
        or any(arg.startswith("--config-path=") for arg in args)
        or any(arg.startswith("--config-name=") for arg in args)
    )


def _inject_selected_config(args: list[str], selected_config: str) -> list[str]:
    """将配置文件路径转换为 Hydra CLI 参数。"""
    config_path = Path(selected_config).resolve()
    return args + [
        "--config-path",
        str(config_path.parent),
        "--config-name",
        config_path.stem,
    ]


def _prepare_cli_args(argv: list[str]) -> list[str]:
    """
    处理 CLI 参数。

    --config-file=PATH（或 --config-file PATH）转换为 Hydra 的
    --config-path/--config-name；两者都没有时使用脚本旁的 config.yaml。
    """
    args = argv[1:]

    if _has_hydra_config_override(args):
        if any(arg == "--config-file" or arg.startswith("--config-file=") for arg in args):
            raise ValueError("--config-file 不能与 --config-path/--config-name 同时使用")
        return argv

    selected = None
    rest: list[str] = []
    it = iter(args)
    for arg in it:
        if arg.startswith("--config-file="):
            selected = arg.split("=", 1)[1]
        elif arg == "--config-file":
            selected = next(it, None)
            if selected is None:
                raise ValueError("--config-file 需要一个文件路径")
        else:
            rest.append(arg)

    if selected is None:
        return argv
    if not Path(selected).is_file():
        raise ValueError(f"配置文件不存在: {selected}")
    return [argv[0]] + _inject_selected_config(rest, selected)


@hydra.main(version_base=None, config_path=".", config_name="config")
def main(cfg: DictConfig) -> None:
    """
    Hydra 入口函数。
    """
    # 1. 解析所有 resolver + Pydantic 类型验证（studyname 自动生成）
    cfg_dict = OmegaConf.to_container(cfg, resolve=True)

    # Pydantic 模型已配置 extra="ignore"，自动忽略 hydra 内部配置
    try:
        config = StudyConfig(**cfg_dict)
    except ValidationError as e:
        print(f"配置验证失败:\n{e}")
        return

    # 2. 添加编号前缀
    run_num = _next_run_number()
    numbered_name = f"{run_num:03d}_{config.studyname}"
    config.studyname = numbered_name

    # 3. 运行研究
    try:
        summary = mc_study(
            build_family(config),
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
        ).to_dict()
    except NefError as e:
        print(f"✗ [{run_num:03d}] 研究失败: {e}")
        return

    # 4. 序列化为 JSON
    flags = config.model_dump(mode="json")
    flags.pop("seed", None)
    output_file = RESULTS_DIR / f"{numbered_name}.json"
    save_to_json({"metadata": run_metadata(config.seed, flags), "summary": summary}, output_file)

    # 5. 收集到索引注册表
    _run_registry.append({
        "number": run_num,
        "studyname": numbered_name,
        "params": _extract_key_params(config, summary),
    })

    print(f"✓ [{run_num:03d}] 研究完成: {output_file.name}")


if __name__ == "__main__":
    try:
        sys.argv = _prepare_cli_args(sys.argv)
    except ValueError as e:
        raise SystemExit(f"参数错误: {e}")
    main()
