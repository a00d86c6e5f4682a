"""
Pydantic 配置模型

用于 CLI 参数与 Hydra 配置的类型验证和序列化。
验证通过后由 preprocess/builders.py 转换为 core/context 中的不可变 dataclass。

使用流程:
    1. argparse 解析命令行 / Hydra 加载 YAML 配置
    2. OmegaConf resolver 计算派生值（仅 Hydra）
    3. Pydantic 模型验证类型与跨字段约束
    4. builders 构建计算用 dataclass
"""
from enum import Enum
from typing import ClassVar, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from nef_mp.preprocess.builders import parse_stable, parse_summand


# 参数简写映射（用于生成研究名称）
PARAM_ABBREV: dict[str, str] = {
    "family": "",
    "mu": "mu",
    "sigma2": "s2",
    "phi": "phi",
    "n": "n",
    "replicas": "r",
    "seed": "seed",
    "epsilon": "eps",
}


# region 公共配置


class FamilyEnum(str, Enum):
    """混合族枚举"""
    GAMMA = "gamma"
    INVERSE_GAUSSIAN = "ig"
    GHS = "ghs"
    BOTH = "both"  # 仅 fit：同时拟合 Gamma 与逆高斯


class RunConfig(BaseModel):
    """所有子命令共用的配置"""

    model_config = ConfigDict(extra="ignore")  # 忽略多余的键（如 argparse 的 command、hydra 内部配置）

    allow_both: ClassVar[bool] = False

    family: FamilyEnum = Field(default=FamilyEnum.GAMMA, description="混合族: gamma | ig")
    seed: int = Field(default=2024, ge=0, lt=2**64, description="主随机种子（写入所有输出）")
    out: Optional[str] = Field(default=None, description="输出路径（文件或目录，视子命令而定）")
    emit_json: bool = Field(default=False, description="在标准输出打印 JSON 报告")
    workers: int = Field(default=1, ge=1, description="并行进程数")
    verbose: bool = Field(default=False, description="输出调试日志")
    quiet: bool = Field(default=False, description="只输出警告与错误，关闭进度条")

    @model_validator(mode="after")
    def _validate_common(self) -> "RunConfig":
        if self.verbose and self.quiet:
            raise ValueError("--verbose 与 --quiet 不能同时使用")
        if self.family == FamilyEnum.BOTH and not self.allow_both:
            raise ValueError("family=both 只能用于 fit 子命令")
        return self


class NefParamsConfig(BaseModel):
    """NEF 参数 (μ, σ², φ)"""

    mu: float = Field(default=3.0, description="位置参数 μ")
    sigma2: float = Field(default=4.0, gt=0, description="尺度参数 σ²")
    phi: float = Field(default=2.0, gt=0, description="潜变量离散参数 φ")


# endregion


# region 子命令配置


class FitConfig(RunConfig):
    """fit: 对单列 CSV 数据做矩估计 + EM 拟合"""

    allow_both: ClassVar[bool] = True

    input: str = Field(description="单列数值 CSV 文件")
    prices: bool = Field(default=False, description="输入为价格，先取对数收益率")
    returns: bool = Field(default=False, description="输入为收益率（默认）")
    plots: bool = Field(default=False, description="输出直方图与 QQ 绘图数据")
    epsilon: float = Field(default=1e-4, gt=0, description="EM 相对变化收敛阈值")
    max_iter: int = Field(default=500, ge=1, description="EM 最大迭代次数")
    qq_draws: int = Field(default=1_000_000, ge=1000, description="QQ 拟合分位数的 Monte Carlo 抽样数")
    bins: int = Field(default=50, ge=1, description="直方图分箱数")
    hessian_check: bool = Field(default=True, description="报告数值 Hessian 核对结果")

    @model_validator(mode="after")
    def _exclusive_ingest(self) -> "FitConfig":
        """--prices 与 --returns 互斥"""
        if self.prices and self.returns:
            raise ValueError("--prices 与 --returns 互斥")
        return self


class McStudyConfig(RunConfig, NefParamsConfig):
    """mc-study: 重复抽样 + 估计的 Monte Carlo 研究"""

    n: int = Field(default=100, ge=3, description="每个样本的长度")
    replicas: int = Field(default=100, ge=1, description="重复次数")
    epsilon: float = Field(default=1e-4, gt=0, description="EM 相对变化收敛阈值")
    max_iter: int = Field(default=500, ge=1, description="EM 最大迭代次数")
    record_runtime: bool = Field(default=False, description="在汇总中记录运行时间（输出将不再逐字节可复现）")
    drop_not_converged: bool = Field(default=False, description="把达到 max_iter 仍未收敛的重复从汇总中剔除")


class SumsDemoConfig(RunConfig):
    """sums-demo: 正规化随机和的弱收敛演示"""

    lambdas: List[float] = Field(default=[30.0, 50.0, 500.0], min_length=1, description="λ 列表")
    phi: float = Field(default=2.0, gt=0, description="潜变量离散参数 φ")
    summand: str = Field(default="exp:1", description="被加项: exp:MEAN 或 normal:MU,SIGMA2")
    replicas: int = Field(default=500, ge=1, description="每个 λ 的样本量")
    bins: int = Field(default=30, ge=1, description="直方图分箱数")
    grid_points: int = Field(default=401, ge=2, description="极限密度曲线网格点数")

    @field_validator("lambdas", mode="before")
    @classmethod
    def _split_lambdas(cls, v):
        if isinstance(v, str):
            return [item for item in v.split(",") if item.strip()]
        return v

    @field_validator("lambdas")
    @classmethod
    def _positive_lambdas(cls, v):
        if any(not lam > 0 for lam in v):
            raise ValueError(f"λ 必须全部大于 0，得到 {v}")
        return v

    @field_validator("summand")
    @classmethod
    def _validate_summand(cls, v):
        parse_summand(v)
        return v


class StabilityCheckConfig(RunConfig):
    """stability-check: 复合特征函数与极限特征函数的逐点误差"""

    phi: float = Field(default=2.0, gt=0, description="潜变量离散参数 φ")
    stable: str = Field(default="normal:0,1", description="稳定输入: normal:MU,SIGMA2 或 sas:C,ALPHA")
    t_min: float = Field(default=-20.0, description="t 网格下限")
    t_max: float = Field(default=20.0, description="t 网格上限")
    t_points: int = Field(default=401, ge=1, description="t 网格点数")

    @field_validator("stable")
    @classmethod
    def _validate_stable(cls, v):
        parse_stable(v)
        return v

    @model_validator(mode="after")
    def _validate_grid(self) -> "StabilityCheckConfig":
        if self.t_points > 1 and not self.t_max > self.t_min:
            raise ValueError(f"要求 t_max > t_min，得到 [{self.t_min}, {self.t_max}]")
        return self


class DensityConfig(RunConfig, NefParamsConfig):
    """density: 在网格上列出 NEF 密度"""

    lower: Optional[float] = Field(default=None, description="网格下限，缺省 μ − width·√κ2")
    upper: Optional[float] = Field(default=None, description="网格上限，缺省 μ + width·√κ2")
    width: float = Field(default=40.0, gt=0, description="缺省范围的半宽（以 √κ2 为单位）")
    points: int = Field(default=2001, ge=2, description="网格点数")

    @model_validator(mode="after")
    def _validate_range(self) -> "DensityConfig":
        if self.lower is not None and self.upper is not None and not self.upper > self.lower:
            raise ValueError(f"要求 upper > lower，得到 [{self.lower}, {self.upper}]")
        return self


class SampleConfig(RunConfig, NefParamsConfig):
    """sample: 按随机表示抽取 NEF 样本"""

    n: int = Field(default=1000, ge=1, description="样本量")


# endregion


# region Hydra 批量研究


class NamingConfig(BaseModel):
    """研究命名配置"""

    custom_params: Optional[List[str]] = Field(
        default=None, description="自定义命名参数列表"
    )


class StudyConfig(McStudyConfig):
    """Hydra 批量 Monte Carlo 研究的顶层配置"""

    naming: NamingConfig = Field(default_factory=NamingConfig)

    # 研究名称（生成时设置）
    studyname: str = Field(default="", description="生成的研究名称")

    @model_validator(mode="after")
    def _compute_derived_values(self) -> "StudyConfig":
        """计算派生值：studyname"""
        if not self.studyname:
            self.studyname = self._generate_studyname()
        return self

    def _generate_studyname(self) -> str:
        """
        根据配置生成研究名称。

        命名规则:
        - 前缀: 族名（gamma / ig）
        - 参数: 根据 naming.custom_params 配置，缺省为 n 与 replicas
        - 数值格式: 小数点替换为 p（如 0.5 → 0p5）

        Returns
        -------
        str
            生成的研究名称，如 "gamma_mu3p0_s24p0_phi2p0_n100"。
        """
        parts = [self.family.value]
        custom_params = self.naming.custom_params or ["n", "replicas"]

        for param in custom_params:
            if param in PARAM_ABBREV and PARAM_ABBREV[param] and hasattr(self, param):
                value = getattr(self, param)
                # 格式化数值：小数点替换为 p，负号替换为 m
                if isinstance(value, float):
                    value_str = str(value).replace(".", "p").replace("-", "m")
                else:
                    value_str = str(value)
                parts.append(f"{PARAM_ABBREV[param]}{value_str}")

        return "_".join(parts)


# endregion
