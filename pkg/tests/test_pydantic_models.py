"""
测试 preprocess.config 的 Pydantic 模型、OmegaConf resolver 与 preprocess.builders。

这些测试验证配置验证、研究命名和 dataclass 构建。
"""
import pytest
from omegaconf import OmegaConf
from pydantic import ValidationError

from nef_mp.core.context import FamilyTag, NefParams, StableKind, SummandKind
from nef_mp.core.exceptions import DomainError
from nef_mp.preprocess.builders import build_family, build_nef_params, parse_stable, parse_summand
from nef_mp.preprocess.config.models import (
    DensityConfig,
    FamilyEnum,
    FitConfig,
    McStudyConfig,
    RunConfig,
    SampleConfig,
    StabilityCheckConfig,
    StudyConfig,
    SumsDemoConfig,
)
from nef_mp.preprocess.config.resolvers import register_resolvers, sweep_values


# region 公共配置测试
class TestRunConfig:
    """公共配置测试"""

    def test_default_values(self):
        config = RunConfig()
        assert config.family == FamilyEnum.GAMMA
        assert config.seed == 2024
        assert config.workers == 1
        assert config.out is None

    def test_extra_fields_ignored(self):
        """测试忽略 argparse 的 command 等多余键"""
        config = SampleConfig(command="sample", family="ig", n=10)
        assert config.family == FamilyEnum.INVERSE_GAUSSIAN
        assert not hasattr(config, "command")

    def test_verbose_and_quiet(self):
        with pytest.raises(ValidationError):
            RunConfig(verbose=True, quiet=True)

    def test_both_only_for_fit(self):
        """测试 family=both 只能用于 fit"""
        with pytest.raises(ValidationError):
            McStudyConfig(family="both")
        assert FitConfig(input="x.csv", family="both").family == FamilyEnum.BOTH

    @pytest.mark.parametrize("kwargs", [{"seed": -1}, {"workers": 0}, {"family": "normal"}])
    def test_invalid_values(self, kwargs):
        with pytest.raises(ValidationError):
            RunConfig(**kwargs)


# endregion


# region 子命令配置测试
class TestFitConfig:
    """fit 配置测试"""

    def test_defaults(self):
        config = FitConfig(input="returns.csv")
        assert config.epsilon == 1e-4
        assert config.max_iter == 500
        assert config.hessian_check

    def test_missing_input(self):
        with pytest.raises(ValidationError):
            FitConfig()

    def test_prices_and_returns_exclusive(self):
        with pytest.raises(ValidationError):
            FitConfig(input="x.csv", prices=True, returns=True)

    def test_invalid_epsilon(self):
        with pytest.raises(ValidationError):
            FitConfig(input="x.csv", epsilon=0.0)


class TestMcStudyConfig:
    """mc-study 配置测试"""

    def test_params(self):
        config = McStudyConfig(mu=-1.0, sigma2=0.5, phi=3.0, n=50)
        assert build_nef_params(config) == NefParams(-1.0, 0.5, 3.0)

    @pytest.mark.parametrize("kwargs", [{"n": 2}, {"replicas": 0}, {"sigma2": 0.0}, {"phi": -1.0}])
    def test_invalid(self, kwargs):
        with pytest.raises(ValidationError):
            McStudyConfig(**kwargs)


class TestSumsDemoConfig:
    """sums-demo 配置测试"""

    def test_lambdas_from_string(self):
        config = SumsDemoConfig(lambdas="5,50,500")
        assert config.lambdas == [5.0, 50.0, 500.0]

    @pytest.mark.parametrize("lambdas", ["", "5,-1"])
    def test_invalid_lambdas(self, lambdas):
        with pytest.raises(ValidationError):
            SumsDemoConfig(lambdas=lambdas)

    @pytest.mark.parametrize("summand", ["exp:-1", "poisson:2", "normal:1"])
    def test_invalid_summand(self, summand):
        with pytest.raises(ValidationError):
            SumsDemoConfig(summand=summand)


class TestStabilityCheckConfig:
    """stability-check 配置测试"""

    def test_valid(self):
        config = StabilityCheckConfig(stable="sas:1,1.5", t_min=-5, t_max=5, t_points=11)
        assert config.stable == "sas:1,1.5"

    def test_invalid_grid(self):
        with pytest.raises(ValidationError):
            StabilityCheckConfig(t_min=1.0, t_max=-1.0)

    def test_invalid_alpha(self):
        with pytest.raises(ValidationError):
            StabilityCheckConfig(stable="sas:1,2.5")


class TestDensityConfig:
    """density 配置测试"""

    def test_defaults(self):
        config = DensityConfig()
        assert config.lower is None
        assert config.points == 2001

    def test_invalid_range(self):
        with pytest.raises(ValidationError):
            DensityConfig(lower=2.0, upper=1.0)


# endregion


# region 研究配置测试
class TestStudyConfig:
    """Hydra 研究配置测试"""

    def test_default_studyname(self):
        config = StudyConfig(family="ig", n=100, replicas=200)
        assert config.studyname == "ig_n100_r200"

    def test_custom_studyname(self):
        """测试自定义命名参数与小数点替换"""
        config = StudyConfig(
            n=100, replicas=1000, phi=0.5, mu=-1.5, naming={"custom_params": ["n", "phi", "mu", "replicas"]}
        )
        assert config.studyname == "gamma_n100_phi0p5_mum1p5_r1000"

    def test_unknown_params_skipped(self):
        config = StudyConfig(naming={"custom_params": ["n", "unknown", "family"]})
        assert config.studyname == "gamma_n100"

    def test_explicit_studyname_kept(self):
        assert StudyConfig(studyname="baseline").studyname == "baseline"

    def test_from_omegaconf(self):
        """测试由 OmegaConf 解析后的配置构建（含 hydra 扫参等多余键）"""
        register_resolvers()
        cfg = OmegaConf.create(
            {
                "hydra": {"mode": "MULTIRUN", "sweeper": {"grid_params": {"n": "${sweep:100,600,400}"}}},
                "family": "gamma",
                "mu": 3.0,
                "sigma2": 6.0,
                "phi": 0.5,
                "n": 50,
                "replicas": 500,
                "drop_not_converged": True,
                "naming": {"custom_params": ["n", "sigma2"]},
            }
        )
        resolved = OmegaConf.to_container(cfg, resolve=True)
        assert resolved["hydra"]["sweeper"]["grid_params"]["n"] == "100,500"
        config = StudyConfig(**resolved)
        assert config.phi == 0.5
        assert config.replicas == 500
        assert config.drop_not_converged
        assert config.studyname == "gamma_n50_s26p0"


# endregion


# region resolver 与构建函数测试
class TestResolvers:
    """OmegaConf resolver 测试"""

    @pytest.fixture(autouse=True)
    def _register(self):
        register_resolvers()

    def test_sweep(self):
        cfg = OmegaConf.create({"n": "${sweep:30,130,70}", "phi": "${sweep:1,4,1}"})
        resolved = OmegaConf.to_container(cfg, resolve=True)
        assert resolved["n"] == "30,100"
        assert resolved["phi"] == "1,2,3"

    def test_float_values(self):
        assert sweep_values(0.5, 2, 0.5) == [0.5, 1, 1.5]
        assert sweep_values(0.1, 0.4, 0.1) == [0.1, 0.2, 0.3]

    def test_descending_and_empty(self):
        assert sweep_values(3, 0, -1) == [3, 2, 1]
        assert sweep_values(5, 5, 1) == []

    def test_zero_step(self):
        with pytest.raises(ValueError):
            sweep_values(1, 2, 0)


class TestBuilders:
    """构建函数测试"""

    def test_parse_summand(self):
        assert parse_summand("exp:2").kind == SummandKind.EXPONENTIAL
        normal = parse_summand(" normal: 1, 0.5 ")
        assert (normal.kind, normal.mu, normal.sigma2) == (SummandKind.NORMAL, 1.0, 0.5)

    def test_parse_stable(self):
        sas = parse_stable("sas:1.5,0.8")
        assert sas.kind == StableKind.SYMMETRIC_ALPHA_STABLE
        assert (sas.c, sas.alpha) == (1.5, 0.8)
        assert parse_stable("normal:0,1").kind == StableKind.NORMAL_DRIFT

    @pytest.mark.parametrize("text", ["exp", "exp:a", "normal:1,2,3", "gamma:1"])
    def test_invalid_summand(self, text):
        with pytest.raises(DomainError):
            parse_summand(text)

    def test_build_family(self):
        assert build_family({"family": "ig"}).tag == FamilyTag.INVERSE_GAUSSIAN
        assert build_family(McStudyConfig(family="gamma")).tag == FamilyTag.GAMMA
        with pytest.raises(DomainError):
            build_family({"family": "both"})


# endregion
