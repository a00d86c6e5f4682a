# ============================================================================ #
#                         配置构建函数                                          #
# ============================================================================ #
"""
从配置（Pydantic 模型或字典）构建计算用 dataclass 的函数。

- parse_summand / parse_stable: 解析 "exp:MEAN"、"normal:MU,SIGMA2"、"sas:C,ALPHA"
- build_family: 构建混合族
- build_nef_params: 构建 NEF 参数
"""
from typing import Any, Mapping, Union

from nef_mp.core.context import MixingFamily, NefParams, StableCfSpec, SummandSpec
from nef_mp.core.exceptions import DomainError
from nef_mp.core.families import get_family


def _parse_numbers(text: str, count: int, spec: str) -> list[float]:
    """解析逗号分隔的 count 个数"""
    items = [item.strip() for item in text.split(",")]
    if len(items) != count:
        raise DomainError(f"{spec} 需要 {count} 个数值，得到 {text!r}")
    try:
        return [float(item) for item in items]
    except ValueError:
        raise DomainError(f"{spec} 含有非数值: {text!r}") from None


def _split_spec(text: str) -> tuple[str, str]:
    kind, sep, body = text.strip().partition(":")
    if not sep:
        raise DomainError(f"格式应为 KIND:ARGS，得到 {text!r}")
    return kind.strip().lower(), body


def parse_summand(text: str) -> SummandSpec:
    """
    解析被加项规格。

    - exp:MEAN → 均值为 MEAN 的指数分布
    - normal:MU,SIGMA2 → 正态分布
    """
    kind, body = _split_spec(text)
    if kind == "exp":
        (mean,) = _parse_numbers(body, 1, "exp:MEAN")
        return SummandSpec.exponential(mean)
    if kind == "normal":
        mu, sigma2 = _parse_numbers(body, 2, "normal:MU,SIGMA2")
        return SummandSpec.normal(mu, sigma2)
    raise DomainError(f"未知的被加项类型: {kind!r}（可选 exp / normal）")


def parse_stable(text: str) -> StableCfSpec:
    """
    解析稳定输入规格。

    - normal:MU,SIGMA2 → 带漂移正态
    - sas:C,ALPHA → 对称 α-稳定
    """
    kind, body = _split_spec(text)
    if kind == "normal":
        mu, sigma2 = _parse_numbers(body, 2, "normal:MU,SIGMA2")
        return StableCfSpec.normal_drift(mu, sigma2)
    if kind == "sas":
        c, alpha = _parse_numbers(body, 2, "sas:C,ALPHA")
        return StableCfSpec.symmetric_alpha_stable(c, alpha)
    raise DomainError(f"未知的稳定输入类型: {kind!r}（可选 normal / sas）")


def _get(cfg: Union[Mapping[str, Any], Any], key: str):
    return cfg[key] if isinstance(cfg, Mapping) else getattr(cfg, key)


def build_family(cfg) -> MixingFamily:
    """
    根据配置的 family 字段构建混合族。

    Args:
        cfg: 含 family 字段的配置（Pydantic 模型或字典）
    """
    family = _get(cfg, "family")
    return get_family(getattr(family, "value", family))


def build_nef_params(cfg) -> NefParams:
    """
    根据配置的 mu / sigma2 / phi 字段构建 NEF 参数。

    Args:
        cfg: 含 mu, sigma2, phi 的配置（Pydantic 模型或字典）
    """
    return NefParams(
        mu=float(_get(cfg, "mu")),
        sigma2=float(_get(cfg, "sigma2")),
        phi=float(_get(cfg, "phi")),
    )
