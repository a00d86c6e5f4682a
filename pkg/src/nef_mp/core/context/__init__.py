# ============================================================================ #
#                          配置类统一导出                                      #
# ============================================================================ #
"""
core/context 子包

集中管理数值计算使用的不可变 dataclass，按领域分文件组织：
  - family.py: 混合族描述（FamilyTag, MixingFamily）
  - params.py: 参数（GigParams, NefParams, NormalParams, MpCountParams, SummandSpec, StableCfSpec）
  - results.py: 结果（EStepRecord, FitResult, StudySummary）

使用方式：
    from nef_mp.core.context import NefParams, MixingFamily, FitResult
"""

# 混合族
from nef_mp.core.context.family import (
    FamilyTag,
    MixingFamily,
)

# 参数
from nef_mp.core.context.params import (
    GigParams,
    NefParams,
    NormalParams,
    MpCountParams,
    SummandKind,
    SummandSpec,
    StableKind,
    StableCfSpec,
)

# 结果
from nef_mp.core.context.results import (
    EStepRecord,
    FitMethod,
    FitResult,
    StudySummary,
)

__all__ = [
    # 混合族
    "FamilyTag",
    "MixingFamily",
    # 参数
    "GigParams",
    "NefParams",
    "NormalParams",
    "MpCountParams",
    "SummandKind",
    "SummandSpec",
    "StableKind",
    "StableCfSpec",
    # 结果
    "EStepRecord",
    "FitMethod",
    "FitResult",
    "StudySummary",
]
