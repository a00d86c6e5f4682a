# ============================================================================ #
#                              异常类型                                        #
# ============================================================================ #
"""
库内统一使用的异常层次：
  - NefError: 所有库异常的基类
  - DomainError: 参数或输入超出定义域
  - UnsupportedFamilyError: 混合族不支持该操作（GHS 只支持累积量）
  - InadmissibleEstimateError: 矩估计无可行根
  - NumericalFailureError: 迭代中的数值失败（携带迭代编号）
  - MStepDomainError: M 步反函数参数越界
  - InputDataError: CLI 输入数据不可读、为空或非数值

库代码只抛出异常，不打印、不退出；退出码映射在 cli.py 中完成。
"""
from typing import Optional


class NefError(Exception):
    """库异常基类"""


class DomainError(NefError, ValueError):
    """参数不在定义域内"""


class UnsupportedFamilyError(NefError, ValueError):
    """该混合族不支持此操作"""

    def __init__(self, family: str, operation: str):
        self.family = family
        self.operation = operation
        super().__init__(f"混合族 {family} 不支持操作: {operation}")


class InadmissibleEstimateError(NefError):
    """矩估计二次方程没有满足 φ>0 且 σ²>0 的根"""


class NumericalFailureError(NefError):
    """迭代计算中出现非有限值等数值失败（携带迭代编号）"""

    def __init__(self, message: str, iteration: Optional[int] = None):
        self.iteration = iteration
        if iteration is not None:
            message = f"[迭代 {iteration}] {message}"
        super().__init__(message)


class MStepDomainError(NumericalFailureError):
    """M 步中 d′ 的反函数参数越界"""


class InputDataError(NefError, ValueError):
    """输入数据错误"""
