"""
OmegaConf 自定义 Resolver

config.yaml 的扫参列表用 ${sweep:start,stop,step} 生成，例如
    n: ${sweep:100,600,400}          # = "100,500"

必须在 @hydra.main 之前调用 register_resolvers()。
"""
import numpy as np
from omegaconf import OmegaConf


def sweep_values(start, stop, step) -> list:
    """[start, stop) 上的等差序列，整数值输出为 int"""
    start, stop, step = float(start), float(stop), float(step)
    if step == 0:
        raise ValueError("步长不能为 0")
    count = max(0, int(np.ceil((stop - start) / step - 1e-10)))
    values = [round(start + k * step, 10) for k in range(count)]
    return [int(v) if v.is_integer() else v for v in values]


def register_resolvers() -> None:
    """注册 sweep resolver：输出逗号分隔字符串，供 hydra-list-sweeper 展开"""
    OmegaConf.register_new_resolver(
        "sweep",
        lambda start, stop, step=1: ",".join(str(v) for v in sweep_values(start, stop, step)),
        replace=True,
    )
