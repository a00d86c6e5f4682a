import json
import logging
import math
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np
import pandas as pd

from nef_mp import __version__
from nef_mp.core.exceptions import InputDataError

logger = logging.getLogger(__name__)


# =============================================================================
# 通用工具函数
# =============================================================================

def to_jsonable(obj: Any) -> Any:
    """
    递归转换为可 JSON 序列化的对象

    numpy 标量/数组转为 Python 原生类型，非有限浮点数转为 None
    （标准 JSON 不允许 NaN / Infinity）。
    """
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def dumps_json(data, indent: int = 2) -> str:
    """序列化为 JSON 字符串（键顺序保持插入顺序）"""
    return json.dumps(to_jsonable(data), indent=indent, ensure_ascii=False)


def save_to_json(data, filename, indent=2):
    """
    将数据保存为JSON文件

    Args:
        data: 要保存的数据
        filename (str): 输出文件名（包含扩展名）
        indent (int): JSON缩进空格数

    Returns:
        str: 保存的文件路径
    """
    output_path = Path(filename)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    output_path.write_text(dumps_json(data, indent=indent) + "\n", encoding="utf-8")
    logger.info("数据已保存到: %s", output_path.absolute())
    return str(output_path.absolute())


# =============================================================================
# 数据读取
# =============================================================================

def read_series_csv(path: Union[str, Path]) -> np.ndarray:
    """
    读取单列数值 CSV（UTF-8，'.' 小数点，可选一行表头）

    Raises:
        InputDataError: 文件不可读、为空、多列或含非数值
    """
    path = Path(path)
    try:
        frame = pd.read_csv(path, header=None, dtype=str, skip_blank_lines=True, encoding="utf-8")
    except FileNotFoundError:
        raise InputDataError(f"文件不存在: {path}") from None
    except pd.errors.EmptyDataError:
        raise InputDataError(f"文件为空: {path}") from None
    except (OSError, UnicodeDecodeError, pd.errors.ParserError) as e:
        raise InputDataError(f"无法读取 {path}: {e}") from e

    if frame.shape[1] != 1:
        raise InputDataError(f"需要单列数据，{path} 有 {frame.shape[1]} 列")

    text = frame.iloc[:, 0].fillna("").str.strip()
    values = pd.to_numeric(text, errors="coerce")
    # 第一行无法解析为数值时视为表头
    if len(values) and pd.isna(values.iloc[0]):
        text, values = text.iloc[1:], values.iloc[1:]
    if values.empty:
        raise InputDataError(f"{path} 没有数据行")

    bad = values.isna() | ~np.isfinite(values.to_numpy(dtype=float))
    if bad.any():
        row = int(np.argmax(bad.to_numpy()))
        raise InputDataError(f"{path} 第 {row + 1} 个数据行不是有限数值: {text.iloc[row]!r}")
    return values.to_numpy(dtype=float)


def log_returns(prices) -> np.ndarray:
    """
    对数收益率 y_t = log(P_t / P_{t-1})

    Raises:
        InputDataError: 价格少于 2 个或含非正值
    """
    prices = np.asarray(prices, dtype=float).ravel()
    if prices.size < 2:
        raise InputDataError("价格序列至少需要 2 个值")
    if np.any(prices <= 0):
        raise InputDataError("价格必须全部为正")
    return np.diff(np.log(prices))


# =============================================================================
# 随机数流与输出元数据
# =============================================================================

def spawn_seeds(seed: int, count: int) -> list[np.random.SeedSequence]:
    """
    由主种子派生 count 个独立子种子

    第 i 个子流只取决于 (seed, i)，与并行调度无关。
    """
    return np.random.SeedSequence(seed).spawn(count)


def spawn_generators(seed: int, count: int) -> list[np.random.Generator]:
    """spawn_seeds 的 Generator 版本"""
    return [np.random.default_rng(s) for s in spawn_seeds(seed, count)]


def run_metadata(seed: int, flags: dict) -> dict:
    """所有输出都嵌入的元数据 {seed, version, flags}"""
    return {"seed": seed, "version": __version__, "flags": to_jsonable(flags)}


def write_csv(frame: pd.DataFrame, path: Union[str, Path], metadata: Optional[dict] = None) -> str:
    """
    写出 CSV；metadata 以 '# ' 开头的 JSON 注释行写在首行

    读取时使用 pd.read_csv(path, comment="#")。
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        if metadata is not None:
            f.write("# " + json.dumps(to_jsonable(metadata), ensure_ascii=False) + "\n")
        frame.to_csv(f, index=False, lineterminator="\n", float_format="%.12g")
    logger.info("CSV 已保存到: %s", path.absolute())
    return str(path.absolute())
