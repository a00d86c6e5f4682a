"""
共享 fixture
"""
import numpy as np
import pytest

from nef_mp.core.context import NefParams
from nef_mp.core.families import GAMMA
from nef_mp.core.nef import sample_nef


@pytest.fixture
def returns_csv(tmp_path):
    """带表头的单列收益率 CSV（NG(3, 4, 2) 的 300 个抽样）"""
    y = sample_nef(NefParams(3.0, 4.0, 2.0), GAMMA, 300, np.random.default_rng(42))
    path = tmp_path / "returns.csv"
    path.write_text("r\n" + "\n".join(f"{v:.10f}" for v in y) + "\n", encoding="utf-8")
    return path
