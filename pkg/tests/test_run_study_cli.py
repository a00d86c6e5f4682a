from pathlib import Path

import pytest

import run_study as rs
from nef_mp.preprocess.config.models import StudyConfig


def test_has_hydra_config_override_detects_split_and_inline_forms():
    assert rs._has_hydra_config_override(["--config-path", "conf"])
    assert rs._has_hydra_config_override(["--config-name=config"])
    assert not rs._has_hydra_config_override(["--multirun"])


def test_inject_selected_config_appends_hydra_args(tmp_path: Path):
    args = ["--multirun"]
    updated = rs._inject_selected_config(args, str(tmp_path / "conf" / "custom.yaml"))

    assert updated[:1] == ["--multirun"]
    assert updated[1:3] == ["--config-path", str((tmp_path / "conf").resolve())]
    assert updated[-2:] == ["--config-name", "custom"]


def test_prepare_cli_args_returns_original_when_override_present():
    """手动指定 --config-path 时直接返回原始参数。"""
    argv = ["run_study.py", "--multirun", "--config-path", "conf"]
    assert rs._prepare_cli_args(argv) == argv


def test_prepare_cli_args_without_config_file_uses_default():
    """未指定 --config-file 时使用脚本旁的 config.yaml。"""
    argv = ["run_study.py", "--multirun", "n=50"]
    assert rs._prepare_cli_args(argv) == argv


@pytest.mark.parametrize("split", [True, False], ids=["split", "inline"])
def test_prepare_cli_args_injects_config_file(tmp_path: Path, split):
    """--config-file 转换为 Hydra 参数，其他参数保持顺序。"""
    conf_dir = tmp_path / "conf"
    conf_dir.mkdir()
    selected_file = conf_dir / "picked.yaml"
    selected_file.write_text("family: ig\nn: 50\n", encoding="utf-8")

    flag = ["--config-file", str(selected_file)] if split else [f"--config-file={selected_file}"]
    updated = rs._prepare_cli_args(["run_study.py", "--multirun", *flag, "replicas=10"])

    assert updated[0] == "run_study.py"
    assert updated[1:3] == ["--multirun", "replicas=10"]
    assert "--config-path" in updated
    assert updated[-1] == "picked"


def test_prepare_cli_args_missing_file_raises(tmp_path: Path):
    with pytest.raises(ValueError, match="配置文件不存在"):
        rs._prepare_cli_args(["run_study.py", f"--config-file={tmp_path / 'none.yaml'}"])


def test_prepare_cli_args_missing_value_raises():
    with pytest.raises(ValueError):
        rs._prepare_cli_args(["run_study.py", "--config-file"])


def test_prepare_cli_args_conflicting_options_raise():
    with pytest.raises(ValueError):
        rs._prepare_cli_args(["run_study.py", "--config-name=config", "--config-file=a.yaml"])


def test_extract_key_params():
    config = StudyConfig(family="ig", n=50, replicas=4)
    summary = {"completed": 3, "requested": 4, "mm_inadmissible_rate": 0.25}
    params = rs._extract_key_params(config, summary)

    assert params["族"] == "ig"
    assert params["n"] == "50"
    assert params["有效/请求"] == "3/4"
    assert params["MM 不可行率"] == "25.0%"


def test_generate_index_md(monkeypatch, tmp_path: Path):
    """索引表包含每组研究一行，并保留审阅备注列。"""
    monkeypatch.setattr(rs, "RESULTS_DIR", tmp_path)
    monkeypatch.setattr(
        rs,
        "_run_registry",
        [
            {"number": 1, "studyname": "001_gamma_n100_r100", "params": {"族": "gamma", "n": "100"}},
            {"number": 2, "studyname": "002_ig_n100_r100", "params": {"族": "ig", "φ": "2.0"}},
        ],
    )
    rs._generate_index_md()

    text = (tmp_path / "_index.md").read_text(encoding="utf-8")
    assert text.startswith("# 研究索引表")
    assert "| 编号 | 研究名称 | 族 | n | φ | 审阅备注 |" in text
    assert "| 001 | `001_gamma_n100_r100` | gamma | 100 | - |  |" in text
    assert "| 002 | `002_ig_n100_r100` | ig | - | 2.0 |  |" in text


def test_generate_index_md_skips_empty_registry(monkeypatch, tmp_path: Path):
    monkeypatch.setattr(rs, "RESULTS_DIR", tmp_path)
    monkeypatch.setattr(rs, "_run_registry", [])
    rs._generate_index_md()
    assert not (tmp_path / "_index.md").exists()
