import pytest

from graph_unlearn import ConfigError, RunConfig, load_config


def test_defaults_validate():
    assert RunConfig().validate() == []


def test_file_parsing(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(
        "# comment line\n"
        "model = \"gcn2\"\n"
        "k = 2\n"
        "reg_lambda = 0.1\n"
        "request_kind = edge   # trailing comment\n"
        "with_oracle = false\n"
        "ratios = \"0.01,0.05\"\n")
    cfg = load_config(path)
    assert cfg.model == "gcn2"
    assert cfg.k == 2
    assert cfg.reg_lambda == 0.1
    assert cfg.request_kind == "edge"
    assert cfg.with_oracle is False
    assert cfg.ratio_list() == [0.01, 0.05]


def test_env_overrides_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("k = 2\n")
    cfg = load_config(path, env={"GRAPH_UNLEARN_K": "3"})
    assert cfg.k == 3


def test_explicit_overrides_beat_env(tmp_path):
    cfg = load_config(None, env={"GRAPH_UNLEARN_K": "3"}, overrides={"k": 4})
    assert cfg.k == 4


def test_unknown_key_rejected(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("mystery = 1\n")
    with pytest.raises(ConfigError, match="unknown configuration key"):
        load_config(path)


def test_bad_value_rejected(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("k = lots\n")
    with pytest.raises(ConfigError, match="integer"):
        load_config(path)


def test_validation_catches_bad_ratio():
    cfg = RunConfig(request_ratio=0.0)
    assert any("request_ratio" in p for p in cfg.validate())


def test_validation_requires_dataset_when_not_synthetic(tmp_path):
    cfg = RunConfig(synthetic=False, dataset="")
    assert any("dataset" in p for p in cfg.validate())
    cfg2 = RunConfig(synthetic=False, dataset=str(tmp_path / "nope"))
    assert any("not found" in p for p in cfg2.validate())
