import json

import pytest

from coop_forecaster.config import (CONFIG_ENV_VAR, DEFAULT_RUN_CONFIG, ModelConfig, RunConfig, config_from_dict,
                                    load_config, save_config)
from coop_forecaster.Utils.errors import ConfigError


def test_defaults_validate():
    DEFAULT_RUN_CONFIG.validate()
    assert DEFAULT_RUN_CONFIG.model.d % DEFAULT_RUN_CONFIG.model.n_heads == 0
    assert DEFAULT_RUN_CONFIG.labels.tau_iou == 0.1
    assert DEFAULT_RUN_CONFIG.eval.miss_threshold == 2.0


def test_constraint_violations_name_field_and_rule():
    with pytest.raises(ConfigError, match=r"model\.K: K ≥ 1"):
        ModelConfig(K=0).validate()
    with pytest.raises(ConfigError, match=r"model\.d"):
        ModelConfig(d=130, n_heads=16).validate()
    with pytest.raises(ConfigError, match=r"train\.fraction"):
        config_from_dict({"train": {"fraction": 0.0}})


def test_unknown_keys_and_bad_types_are_rejected():
    with pytest.raises(ConfigError, match=r"model\.width: unknown key"):
        config_from_dict({"model": {"width": 3}})
    with pytest.raises(ConfigError, match="unknown section"):
        config_from_dict({"optimizer": {}})
    with pytest.raises(ConfigError, match="expected an integer"):
        config_from_dict({"train": {"epochs": 2.5}})
    with pytest.raises(ConfigError, match="expected a list"):
        config_from_dict({"eval": {"mask_views": "vehicle"}})


def test_save_then_load_gives_equal_config(tmp_path):
    config = config_from_dict({"model": {"d": 32, "n_heads": 4}, "eval": {"mask_views": ["vehicle"]}})
    path = str(tmp_path / "run.json")
    save_config(config, path)
    assert load_config(path) == config
    assert load_config(path).eval.mask_views == ("vehicle",)


def test_environment_variable_supplies_the_config_path(tmp_path, monkeypatch):
    path = tmp_path / "env.json"
    path.write_text(json.dumps({"train": {"epochs": 3}}))
    monkeypatch.setenv(CONFIG_ENV_VAR, str(path))
    assert load_config().train.epochs == 3
    monkeypatch.delenv(CONFIG_ENV_VAR)
    assert load_config() == RunConfig()


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(str(tmp_path / "absent.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config(str(bad))
