"""
Tests for experiment configuration loading and overrides.
"""

from pathlib import Path

import numpy as np
import pytest

from car_portfolio.errors import ConfigurationError
from car_portfolio.utils.config_manager import ExperimentConfig, load_config, parse_float_list
from car_portfolio.utils.paths import CONFIGS_PATH


class TestDefaults:
    def test_experiment_setting(self):
        config = ExperimentConfig()
        assert config.datasets == ["1", "2"]
        assert config.alpha == 0.05
        assert config.horizon == 5.0
        assert config.deltas == [0.3, 0.6, 0.9]
        assert config.risk_spec().z_alpha < 0.0

    def test_grids(self):
        config = ExperimentConfig(sigma11_min=0.5, sigma11_max=1.5, sigma11_points=3, delta_grid_points=4)
        np.testing.assert_allclose(config.sigma11_grid(), [0.5, 1.0, 1.5])
        assert config.delta_grid()[0] == 0.0
        assert config.delta_grid()[-1] == pytest.approx(0.99)

    def test_no_path_gives_defaults(self):
        assert load_config(None).to_dict() == ExperimentConfig().to_dict()

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"alpha": 0.5},
            {"horizon": 0.0},
            {"deltas": [1.0]},
            {"deltas": []},
            {"sigma11_min": 2.0, "sigma11_max": 1.0},
            {"datasets": []},
            {"x": -1.0},
        ],
    )
    def test_invalid_values(self, kwargs):
        with pytest.raises(ConfigurationError):
            ExperimentConfig(**kwargs)


class TestLoadConfig:
    def test_shipped_configs(self):
        default = load_config(CONFIGS_PATH / "default.toml")
        assert default.deltas == [0.3, 0.6, 0.9]
        assert default.mc.paths == 1_000_000
        assert default.name == "default"

        inline = load_config(CONFIGS_PATH / "inline_market.toml")
        datasets = inline.market_datasets()
        assert len(datasets) == 1 and datasets[0].name == "inline"
        assert inline.horizon == 50.0
        assert inline.mc.paths == 200_000

    def test_nested_tables(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text(
            "[market]\ndatasets = [\"2\"]\n\n[risk]\nhorizon = 10.0\n\n"
            "[oracle]\nrestarts = 8\n\n[output]\ndir = \"results\"\nlog_level = \"DEBUG\"\n"
        )
        config = load_config(path)
        assert config.name == "run"
        assert config.datasets == ["2"]
        assert config.horizon == 10.0
        assert config.oracle.restarts == 8
        assert config.output_dir == Path("results")
        assert config.log_level == "DEBUG"

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("[risk]\nalpha = 0.05\nconfidence = 0.9\n")
        with pytest.raises(ConfigurationError, match="confidence"):
            load_config(path)

    def test_unknown_table(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("[plots]\nformat = \"png\"\n")
        with pytest.raises(ConfigurationError):
            load_config(path)

    def test_incomplete_inline_market(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("[market]\ngammas = [0.2, 0.3]\nb = [0.1, 0.1]\n")
        with pytest.raises(ConfigurationError):
            load_config(path)

    def test_invalid_sub_config(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("[monte_carlo]\npaths = 1\n")
        with pytest.raises(ConfigurationError):
            load_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_config(tmp_path / "missing.toml")

    def test_malformed_file(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("[risk\nalpha = ")
        with pytest.raises(ConfigurationError):
            load_config(path)


class TestOverrides:
    def test_none_is_ignored(self):
        config = ExperimentConfig()
        assert config.with_overrides(alpha=None, dataset=None) is config

    def test_flags_are_routed(self, tmp_path):
        config = ExperimentConfig().with_overrides(dataset="2", paths=1000, seed=3, out=tmp_path, deltas=[0.1])
        assert config.datasets == ["2"]
        assert config.mc.paths == 1000 and config.mc.seed == 3
        assert config.output_dir == tmp_path
        assert config.deltas == [0.1]

    def test_dataset_flag_replaces_inline_market(self):
        inline = load_config(CONFIGS_PATH / "inline_market.toml")
        config = inline.with_overrides(dataset="1")
        assert [d.name for d in config.market_datasets()] == ["1"]

    def test_invalid_override(self):
        with pytest.raises(ConfigurationError):
            ExperimentConfig().with_overrides(alpha=0.7)
        with pytest.raises(ConfigurationError):
            ExperimentConfig().with_overrides(paths=1)

    def test_unknown_override(self):
        with pytest.raises(ConfigurationError):
            ExperimentConfig().with_overrides(colour="red")

    def test_parse_float_list(self):
        assert parse_float_list("0.3, 0.6,0.9") == [0.3, 0.6, 0.9]
        assert parse_float_list(None) is None
        with pytest.raises(ConfigurationError):
            parse_float_list("0.3,abc")
