"""Configuration loading and validation."""

import json

import pytest

from lad.config import PipelineConfig, config_from_dict, load_config
from lad.errors import ConfigError


class TestValidation:
    def test_defaults_valid(self):
        cfg = PipelineConfig()
        assert cfg.k == 2
        assert cfg.upsample.factor == 8

    def test_k_must_be_at_least_two(self):
        with pytest.raises(ConfigError):
            config_from_dict({"k": 1})

    def test_factor_whitelist(self):
        with pytest.raises(ConfigError):
            config_from_dict({"upsample": {"factor": 3}})
        for factor in (1, 2, 4, 8, 16, 32):
            cfg = config_from_dict({"upsample": {"factor": factor}})
            assert cfg.upsample.factor == factor

    def test_area_fraction_ordering(self):
        with pytest.raises(ConfigError):
            config_from_dict({"mask_filter": {"min_area_frac": 0.5, "max_area_frac": 0.1}})

    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigError):
            config_from_dict({"not_a_key": 1})
        with pytest.raises(ConfigError):
            config_from_dict({"match": {"bogus": 1}})


class TestLoading:
    def test_missing_path_gives_defaults(self):
        assert load_config(None).category == "default"

    def test_partial_profile_overrides(self, tmp_path):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps({"category": "grids", "match": {"bin_score": -2.0}}))
        cfg = load_config(p)
        assert cfg.category == "grids"
        assert cfg.match.bin_score == -2.0
        assert cfg.match.iters == 100  # untouched default

    def test_invalid_json_is_config_error(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{nope")
        with pytest.raises(ConfigError):
            load_config(p)

    def test_derived_params_round_trip(self):
        cfg = config_from_dict({"dcga": {"pool_mode": "gap", "variant": "literal"}})
        params = cfg.dcga_params()
        assert params.pool_mode == "gap" and params.variant == "literal"
        sp = cfg.score_params(out_hw=(64, 64))
        assert sp.out_hw == (64, 64) and sp.seed == cfg.seed
