from pathlib import Path

import pytest

from pa_modelkit.config import config_from_dict, derive_seed, load_config, parse_complex
from pa_modelkit.errors import ConfigurationError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def test_parse_complex():
    assert parse_complex(2) == 2 + 0j
    assert parse_complex([0.2, -0.1]) == 0.2 - 0.1j
    assert parse_complex({"re": 1, "im": 3}) == 1 + 3j
    with pytest.raises(ConfigurationError):
        parse_complex([1, 2, 3])


def test_derive_seed():
    assert derive_seed(1, "train") == derive_seed(1, "train")
    assert derive_seed(1, "train") != derive_seed(1, "carrier1")
    assert derive_seed(1, "train") != derive_seed(2, "train")
    assert 0 <= derive_seed(5, "x") < 2**63


@pytest.mark.parametrize("name,K,M", [("single_carrier", 1, 3), ("dual_carrier", 2, 3), ("triple_carrier", 3, 2)])
def test_shipped_configs(name, K, M):
    cfg = load_config(CONFIGS / f"{name}.json")
    assert cfg.K == K and cfg.feature.M == M and cfg.feature.K == K
    assert cfg.train.L1 == 200 and cfg.train.L2 == 100
    assert all(c.backoff_db == cfg.signal.carriers[0].backoff_db for c in cfg.signal.carriers)


def test_defaults():
    cfg = config_from_dict({})
    assert cfg.K == 1 and [m.type for m in cfg.models] == ["drvcnn"]
    assert cfg.split == (3, 2) and cfg.nfft == 1024


def test_carriers_get_distinct_seeds():
    cfg = config_from_dict({"signal": {"preset": "triple"}})
    assert len({c.seed for c in cfg.signal.carriers}) == 3


@pytest.mark.parametrize("doc", [
    {"models": [{"type": "lstm"}]},
    {"models": [{"type": "drvcnn"}, {"type": "drvcnn"}]},
    {"feature": {"K": 2}},
    {"train": {"momentum": 0.9}},
    {"signal": {"preset": "single", "colour": 1}},
    {"pa": {"gain": 2}},
])
def test_invalid_configs(doc):
    with pytest.raises((ConfigurationError, TypeError)):
        config_from_dict(doc)


def test_gmp_index_from_settings():
    cfg = config_from_dict({"models": [{"type": "gmp", "Ka": 11, "La": 7, "Kb": 3, "Mb": 2, "Lb": 5}]})
    assert cfg.models[0].gmp_index.num_terms == 107
