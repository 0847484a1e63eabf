import hashlib

import numpy as np
import pytest

from pa_modelkit.errors import ConfigurationError
from pa_modelkit.gmp import GmpIndex, GmpModel
from pa_modelkit.models import build_arvtdnn, build_dnn, build_drvcnn, predict_series
from pa_modelkit.persistence import (
    dataset_header,
    load_model,
    model_from_dict,
    model_to_dict,
    read_dataset,
    save_model,
    write_dataset,
)
from pa_modelkit.signals import PaOracleConfig, preset_signal, synthesize_dataset


@pytest.fixture(scope="module")
def dual():
    return synthesize_dataset(preset_signal("dual", seed=6), PaOracleConfig(), 1500)


def test_header():
    assert dataset_header(2) == ["n", "I_in_1", "Q_in_1", "I_in_2", "Q_in_2",
                                 "I_out_1", "Q_out_1", "I_out_2", "Q_out_2"]


def test_dataset_round_trip(tmp_path, dual):
    path, side = write_dataset(dual, tmp_path / "d.csv")
    assert side.exists()
    lines = path.read_text().splitlines()
    assert len(lines) == dual.num_samples + 1
    assert "I_in_2" in lines[0].split(",")
    back = read_dataset(path)
    assert back.K == 2 and back.sample_rate_hz == dual.sample_rate_hz
    assert back.scale_factors == dual.scale_factors
    np.testing.assert_array_equal(back.inputs, dual.inputs)
    np.testing.assert_array_equal(back.outputs, dual.outputs)


def test_dataset_bytes_are_stable(tmp_path, dual):
    a, _ = write_dataset(dual, tmp_path / "a.csv")
    b, _ = write_dataset(synthesize_dataset(preset_signal("dual", seed=6), PaOracleConfig(), 1500), tmp_path / "b.csv")
    assert hashlib.sha256(a.read_bytes()).digest() == hashlib.sha256(b.read_bytes()).digest()


def test_header_mismatch(tmp_path, dual):
    path, side = write_dataset(dual, tmp_path / "d.csv")
    side.write_text(side.read_text().replace('"K": 2', '"K": 1'))
    with pytest.raises(ConfigurationError):
        read_dataset(path)


@pytest.mark.parametrize("model", [
    build_drvcnn(2, 3, seed=3),
    build_arvtdnn(2, 3, seed=3),
    build_dnn(2, 3, seed=3),
])
def test_model_round_trip(tmp_path, dual, model):
    path = save_model(model, tmp_path / "m.json", {"name": "x"})
    back = load_model(path)
    assert type(back) is type(model)
    for k, v in model.parameters().items():
        np.testing.assert_array_equal(back.parameters()[k], v)
    np.testing.assert_array_equal(predict_series(back, dual.inputs), predict_series(model, dual.inputs))
    meta = model_to_dict(model)["meta"]
    assert meta["K"] == 2 and meta["M"] == 3 and meta["flatten_order"]


def test_frozen_flag_survives(tmp_path):
    from dataclasses import replace

    m = replace(build_drvcnn(1, 3), frozen_conv=True)
    assert load_model(save_model(m, tmp_path / "m.json")).frozen_conv


def test_gmp_round_trip():
    idx = GmpIndex(Ka=3, La=2, Kb=1, Mb=1, Lb=2)
    m = GmpModel(idx, np.arange(idx.num_terms) * (1 - 0.5j), False, -40.0)
    back = model_from_dict(model_to_dict(m))
    assert back.index == idx
    np.testing.assert_array_equal(back.coeffs, m.coeffs)
    assert model_to_dict(m)["meta"]["index_arrays"]["Kb"] == 1


def test_unknown_model_type():
    with pytest.raises(ConfigurationError):
        model_from_dict({"meta": {"model_type": "lstm"}, "params": {}})
