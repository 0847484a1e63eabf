import json

import numpy as np
import pytest

from pa_modelkit.cli import main
from pa_modelkit.gmp import GmpIndex, GmpModel, gmp_design_matrix
from pa_modelkit.persistence import read_dataset, save_model, write_dataset
from pa_modelkit.signals import Dataset

PA = {"pre_fir": [1.0, [0.2, -0.1]], "static_nl": {"type": "rapp", "smoothness": 2.0}, "post_fir": [1.0, 0.05]}


def _config(tmp_path, **kw):
    doc = {
        "seed": 3,
        "num_samples": 2000,
        "signal": {"preset": "single"},
        "pa": PA,
        "feature": {"M": 3},
        "models": [{"type": "drvcnn", "name": "DRVCNN"}, {"type": "gmp", "name": "GMP", "Ka": 3, "La": 2}],
        "train": {"L1": 2, "L2": 1, "batch_size": 128},
        "spectrum": {"nfft": 256},
        "output_dir": str(tmp_path / "out"),
    }
    doc.update(kw)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(doc))
    return path


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as e:
        main([])
    assert e.value.code == 1
    with pytest.raises(SystemExit) as e:
        main(["train"])
    assert e.value.code == 1


def test_missing_files(tmp_path):
    assert main(["generate", "--config", str(tmp_path / "nope.json")]) == 2
    cfg = _config(tmp_path)
    assert main(["train", "--config", str(cfg)]) == 2
    assert main(["generate", "--config", str(cfg)]) == 0
    assert main(["evaluate", "--config", str(cfg), "--models", str(tmp_path / "missing.json")]) == 2


def test_invalid_config_is_usage_error(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["generate", "--config", str(bad)]) == 1
    assert main(["generate", "--config", str(_config(tmp_path, models=[{"type": "rnn"}]))]) == 1


def test_multi_carrier_gmp_unsupported(tmp_path, capsys):
    cfg = _config(tmp_path, signal={"preset": "dual"}, models=[{"type": "gmp", "Ka": 3, "La": 2}])
    assert main(["all", "--config", str(cfg)]) == 3
    assert "multi-carrier GMP unsupported" in capsys.readouterr().err


def test_divergence_exit_code(tmp_path):
    cfg = _config(tmp_path, train={"L1": 3, "L2": 1, "lr": 1e300}, models=[{"type": "dnn"}])
    assert main(["all", "--config", str(cfg)]) == 4


def test_full_pipeline(tmp_path, capsys):
    cfg = _config(tmp_path)
    assert main(["all", "--config", str(cfg)]) == 0
    out = tmp_path / "out"
    for f in ("dataset.csv", "dataset.json", "models/DRVCNN.json", "models/GMP.json", "logs/DRVCNN.csv",
              "report.csv", "report.json", "spectra/DRVCNN_carrier1.csv", "spectra/GMP_carrier1.csv"):
        assert (out / f).exists(), f
    report = (out / "report.csv").read_text().splitlines()
    assert report[0] == "model,coefficients,nmse_db"
    assert report[1].startswith("DRVCNN,193,") and report[2].startswith("GMP,12,")
    log = (out / "logs/DRVCNN.csv").read_text().splitlines()
    assert log[0] == "stage,epoch,mean_mse" and len(log) == 4

    capsys.readouterr()
    assert main(["evaluate", "--config", str(cfg), "--models", str(out / "models/GMP.json"),
                 "--dataset", str(out / "dataset.csv"), "--out", str(tmp_path / "eval")]) == 0
    assert (tmp_path / "eval/report.csv").read_text().count("\n") == 2
    assert len(list((tmp_path / "eval/spectra").iterdir())) == 1


def test_triple_carrier_row(tmp_path):
    cfg = _config(tmp_path, signal={"preset": "triple"}, feature={"M": 2},
                  models=[{"type": "arvtdnn", "name": "A"}], train={"L1": 1, "L2": 1})
    assert main(["all", "--config", str(cfg)]) == 0
    row = (tmp_path / "out/report.csv").read_text().splitlines()[1]
    assert row.split(",")[2].count("/") == 2


def test_planted_gmp_through_cli(tmp_path):
    cfg = _config(tmp_path)
    assert main(["generate", "--config", str(cfg)]) == 0
    ds = read_dataset(tmp_path / "out/dataset.csv")
    idx = GmpIndex(Ka=3, La=2, Kb=1, Mb=1, Lb=1)
    coeffs = np.random.default_rng(0).normal(size=idx.num_terms) * (1 + 0.3j)
    # the test split is predicted from zero history, so plant each split on its own
    cut = ds.num_samples * 3 // 5
    x = ds.inputs[0]
    y = np.r_[gmp_design_matrix(x[:cut], idx) @ coeffs, gmp_design_matrix(x[cut:], idx) @ coeffs]
    planted = Dataset(ds.inputs, y[None], ds.sample_rate_hz, ds.scale_factors)
    write_dataset(planted, tmp_path / "planted.csv")
    model = save_model(GmpModel(idx, coeffs), tmp_path / "planted_gmp.json")
    assert main(["evaluate", "--config", str(cfg), "--dataset", str(tmp_path / "planted.csv"),
                 "--models", str(model), "--out", str(tmp_path / "ev")]) == 0
    doc = json.loads((tmp_path / "ev/report.json").read_text())
    assert doc[0]["nmse_db"][0] == "-inf" or doc[0]["nmse_db"][0] < -120


def test_runs_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir(), b.mkdir()
    for d in (a, b):
        assert main(["all", "--config", str(_config(d))]) == 0
    for f in ("report.csv", "report.json", "models/DRVCNN.json", "models/GMP.json", "dataset.csv"):
        assert (a / "out" / f).read_bytes() == (b / "out" / f).read_bytes(), f


def test_thread_env(tmp_path, monkeypatch):
    monkeypatch.setenv("PA_MODELKIT_THREADS", "1")
    assert main(["generate", "--config", str(_config(tmp_path))]) == 0
    monkeypatch.setenv("PA_MODELKIT_THREADS", "x")
    assert main(["generate", "--config", str(_config(tmp_path))]) == 1
