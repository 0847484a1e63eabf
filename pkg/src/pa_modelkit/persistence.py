"""Dataset CSV/JSON files and model JSON documents."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .features import FLATTEN_ORDER
from .gmp import COLUMN_ORDER, GmpIndex, GmpModel
from .neuralcore import AttentionParams, ConvLayer, DenseLayer, DrvcnnModel, MlpModel
from .signals import Dataset

FORMAT_VERSION = 1


def dataset_header(K: int) -> list[str]:
    cols = ["n"]
    for side in ("in", "out"):
        for k in range(1, K + 1):
            cols += [f"I_{side}_{k}", f"Q_{side}_{k}"]
    return cols


def sidecar_path(csv_path) -> Path:
    return Path(csv_path).with_suffix(".json")


def write_dataset(ds: Dataset, csv_path) -> tuple[Path, Path]:
    """Write the sample CSV (17 significant digits) and its JSON sidecar."""
    csv_path = Path(csv_path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    cols = [np.arange(ds.num_samples, dtype=np.float64)]
    for block in (ds.inputs, ds.outputs):
        for x in block:
            cols += [x.real, x.imag]
    table = np.column_stack(cols)
    fmt = ["%d"] + ["%.17g"] * (table.shape[1] - 1)
    np.savetxt(csv_path, table, fmt=fmt, delimiter=",", header=",".join(dataset_header(ds.K)), comments="")
    side = {
        "sample_rate_hz": ds.sample_rate_hz,
        "K": ds.K,
        "num_samples": ds.num_samples,
        "scale_factors": list(ds.scale_factors),
        **{k: v for k, v in ds.meta.items()},
    }
    json_path = sidecar_path(csv_path)
    json_path.write_text(json.dumps(side, indent=2, sort_keys=True) + "\n")
    return csv_path, json_path


def read_dataset(csv_path) -> Dataset:
    csv_path = Path(csv_path)
    side = json.loads(sidecar_path(csv_path).read_text())
    with open(csv_path) as fh:
        header = fh.readline().strip().split(",")
    K = int(side["K"])
    if header != dataset_header(K):
        raise ConfigurationError(f"{csv_path}: header does not match K={K}")
    table = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
    vals = table[:, 1:]
    ins = vals[:, 0 : 2 * K : 2] + 1j * vals[:, 1 : 2 * K : 2]
    outs = vals[:, 2 * K :: 2] + 1j * vals[:, 2 * K + 1 :: 2]
    meta = {k: v for k, v in side.items() if k not in ("sample_rate_hz", "K", "num_samples", "scale_factors")}
    return Dataset(ins.T, outs.T, side["sample_rate_hz"], tuple(side["scale_factors"]), meta)


def _arr(a) -> dict:
    a = np.asarray(a, dtype=np.float64)
    return {"shape": list(a.shape), "values": [float(v) for v in a.ravel()]}


def _unarr(doc) -> np.ndarray:
    return np.array(doc["values"], dtype=np.float64).reshape(doc["shape"])


def model_to_dict(model, extra_meta: dict | None = None) -> dict:
    meta = {"format_version": FORMAT_VERSION, "model_type": model.kind, "K": model.K}
    if model.kind == "gmp":
        meta.update(M=model.index.max_lag, index_arrays=model.index.as_dict(), column_order=COLUMN_ORDER,
                    rank_deficient=model.rank_deficient, residual_nmse_db=model.residual_nmse_db)
        params = {"coeffs.real": _arr(model.coeffs.real), "coeffs.imag": _arr(model.coeffs.imag)}
    else:
        meta.update(M=model.M, envelope_exponents=list(model.envelope_exponents), flatten_order=FLATTEN_ORDER)
        if model.kind == "drvcnn":
            meta.update(frozen_conv=model.frozen_conv, map_flatten_order="row-major over (h, w, s)")
        else:
            meta.update(variant=model.variant, activations=[l.activation for l in model.layers])
        params = {name: _arr(v) for name, v in model.parameters().items()}
    meta.update(extra_meta or {})
    return {"meta": meta, "params": params}


def model_from_dict(doc: dict):
    meta, params = doc["meta"], doc["params"]
    kind = meta["model_type"]
    if kind not in ("gmp", "drvcnn", "mlp"):
        raise ConfigurationError(f"unknown model type {kind!r}")
    p = {name: _unarr(v) for name, v in params.items()}
    if kind == "gmp":
        coeffs = p["coeffs.real"] + 1j * p["coeffs.imag"]
        return GmpModel(GmpIndex(**meta["index_arrays"]), coeffs, bool(meta.get("rank_deficient", False)),
                        meta.get("residual_nmse_db"))
    exps = tuple(meta["envelope_exponents"])
    if kind == "drvcnn":
        dl = lambda n, act: DenseLayer(p[f"{n}.w"], p[f"{n}.b"], act)
        return DrvcnnModel(
            meta["K"], meta["M"], exps,
            ConvLayer(p["conv.kernels"], p["conv.biases"]),
            AttentionParams(dl("attn.channel.fc1", "tanh"), dl("attn.channel.fc2", "softmax"),
                            dl("attn.spatial.fc1", "tanh"), dl("attn.spatial.fc2", "softmax")),
            dl("head.fc1", "tanh"), dl("head.fc2", "tanh"), dl("head.out", "linear"),
            frozen_conv=bool(meta.get("frozen_conv", False)),
        )
    acts = meta["activations"]
    names = [f"fc{i + 1}" for i in range(len(acts) - 1)] + ["out"]
    layers = [DenseLayer(p[f"{n}.w"], p[f"{n}.b"], a) for n, a in zip(names, acts)]
    return MlpModel(meta["variant"], meta["K"], meta["M"], exps, layers)


def save_model(model, path, extra_meta: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(model_to_dict(model, extra_meta), indent=1) + "\n")
    return path


def load_model(path):
    return model_from_dict(json.loads(Path(path).read_text()))
