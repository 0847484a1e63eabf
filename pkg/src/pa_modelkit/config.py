"""JSON experiment configuration.

Example::

    {
      "seed": 7,
      "num_samples": 20000,
      "signal": {"preset": "single"},
      "pa": {"pre_fir": [1.0, [0.2, -0.1]], "static_nl": {"type": "rapp", "smoothness": 2},
             "post_fir": [1.0], "iq_imbalance": {"gain_mismatch": 0.03, "phase_mismatch_rad": 0.03}},
      "feature": {"M": 3},
      "models": [{"type": "drvcnn"}, {"type": "gmp", "Ka": 11, "La": 7, "Kb": 3, "Mb": 2, "Lb": 5}],
      "train": {"L1": 200, "L2": 100},
      "output_dir": "runs/single"
    }

Complex values are written as a number or an ``[re, im]`` pair. Seeds not
given explicitly are derived from the top-level ``seed`` and a fixed label
per stream (``carrier1``, ``train``, ``model:<name>``).
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .features import FeatureConfig
from .gmp import GmpIndex
from .models import TrainConfig
from .signals import CarrierConfig, PaOracleConfig, SignalConfig, preset_signal

MODEL_TYPES = ("drvcnn", "arvtdnn", "dnn", "gmp")


def derive_seed(seed: int, label: str) -> int:
    ss = np.random.SeedSequence([int(seed) & (2**63 - 1), zlib.crc32(label.encode())])
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


def parse_complex(v) -> complex:
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise ConfigurationError(f"complex value must be [re, im], got {v!r}")
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, dict):
        return complex(float(v.get("re", 0.0)), float(v.get("im", 0.0)))
    return complex(float(v))


def _only(d: dict, cls, where: str) -> dict:
    allowed = {f.name for f in fields(cls)}
    unknown = set(d) - allowed
    if unknown:
        raise ConfigurationError(f"{where}: unknown keys {sorted(unknown)}")
    return d


@dataclass(frozen=True)
class ModelSpec:
    type: str
    name: str
    settings: dict = field(default_factory=dict)

    @property
    def gmp_index(self) -> GmpIndex:
        keys = ("Ka", "La", "Kb", "Mb", "Lb", "Kc", "Mc", "Lc")
        return GmpIndex(**{k: int(self.settings.get(k, 0)) for k in keys})


@dataclass(frozen=True)
class ExperimentConfig:
    signal: SignalConfig
    pa: PaOracleConfig
    feature: FeatureConfig
    models: tuple
    train: TrainConfig
    seed: int = 0
    num_samples: int = 20000
    split: tuple = (3, 2)
    nfft: int = 1024
    overlap: float = 0.5
    output_dir: str = "out"

    @property
    def K(self) -> int:
        return self.signal.K


def _signal_from(doc: dict, seed: int) -> SignalConfig:
    doc = dict(doc)
    if "preset" in doc:
        sig = preset_signal(doc.pop("preset"), seed, doc.pop("total_bandwidth_hz", None))
        overrides = {k: doc.pop(k) for k in list(doc) if k in {f.name for f in fields(CarrierConfig)}}
        carriers = tuple(
            replace(c, seed=derive_seed(seed, f"carrier{k + 1}"), **overrides) for k, c in enumerate(sig.carriers)
        )
        guard = doc.pop("guard", sig.guard)
        if doc:
            raise ConfigurationError(f"signal: unknown keys {sorted(doc)}")
        return SignalConfig(carriers, sig.offsets_hz, guard)
    carriers = []
    for k, c in enumerate(doc.get("carriers", [])):
        c = dict(_only(c, CarrierConfig, f"signal.carriers[{k}]"))
        c.setdefault("seed", derive_seed(seed, f"carrier{k + 1}"))
        carriers.append(CarrierConfig(**c))
    offsets = doc.get("offsets_hz", [0.0] * len(carriers))
    return SignalConfig(tuple(carriers), tuple(offsets), doc.get("guard", 1.5))


def _pa_from(doc: dict) -> PaOracleConfig:
    doc = dict(_only(doc, PaOracleConfig, "pa"))
    for name in ("pre_fir", "post_fir"):
        if name in doc:
            doc[name] = tuple(parse_complex(t) for t in doc[name])
    if doc.get("dc_offset") is not None:
        doc["dc_offset"] = parse_complex(doc["dc_offset"])
    nl = doc.get("static_nl")
    if nl and nl.get("type") == "polynomial":
        nl = dict(nl, coeffs=[parse_complex(c) for c in nl["coeffs"]])
        doc["static_nl"] = nl
    return PaOracleConfig(**doc)


def config_from_dict(doc: dict) -> ExperimentConfig:
    doc = dict(doc)
    seed = int(doc.get("seed", 0))
    signal = _signal_from(doc.get("signal", {"preset": "single"}), seed)
    pa = _pa_from(doc.get("pa", {}))
    fdoc = dict(_only(doc.get("feature", {}), FeatureConfig, "feature"))
    if "K" in fdoc and int(fdoc["K"]) != signal.K:
        raise ConfigurationError(f"feature.K={fdoc['K']} but the signal has {signal.K} carriers")
    fdoc["K"] = signal.K
    feature = FeatureConfig(**fdoc)
    tdoc = dict(_only(doc.get("train", {}), TrainConfig, "train"))
    tdoc.setdefault("seed", derive_seed(seed, "train"))
    tdoc.setdefault("edge", feature.edge)
    train = TrainConfig(**tdoc)

    models, names = [], set()
    for m in doc.get("models", [{"type": "drvcnn"}]):
        m = dict(m)
        kind = m.pop("type", None)
        if kind not in MODEL_TYPES:
            raise ConfigurationError(f"model type must be one of {MODEL_TYPES}, got {kind!r}")
        name = m.pop("name", kind)
        if name in names:
            raise ConfigurationError(f"duplicate model name {name!r}")
        names.add(name)
        models.append(ModelSpec(kind, name, m))
    spectrum = doc.get("spectrum", {})
    split = tuple(doc.get("split", (3, 2)))
    return ExperimentConfig(
        signal, pa, feature, tuple(models), train, seed,
        int(doc.get("num_samples", 20000)), split,
        int(spectrum.get("nfft", 1024)), float(spectrum.get("overlap", 0.5)),
        str(doc.get("output_dir", "out")),
    )


def load_config(path) -> ExperimentConfig:
    return config_from_dict(json.loads(Path(path).read_text()))
