"""NMSE, modeling-error spectra and model comparison reports."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sps

from .errors import ArgumentError, ConfigurationError
from .models import predict_series
from .neuralcore import count_parameters

PSD_FLOOR_DB = -300.0


def _samples(x) -> np.ndarray:
    return np.asarray(getattr(x, "samples", x), dtype=np.complex128)


def nmse_db(pred, meas) -> float:
    """Error power over measured power in dB; ``-inf`` for a perfect prediction."""
    p, m = _samples(pred), _samples(meas)
    if p.shape != m.shape or p.size < 1:
        raise ArgumentError("pred and meas must be nonempty and equally long")
    e = p - m
    num = float(np.sum(e.real**2 + e.imag**2))
    den = float(np.sum(m.real**2 + m.imag**2))
    if den == 0:
        raise ArgumentError("measured signal is all zero; NMSE undefined")
    if num == 0:
        return -math.inf
    return 10.0 * math.log10(num / den)


def format_db(v: float, digits: int = 2) -> str:
    return "-inf" if v == -math.inf else f"{v:.{digits}f}"


@dataclass(frozen=True)
class SpectrumTrace:
    freqs_hz: np.ndarray
    psd_db: np.ndarray
    label: str = ""

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["freq_hz", "psd_db"])
        for f, p in zip(self.freqs_hz, self.psd_db):
            w.writerow([repr(float(f)), repr(float(p))])
        return buf.getvalue()


def averaged_periodogram(x, fs_hz: float, nfft: int = 1024, overlap: float = 0.5):
    """Two-sided Hann-windowed Welch PSD (power per Hz), centred at 0 Hz."""
    x = _samples(x)
    if x.size < nfft:
        raise ArgumentError(f"series of {x.size} samples shorter than nfft={nfft}")
    if not 0 <= overlap < 1:
        raise ArgumentError("overlap must lie in [0, 1)")
    f, p = sps.welch(x, fs=fs_hz, window="hann", nperseg=nfft, noverlap=int(round(overlap * nfft)),
                     return_onesided=False, detrend=False, scaling="density")
    return np.fft.fftshift(f), np.fft.fftshift(p)


def error_spectrum(pred, meas, fs_hz: float, nfft: int = 1024, overlap: float = 0.5,
                   label: str = "") -> SpectrumTrace:
    """PSD of (meas - pred) in dB relative to the peak PSD of ``meas``."""
    p, m = _samples(pred), _samples(meas)
    if p.shape != m.shape:
        raise ArgumentError("pred and meas must be equally long")
    f, pe = averaged_periodogram(m - p, fs_hz, nfft, overlap)
    _, pm = averaged_periodogram(m, fs_hz, nfft, overlap)
    ref = pm.max()
    if ref <= 0:
        raise ArgumentError("measured signal is all zero")
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(pe / ref)
    return SpectrumTrace(f, np.maximum(db, PSD_FLOOR_DB), label)


@dataclass
class NmseReport:
    model_name: str
    coefficient_count: int
    per_carrier_nmse_db: list
    dataset_id: str = ""
    split: str = "test"


@dataclass
class ComparisonReport:
    rows: list = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["model", "coefficients", "nmse_db"])
        for r in self.rows:
            w.writerow([r.model_name, r.coefficient_count, "/".join(format_db(v) for v in r.per_carrier_nmse_db)])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = [
            {
                "model": r.model_name,
                "coefficients": r.coefficient_count,
                "nmse_db": [v if math.isfinite(v) else format_db(v) for v in r.per_carrier_nmse_db],
                "dataset_id": r.dataset_id,
                "split": r.split,
            }
            for r in self.rows
        ]
        return json.dumps(doc, indent=2) + "\n"


def evaluate_model(name: str, model, ds, dataset_id: str = "", split: str = "test"):
    """NMSE row and predictions for one model on one dataset split."""
    if model.K != ds.K:
        raise ConfigurationError(f"model {name!r} has K={model.K}, dataset has K={ds.K}")
    pred = predict_series(model, ds.inputs)
    nmse = [nmse_db(pred[k], ds.outputs[k]) for k in range(ds.K)]
    return NmseReport(name, count_parameters(model), nmse, dataset_id, split), pred


def compare_report(models, test, dataset_id: str = "") -> ComparisonReport:
    """One row per (name, model) pair evaluated on ``test``."""
    report = ComparisonReport()
    for name, model in models:
        row, _ = evaluate_model(name, model, test, dataset_id)
        report.rows.append(row)
    return report
