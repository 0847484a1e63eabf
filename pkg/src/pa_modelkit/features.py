"""Input representations for the neural models.

For carrier k at time n the feature matrix has one column per lag
0..M and rows

    I_k(n-i), Q_k(n-i), |x_k(n-i)|^p for p in envelope_exponents

Samples before index 0 are zero. Stacking the K carrier matrices along a
third axis gives the (rows, M+1, K) input tensor of the convolutional
model. The fully connected baselines take a flattened vector: row-major
within a carrier (row, then lag), carriers outermost.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, ConfigurationError

MLP_VARIANTS = ("arvtdnn", "dnn")
FLATTEN_ORDER = "carrier-major, then feature row, then lag"


@dataclass(frozen=True)
class FeatureConfig:
    M: int = 3
    K: int = 1
    envelope_exponents: tuple = (1, 2, 3)
    edge: str = "zero"  # "zero": zero pre-history; "drop": skip the first M samples in training

    def __post_init__(self):
        if self.M < 0 or self.K < 1:
            raise ConfigurationError("need M >= 0 and K >= 1")
        exps = tuple(int(p) for p in self.envelope_exponents)
        if any(p < 1 for p in exps):
            raise ConfigurationError("envelope exponents must be positive integers")
        if self.edge not in ("zero", "drop"):
            raise ConfigurationError("edge must be 'zero' or 'drop'")
        object.__setattr__(self, "envelope_exponents", exps)

    @property
    def rows(self) -> int:
        return 2 + len(self.envelope_exponents)


def _as_array(carriers) -> np.ndarray:
    if hasattr(carriers, "samples") or (isinstance(carriers, np.ndarray) and carriers.ndim == 1):
        carriers = [carriers]
    rows = [np.asarray(getattr(c, "samples", c), dtype=np.complex128) for c in carriers]
    if len({r.shape for r in rows}) != 1 or rows[0].ndim != 1:
        raise ArgumentError("all carriers must be 1-D series of equal length")
    return np.stack(rows)


def lag_matrix(x: np.ndarray, M: int) -> np.ndarray:
    """(N, M+1) matrix with column i holding x(n - i), zero before n = 0."""
    n = x.size
    out = np.zeros((n, M + 1), dtype=x.dtype)
    for i in range(min(M, n - 1) + 1):
        out[i:, i] = x[: n - i]
    return out


def carrier_features(x: np.ndarray, cfg: FeatureConfig) -> np.ndarray:
    """Feature matrices for every time index: shape (N, rows, M+1)."""
    lags = lag_matrix(np.asarray(x, dtype=np.complex128), cfg.M)
    env = np.abs(lags)
    parts = [lags.real, lags.imag] + [env**p if p != 1 else env for p in cfg.envelope_exponents]
    return np.stack(parts, axis=1)


def feature_tensors(carriers, cfg: FeatureConfig) -> np.ndarray:
    """Input tensors for every time index: shape (N, rows, M+1, K)."""
    xs = _as_array(carriers)
    if xs.shape[0] != cfg.K:
        raise ArgumentError(f"expected {cfg.K} carriers, got {xs.shape[0]}")
    return np.stack([carrier_features(x, cfg) for x in xs], axis=-1)


def build_carrier_matrix(x_k, n: int, cfg: FeatureConfig) -> np.ndarray:
    x = _as_array(x_k)[0]
    if not 0 <= n < x.size:
        raise ArgumentError(f"time index {n} outside [0, {x.size})")
    window = np.zeros(cfg.M + 1, dtype=np.complex128)
    lo = max(0, n - cfg.M)
    seg = x[lo : n + 1][::-1]
    window[: seg.size] = seg
    return carrier_features(window[::-1], cfg)[-1]


def build_input_tensor(carriers, n: int, cfg: FeatureConfig) -> np.ndarray:
    xs = _as_array(carriers)
    if xs.shape[0] != cfg.K:
        raise ArgumentError(f"expected {cfg.K} carriers, got {xs.shape[0]}")
    return np.stack([build_carrier_matrix(x, n, cfg) for x in xs], axis=-1)


def flatten_tensors(tensors: np.ndarray, variant: str) -> np.ndarray:
    """Flatten (..., rows, M+1, K) tensors into MLP input vectors."""
    if variant not in MLP_VARIANTS:
        raise ArgumentError(f"unknown variant {variant!r}; expected one of {MLP_VARIANTS}")
    if variant == "dnn":
        tensors = tensors[..., :2, :, :]
    moved = np.moveaxis(tensors, -1, -3)  # (..., K, rows, M+1)
    return moved.reshape(moved.shape[:-3] + (-1,))


def build_mlp_features(carriers, n: int, cfg: FeatureConfig, variant: str) -> np.ndarray:
    return flatten_tensors(build_input_tensor(carriers, n, cfg), variant)


def mlp_feature_matrix(carriers, cfg: FeatureConfig, variant: str) -> np.ndarray:
    return flatten_tensors(feature_tensors(carriers, cfg), variant)


def targets(outputs) -> np.ndarray:
    """(N, 2K) regression targets ordered I_1, Q_1, ..., I_K, Q_K."""
    ys = _as_array(outputs)
    return np.stack([ys.real, ys.imag], axis=-1).transpose(1, 0, 2).reshape(ys.shape[1], -1)


def from_targets(y: np.ndarray) -> np.ndarray:
    """Inverse of :func:`targets`: (N, 2K) reals to (K, N) complex."""
    y = np.asarray(y)
    return (y[:, 0::2] + 1j * y[:, 1::2]).T
