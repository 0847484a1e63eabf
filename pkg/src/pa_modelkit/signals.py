"""OFDM test signals, a synthetic Wiener-Hammerstein PA and paired datasets.

The synthetic PA stands in for a measured transmitter: carriers are generated
at baseband, frequency-multiplexed, passed through

    pre_fir -> static nonlinearity -> post_fir -> I/Q imbalance -> DC offset

and the PA output is split back into per-carrier baseband captures.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import signal as sps

from .errors import ArgumentError, ConfigurationError, PipelineError

QAM_ORDERS = (4, 16, 64)


@dataclass(frozen=True)
class ComplexSeries:
    """Uniformly sampled complex baseband samples."""

    samples: np.ndarray
    sample_rate_hz: float
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        x = np.array(self.samples, dtype=np.complex128)
        if x.ndim != 1 or x.size < 1:
            raise ArgumentError("a ComplexSeries needs at least one sample")
        if not np.all(np.isfinite(x)):
            raise ArgumentError("ComplexSeries samples must be finite")
        if not self.sample_rate_hz > 0:
            raise ArgumentError("sample_rate_hz must be positive")
        x.flags.writeable = False
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))

    def __len__(self):
        return self.samples.size


@dataclass(frozen=True)
class CarrierConfig:
    num_subcarriers: int = 600
    bandwidth_hz: float = 100e6
    oversampling: int = 4
    qam_order: int = 64
    seed: int = 0
    backoff_db: float = 10.0  # RMS level below unit peak

    def __post_init__(self):
        if int(self.num_subcarriers) < 1:
            raise ConfigurationError("num_subcarriers must be >= 1")
        if not self.bandwidth_hz > 0:
            raise ConfigurationError("bandwidth_hz must be positive")
        if int(self.oversampling) < 1:
            raise ConfigurationError("oversampling must be >= 1")
        if self.qam_order not in QAM_ORDERS:
            raise ConfigurationError(f"qam_order must be one of {QAM_ORDERS}")

    @property
    def sample_rate_hz(self) -> float:
        return self.oversampling * self.bandwidth_hz


@dataclass(frozen=True)
class PaOracleConfig:
    """Synthetic PA description.

    ``static_nl`` is a mapping with a ``type`` key:

    * ``{"type": "rapp", "smoothness": p, "sat_level": A_sat, "gain": g}``
    * ``{"type": "saleh", "alpha_a", "beta_a", "alpha_p", "beta_p"}``
    * ``{"type": "polynomial", "coeffs": [c1, c3, c5, ...]}`` giving
      ``sum_i c_i u |u|^(2i)``
    """

    pre_fir: tuple = (1.0,)
    static_nl: dict = field(default_factory=lambda: {"type": "rapp", "smoothness": 2.0, "sat_level": 1.0})
    post_fir: tuple = (1.0,)
    iq_imbalance: dict | None = None  # {"gain_mismatch": g, "phase_mismatch_rad": phi}
    dc_offset: complex | None = None

    def __post_init__(self):
        for name in ("pre_fir", "post_fir"):
            taps = np.asarray(getattr(self, name), dtype=np.complex128).ravel()
            if taps.size < 1 or taps[0] == 0:
                raise ConfigurationError(f"{name} needs >= 1 tap with a nonzero tap 0")
            object.__setattr__(self, name, tuple(complex(t) for t in taps))
        nl = dict(self.static_nl)
        kind = nl.get("type")
        if kind == "rapp":
            if not nl.get("sat_level", 1.0) > 0:
                raise ConfigurationError("rapp sat_level must be > 0")
            if not nl.get("smoothness", 2.0) > 0:
                raise ConfigurationError("rapp smoothness must be > 0")
        elif kind == "saleh":
            missing = {"alpha_a", "beta_a", "alpha_p", "beta_p"} - nl.keys()
            if missing:
                raise ConfigurationError(f"saleh model missing {sorted(missing)}")
        elif kind == "polynomial":
            if len(nl.get("coeffs", ())) < 1:
                raise ConfigurationError("polynomial model needs at least one coefficient")
        else:
            raise ConfigurationError(f"unknown static nonlinearity {kind!r}")
        object.__setattr__(self, "static_nl", nl)


@dataclass(frozen=True)
class Dataset:
    """Paired per-carrier PA input/output captures.

    ``inputs`` and ``outputs`` are complex arrays of shape (K, num_samples).
    """

    inputs: np.ndarray
    outputs: np.ndarray
    sample_rate_hz: float
    scale_factors: tuple
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        xi = np.array(self.inputs, dtype=np.complex128, ndmin=2)
        xo = np.array(self.outputs, dtype=np.complex128, ndmin=2)
        if xi.shape != xo.shape:
            raise ArgumentError(f"input/output shapes differ: {xi.shape} vs {xo.shape}")
        if len(self.scale_factors) != xi.shape[0]:
            raise ArgumentError("one scale factor per carrier is required")
        xi.flags.writeable = False
        xo.flags.writeable = False
        object.__setattr__(self, "inputs", xi)
        object.__setattr__(self, "outputs", xo)
        object.__setattr__(self, "scale_factors", tuple(float(s) for s in self.scale_factors))

    @property
    def K(self) -> int:
        return self.inputs.shape[0]

    @property
    def num_samples(self) -> int:
        return self.inputs.shape[1]

    @property
    def carriers_in(self) -> list[ComplexSeries]:
        return [ComplexSeries(x, self.sample_rate_hz) for x in self.inputs]

    @property
    def carriers_out(self) -> list[ComplexSeries]:
        return [ComplexSeries(y, self.sample_rate_hz) for y in self.outputs]

    def slice(self, start: int, stop: int) -> "Dataset":
        return Dataset(self.inputs[:, start:stop], self.outputs[:, start:stop],
                       self.sample_rate_hz, self.scale_factors, dict(self.meta))


def _qam_constellation(order: int) -> np.ndarray:
    side = int(round(math.sqrt(order)))
    levels = 2.0 * np.arange(side) - (side - 1)
    points = (levels[:, None] + 1j * levels[None, :]).ravel()
    return points / np.sqrt(np.mean(np.abs(points) ** 2))


def generate_ofdm_carrier(cfg: CarrierConfig, num_samples: int) -> ComplexSeries:
    """Random-QAM OFDM baseband carrier of ``num_samples`` samples.

    Each OFDM symbol fills ``num_subcarriers`` bins centred on DC of an
    IFFT of size ``num_subcarriers * oversampling`` (zero-padded spectrum).
    Symbols are concatenated without a cyclic prefix, then the whole series
    is band-limited with a circular spectral mask so the carrier occupies
    exactly ``bandwidth_hz`` (symbol-boundary sidelobes would otherwise leak
    into neighbouring carriers). The result is scaled to an RMS level
    ``backoff_db`` below unit peak.
    """
    num_samples = int(num_samples)
    if num_samples < 1:
        raise ArgumentError("requested length must be >= 1")
    rng = np.random.default_rng(cfg.seed)
    n_sc = int(cfg.num_subcarriers)
    n_fft = n_sc * int(cfg.oversampling)
    n_sym = -(-num_samples // n_fft)

    points = _qam_constellation(cfg.qam_order)
    symbols = points[rng.integers(0, cfg.qam_order, size=(n_sym, n_sc))]
    bins = (np.arange(n_sc) - n_sc // 2) % n_fft
    spectrum = np.zeros((n_sym, n_fft), dtype=np.complex128)
    spectrum[:, bins] = symbols
    x = np.fft.ifft(spectrum, axis=1).ravel()[:num_samples]

    if cfg.oversampling > 1:
        freqs = np.fft.fftfreq(num_samples)
        edge = (n_sc / 2) / n_fft
        mask = np.abs(freqs) <= edge + 0.5 / num_samples
        x = np.fft.ifft(np.fft.fft(x) * mask)

    rms = np.sqrt(np.mean(np.abs(x) ** 2))
    if rms == 0:
        raise ArgumentError("generated carrier is empty; increase num_samples")
    x = x * (10.0 ** (-cfg.backoff_db / 20.0) / rms)
    return ComplexSeries(x, cfg.sample_rate_hz)


def papr_db(x) -> float:
    x = np.asarray(getattr(x, "samples", x))
    p = np.abs(x) ** 2
    return float(10.0 * np.log10(p.max() / p.mean()))


def _check_nyquist(offsets_hz, bandwidths_hz, fs_hz):
    for off, bw in zip(offsets_hz, bandwidths_hz):
        if abs(off) + bw / 2.0 >= fs_hz / 2.0:
            raise ArgumentError(
                f"carrier at offset {off:g} Hz with bandwidth {bw:g} Hz exceeds fs/2 = {fs_hz / 2:g} Hz"
            )


def combine_carriers(carriers: Sequence[ComplexSeries], offsets_hz: Sequence[float], fs_hz: float,
                     bandwidths_hz: Sequence[float] | None = None) -> ComplexSeries:
    """Frequency-multiplex carriers: ``sum_k x_k(n) exp(j 2 pi f_k n / fs)``."""
    if len(carriers) == 0 or len(carriers) != len(offsets_hz):
        raise ArgumentError("need one offset per carrier")
    n = len(carriers[0])
    if any(len(c) != n for c in carriers):
        raise ArgumentError("all carriers must have the same length")
    _check_nyquist(offsets_hz, bandwidths_hz if bandwidths_hz is not None else [0.0] * len(carriers), fs_hz)
    t = np.arange(n)
    out = np.zeros(n, dtype=np.complex128)
    for c, off in zip(carriers, offsets_hz):
        if off == 0:
            out += c.samples
        else:
            out += c.samples * np.exp(2j * np.pi * off * t / fs_hz)
    return ComplexSeries(out, fs_hz)


def demux_filter(bandwidth_hz: float, fs_hz: float, guard: float = 1.5, atten_db: float = 90.0):
    """Linear-phase lowpass taps for one carrier, or None when wide open.

    Cutoff sits at ``guard * bandwidth / 2``; the transition band spans the
    guard region on both sides of the cutoff.
    """
    cutoff = guard * bandwidth_hz / 2.0
    if cutoff >= fs_hz / 2.0:
        return None
    width = 2.0 * (cutoff - bandwidth_hz / 2.0)
    width = min(width, 2.0 * (fs_hz / 2.0 - cutoff))
    if width <= 0:
        raise ArgumentError("guard factor must exceed 1")
    numtaps, beta = sps.kaiserord(atten_db, width / (fs_hz / 2.0))
    numtaps |= 1  # odd length -> integer group delay
    return sps.firwin(numtaps, cutoff, window=("kaiser", beta), fs=fs_hz)


def _circular_fir(x: np.ndarray, taps: np.ndarray) -> np.ndarray:
    # zero-phase (delay-compensated) application on the periodic extension
    n = x.size
    if taps.size > n:
        raise ArgumentError(f"series of {n} samples shorter than {taps.size}-tap filter")
    delay = (taps.size - 1) // 2
    kernel = np.zeros(n)
    kernel[: taps.size] = taps
    kernel = np.roll(kernel, -delay)
    return np.fft.ifft(np.fft.fft(x) * np.fft.fft(kernel))


def demux_carriers(composite: ComplexSeries, offsets_hz: Sequence[float], bw_hz: Sequence[float],
                   guard: float = 1.5) -> list[ComplexSeries]:
    """Shift each carrier to DC and low-pass it (delay-compensated FIR).

    Overlapping carrier spectra are not an error; a warning is attached to
    each output's ``meta["warnings"]``.
    """
    fs = composite.sample_rate_hz
    if len(offsets_hz) != len(bw_hz):
        raise ArgumentError("need one bandwidth per offset")
    _check_nyquist(offsets_hz, bw_hz, fs)
    notes = []
    for i in range(len(offsets_hz)):
        for j in range(i + 1, len(offsets_hz)):
            if abs(offsets_hz[i] - offsets_hz[j]) < (bw_hz[i] + bw_hz[j]) / 2.0:
                notes.append(f"carriers {i + 1} and {j + 1} overlap in frequency")
    for note in notes:
        warnings.warn(note, stacklevel=2)

    t = np.arange(len(composite))
    out = []
    for off, bw in zip(offsets_hz, bw_hz):
        x = composite.samples
        if off != 0:
            x = x * np.exp(-2j * np.pi * off * t / fs)
        taps = demux_filter(bw, fs, guard)
        if taps is not None:
            x = _circular_fir(x, taps)
        out.append(ComplexSeries(x, fs, meta={"warnings": list(notes)}))
    return out


def _static_nl(u: np.ndarray, nl: dict) -> np.ndarray:
    kind = nl["type"]
    if kind == "rapp":
        p = float(nl.get("smoothness", 2.0))
        sat = float(nl.get("sat_level", 1.0))
        gain = float(nl.get("gain", 1.0))
        a = np.abs(u)
        return gain * u / (1.0 + (a / sat) ** (2 * p)) ** (1.0 / (2 * p))
    if kind == "saleh":
        r = np.abs(u)
        amp = nl["alpha_a"] * r / (1.0 + nl["beta_a"] * r**2)
        phase = nl["alpha_p"] * r**2 / (1.0 + nl["beta_p"] * r**2)
        return amp * np.exp(1j * (np.angle(u) + phase))
    # odd-order polynomial
    coeffs = [complex(c) for c in nl["coeffs"]]
    if len(coeffs) == 1:
        return coeffs[0] * u
    env2 = np.abs(u) ** 2
    out = np.zeros_like(u)
    basis = u.copy()
    for c in coeffs:
        out += c * basis
        basis = basis * env2
    return out


def reference_pa(x: ComplexSeries, cfg: PaOracleConfig) -> ComplexSeries:
    """Causal Wiener-Hammerstein PA with optional modulator impairments."""
    n = len(x)
    u = np.convolve(x.samples, np.asarray(cfg.pre_fir))[:n]
    y = _static_nl(u, cfg.static_nl)
    y = np.convolve(y, np.asarray(cfg.post_fir))[:n]
    if cfg.iq_imbalance:
        g = float(cfg.iq_imbalance.get("gain_mismatch", 0.0))
        phi = float(cfg.iq_imbalance.get("phase_mismatch_rad", 0.0))
        i, q = y.real, y.imag
        # quadrature branch sees the LO phase error
        y = (1 + g) * i + 1j * (1 - g) * (q * np.cos(phi) + i * np.sin(phi))
    if cfg.dc_offset:
        y = y + complex(cfg.dc_offset)
    return ComplexSeries(y, x.sample_rate_hz)


@dataclass(frozen=True)
class SignalConfig:
    """Carrier list plus frequency offsets for a K-carrier test signal."""

    carriers: tuple
    offsets_hz: tuple
    guard: float = 1.5

    def __post_init__(self):
        carriers = tuple(self.carriers)
        if len(carriers) < 1:
            raise ConfigurationError("at least one carrier is required")
        if len(self.offsets_hz) != len(carriers):
            raise ConfigurationError("one offset per carrier is required")
        rates = {c.sample_rate_hz for c in carriers}
        if len(rates) != 1:
            raise ConfigurationError("all carriers must share the same sample rate (oversampling x bandwidth)")
        object.__setattr__(self, "carriers", carriers)
        object.__setattr__(self, "offsets_hz", tuple(float(f) for f in self.offsets_hz))

    @property
    def K(self) -> int:
        return len(self.carriers)

    @property
    def sample_rate_hz(self) -> float:
        return self.carriers[0].sample_rate_hz


def preset_signal(kind: str, seed: int = 0, total_bandwidth_hz: float | None = None) -> SignalConfig:
    """Experiment signal presets: ``single`` (100 MHz), ``dual`` (40 MHz),
    ``triple`` (20 MHz by default; pass 28e6 for the alternative setup).

    Multi-carrier presets split the total bandwidth evenly and place carriers
    1.5 carrier-bandwidths apart from DC (dual: +-1.5 bw; triple: -1.5, 0, +1.5 bw).
    """
    ss = np.random.SeedSequence(seed)
    seeds = [int(s.generate_state(1, np.uint64)[0]) for s in ss.spawn(3)]
    if kind == "single":
        bw = total_bandwidth_hz or 100e6
        cars = (CarrierConfig(600, bw, 4, 64, seeds[0]),)
        return SignalConfig(cars, (0.0,))
    if kind == "dual":
        bw = (total_bandwidth_hz or 40e6) / 2
        cars = tuple(CarrierConfig(120, bw, 6, 64, s) for s in seeds[:2])
        return SignalConfig(cars, (-1.5 * bw, 1.5 * bw))
    if kind == "triple":
        bw = (total_bandwidth_hz or 20e6) / 3
        cars = tuple(CarrierConfig(120, bw, 6, 64, s) for s in seeds[:3])
        return SignalConfig(cars, (-1.5 * bw, 0.0, 1.5 * bw))
    raise ConfigurationError(f"unknown signal preset {kind!r}")


def align_lag(reference: np.ndarray, delayed: np.ndarray, max_lag: int = 64) -> tuple[int, float]:
    """Integer lag maximising |cross-correlation| and the normalised peak."""
    n = reference.size
    size = 1 << (2 * n - 1).bit_length()
    corr = np.fft.ifft(np.fft.fft(delayed, size) * np.conj(np.fft.fft(reference, size)))
    lags = np.r_[np.arange(0, max_lag + 1), np.arange(-max_lag, 0)]
    vals = np.abs(corr[lags % size])
    best = int(np.argmax(vals))
    norm = np.linalg.norm(reference) * np.linalg.norm(delayed)
    peak = float(vals[best] / norm) if norm > 0 else 0.0
    return int(lags[best]), peak


def _shift(x: np.ndarray, lag: int) -> np.ndarray:
    # advance by ``lag`` samples, zero fill
    if lag == 0:
        return x
    out = np.zeros_like(x)
    if lag > 0:
        out[:-lag] = x[lag:]
    else:
        out[-lag:] = x[:lag]
    return out


def synthesize_dataset(signal_cfg: SignalConfig, pa_cfg: PaOracleConfig, num_samples: int,
                       min_correlation: float = 0.1) -> Dataset:
    """Generate carriers, run them through the synthetic PA, capture per carrier.

    A single carrier at DC is captured over the full band (no demux filter);
    multi-carrier outputs are demultiplexed with the carrier bandwidth times
    ``signal_cfg.guard``. Each carrier pair is advanced by the integer
    cross-correlation lag and scaled so the input peak magnitude is 1.
    """
    if num_samples < 1000:
        raise ArgumentError("num_samples must be >= 1000")
    fs = signal_cfg.sample_rate_hz
    carriers = [generate_ofdm_carrier(c, num_samples) for c in signal_cfg.carriers]
    bws = [c.bandwidth_hz for c in signal_cfg.carriers]
    composite = combine_carriers(carriers, signal_cfg.offsets_hz, fs, bws)
    pa_out = reference_pa(composite, pa_cfg)

    if signal_cfg.K == 1 and signal_cfg.offsets_hz[0] == 0:
        captures = [pa_out]
    else:
        with warnings.catch_warnings(record=True):
            warnings.simplefilter("always")
            captures = demux_carriers(pa_out, signal_cfg.offsets_hz, bws, signal_cfg.guard)

    ins, outs, scales, lags = [], [], [], []
    for k, (c_in, c_out) in enumerate(zip(carriers, captures)):
        lag, peak = align_lag(c_in.samples, c_out.samples)
        if peak < min_correlation:
            raise PipelineError(f"carrier {k + 1}: correlation peak {peak:.3g} below {min_correlation}")
        y = _shift(c_out.samples, lag)
        scale = 1.0 / np.max(np.abs(c_in.samples))
        ins.append(c_in.samples * scale)
        outs.append(y * scale)
        scales.append(scale)
        lags.append(lag)

    meta = {
        "seeds": [int(c.seed) for c in signal_cfg.carriers],
        "offsets_hz": list(signal_cfg.offsets_hz),
        "bandwidths_hz": bws,
        "lags": lags,
        "warnings": list(captures[0].meta.get("warnings", [])),
    }
    return Dataset(np.array(ins), np.array(outs), fs, tuple(scales), meta)


def split_dataset(ds: Dataset, train_parts: int = 3, test_parts: int = 2) -> tuple[Dataset, Dataset]:
    """Contiguous prefix/suffix split with floor(N * train / (train + test)) training samples."""
    if train_parts <= 0 or test_parts <= 0:
        raise ArgumentError("split parts must be positive")
    n = ds.num_samples
    if n == 0:
        raise ArgumentError("cannot split an empty dataset")
    n_train = n * train_parts // (train_parts + test_parts)
    return ds.slice(0, n_train), ds.slice(n_train, n)
