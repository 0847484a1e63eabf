"""Model builders, two-stage training and series prediction."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError, ShapeError, TrainingError
from .features import FeatureConfig, feature_tensors, flatten_tensors, from_targets, targets
from .gmp import GmpIndex, GmpModel, gmp_fit, gmp_predict
from .neuralcore import (
    AdamState,
    AttentionParams,
    ConvLayer,
    DrvcnnModel,
    MlpModel,
    adam_step,
    glorot_uniform,
    init_dense,
    model_forward,
    model_gradients,
)

# hidden widths reported for the single, dual and triple carrier experiments
ARVTDNN_HIDDEN = {1: 17, 2: 35, 3: 40}
DNN_HIDDEN = {1: (17, 17, 17), 2: (25, 25, 25), 3: (30, 30, 30)}
DEFAULT_GMP_INDEX = GmpIndex(Ka=11, La=7, Kb=3, Mb=2, Lb=5)


def _bottleneck(n: int) -> int:
    return max(1, n // 3)


def build_drvcnn(K: int, M: int, seed: int = 0, envelope_exponents=(1, 2, 3)) -> DrvcnnModel:
    """Conv (3K kernels of 3x3xK) -> channel/spatial attention -> FC 5K -> FC 3K -> 2K.

    Weights are Glorot-uniform, biases zero.
    """
    if K < 1 or M < 0:
        raise ConfigurationError("need K >= 1 and M >= 0")
    rows = 2 + len(envelope_exponents)
    if M + 1 < 3 or rows < 3:
        raise ConfigurationError(f"a 3x3 valid convolution needs M + 1 >= 3 (got M = {M})")
    rng = np.random.default_rng(seed)
    S = 3 * K
    kernel_shape = (S, 3, 3, K)
    conv = ConvLayer(glorot_uniform(rng, S * 9, K * 9, kernel_shape), np.zeros(S))
    h, w = rows - 2, M - 1
    hw = h * w
    attention = AttentionParams(
        init_dense(rng, S, _bottleneck(S), "tanh"),
        init_dense(rng, _bottleneck(S), S, "softmax"),
        init_dense(rng, hw, _bottleneck(hw), "tanh"),
        init_dense(rng, _bottleneck(hw), hw, "softmax"),
    )
    fc1 = init_dense(rng, hw * S, 5 * K, "tanh")
    fc2 = init_dense(rng, 5 * K, 3 * K, "tanh")
    out = init_dense(rng, 3 * K, 2 * K, "linear")
    return DrvcnnModel(K, M, tuple(envelope_exponents), conv, attention, fc1, fc2, out)


def _build_mlp(variant, K, M, hidden, seed, envelope_exponents):
    rng = np.random.default_rng(seed)
    rows = 2 + len(envelope_exponents) if variant == "arvtdnn" else 2
    sizes = [rows * (M + 1) * K, *hidden, 2 * K]
    layers = [init_dense(rng, sizes[i], sizes[i + 1], "tanh") for i in range(len(sizes) - 2)]
    layers.append(init_dense(rng, sizes[-2], sizes[-1], "linear"))
    return MlpModel(variant, K, M, tuple(envelope_exponents), layers)


def build_arvtdnn(K: int, M: int, hidden: int | None = None, seed: int = 0,
                  envelope_exponents=(1, 2, 3)) -> MlpModel:
    """One tanh hidden layer on the full flattened feature tensor."""
    if hidden is None:
        if K not in ARVTDNN_HIDDEN:
            raise ConfigurationError(f"no default ARVTDNN width for K={K}; set 'hidden'")
        hidden = ARVTDNN_HIDDEN[K]
    return _build_mlp("arvtdnn", K, M, (int(hidden),), seed, envelope_exponents)


def build_dnn(K: int, M: int, hidden=None, seed: int = 0, envelope_exponents=(1, 2, 3)) -> MlpModel:
    """Three tanh hidden layers on the I/Q rows only."""
    if hidden is None:
        if K not in DNN_HIDDEN:
            raise ConfigurationError(f"no default DNN widths for K={K}; set 'hidden'")
        hidden = DNN_HIDDEN[K]
    return _build_mlp("dnn", K, M, tuple(int(h) for h in hidden), seed, envelope_exponents)


def feature_config(model) -> FeatureConfig:
    return FeatureConfig(M=model.M, K=model.K, envelope_exponents=model.envelope_exponents)


def model_inputs(model, inputs) -> np.ndarray:
    """Network inputs for every sample of ``inputs`` (K, N)."""
    tensors = feature_tensors(inputs, feature_config(model))
    if model.kind == "drvcnn":
        return tensors
    return flatten_tensors(tensors, model.variant)


# -- training ---------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 256
    L1: int = 200
    L2: int = 100
    mse_target: float | None = None
    seed: int = 0
    edge: str = "zero"

    def __post_init__(self):
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ConfigurationError("Adam betas must lie in (0, 1)")
        if self.lr < 0 or self.batch_size < 1 or self.L1 < 0 or self.L2 < 0:
            raise ConfigurationError("invalid training configuration")
        if self.edge not in ("zero", "drop"):
            raise ConfigurationError("edge must be 'zero' or 'drop'")


@dataclass
class TrainingLog:
    rows: list = field(default_factory=list)  # (stage, epoch, mean_mse)

    def stage(self, s: int) -> list:
        return [r[2] for r in self.rows if r[0] == s]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["stage", "epoch", "mean_mse"])
        for stage, epoch, mse in self.rows:
            w.writerow([stage, epoch, repr(float(mse))])
        return buf.getvalue()


def training_arrays(model, ds, edge: str = "zero"):
    X = model_inputs(model, ds.inputs)
    Y = targets(ds.outputs)
    if edge == "drop":
        X, Y = X[model.M :], Y[model.M :]
    return X, Y


def _adam_loop(model, X, Y, cfg: TrainConfig, epochs: int, stage: int, log: TrainingLog, rng):
    """Mini-batch Adam over shuffled batches.

    Before each update the batch MSE is checked against ``cfg.mse_target``;
    meeting it ends the loop. Returns the model and whether it stopped early.
    """
    names = model.trainable_names()
    params = model.parameters()
    state = AdamState(cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
    n = X.shape[0]
    for epoch in range(1, epochs + 1):
        order = rng.permutation(n)
        losses, sizes = [], []
        stop = False
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            with np.errstate(invalid="ignore", over="ignore"):
                loss, grads = model_gradients(model, X[idx], Y[idx])
            if not np.isfinite(loss):
                raise TrainingError(f"stage {stage}: MSE became non-finite in epoch {epoch}", stage, epoch)
            losses.append(loss)
            sizes.append(idx.size)
            if cfg.mse_target is not None and loss <= cfg.mse_target:
                stop = True
                break
            params, state = adam_step(params, {k: grads[k] for k in names}, state)
            model = model.with_parameters(params)
        log.rows.append((stage, epoch, float(np.average(losses, weights=sizes))))
        if stop:
            return model, True
    return model, False


def train_filter_stage(model: DrvcnnModel, X, Y, cfg: TrainConfig, log: TrainingLog, rng):
    """Stage 1: train every parameter, then freeze the conv layer."""
    model = replace(model, frozen_conv=False)
    model, _ = _adam_loop(model, X, Y, cfg, cfg.L1, 1, log, rng)
    return replace(model, frozen_conv=True)


def train_modeling_stage(model: DrvcnnModel, X, Y, cfg: TrainConfig, log: TrainingLog, rng):
    """Stage 2: retrain attention and FC layers around the frozen conv layer."""
    model = replace(model, frozen_conv=True)
    model, _ = _adam_loop(model, X, Y, cfg, cfg.L2, 2, log, rng)
    return model


def train_two_stage(model: DrvcnnModel, train, cfg: TrainConfig):
    """Two-stage training: pre-designed filter extraction, then PA modeling.

    If the model already carries a frozen (loaded) filter, stage 1 is
    skipped. Each stage starts from a fresh Adam state.
    """
    if model.kind != "drvcnn":
        raise ConfigurationError("two-stage training applies to the convolutional model")
    if train.K != model.K:
        raise ConfigurationError(f"dataset has K={train.K}, model expects K={model.K}")
    X, Y = training_arrays(model, train, cfg.edge)
    if X.shape[0] == 0:
        raise ConfigurationError("empty training set")
    rng = np.random.default_rng(cfg.seed)
    log = TrainingLog()
    if not model.frozen_conv:
        model = train_filter_stage(model, X, Y, cfg, log, rng)
    filt = (model.conv.kernels.copy(), model.conv.biases.copy())
    model = train_modeling_stage(model, X, Y, cfg, log, rng)
    assert np.array_equal(filt[0], model.conv.kernels) and np.array_equal(filt[1], model.conv.biases)
    return model, log


def train_mlp(model: MlpModel, train, cfg: TrainConfig):
    """Single-stage Adam training of a fully connected baseline for L1 + L2 epochs."""
    if train.K != model.K:
        raise ConfigurationError(f"dataset has K={train.K}, model expects K={model.K}")
    X, Y = training_arrays(model, train, cfg.edge)
    log = TrainingLog()
    model, _ = _adam_loop(model, X, Y, cfg, cfg.L1 + cfg.L2, 1, log, np.random.default_rng(cfg.seed))
    return model, log


def fit_gmp(train, index: GmpIndex = DEFAULT_GMP_INDEX) -> GmpModel:
    if train.K != 1:
        raise ConfigurationError("multi-carrier GMP unsupported")
    return gmp_fit(train.inputs[0], train.outputs[0], index)


def load_predesigned_filter(model: DrvcnnModel, filter_params) -> DrvcnnModel:
    """Install a conv layer (ConvLayer or (kernels, biases)) and freeze it."""
    if isinstance(filter_params, ConvLayer):
        kernels, biases = filter_params.kernels, filter_params.biases
    elif isinstance(filter_params, dict):
        kernels, biases = filter_params["conv.kernels"], filter_params["conv.biases"]
    else:
        kernels, biases = filter_params
    try:
        new = model.with_parameters({"conv.kernels": np.array(kernels, dtype=np.float64),
                                     "conv.biases": np.array(biases, dtype=np.float64)})
    except ShapeError as exc:
        raise ConfigurationError(f"pre-designed filter does not fit this model: {exc}") from exc
    return replace(new, frozen_conv=True)


# -- execution --------------------------------------------------------------


def predict_series(model, carriers_in, chunk: int = 8192) -> np.ndarray:
    """Predicted PA output per carrier, shape (K, N) complex."""
    inputs = np.array([getattr(c, "samples", c) for c in carriers_in], dtype=np.complex128, ndmin=2)
    if inputs.shape[0] != model.K:
        raise ConfigurationError(f"model expects K={model.K} carriers, got {inputs.shape[0]}")
    if model.kind == "gmp":
        return gmp_predict(model, inputs[0])[None, :]
    X = model_inputs(model, inputs)
    y = np.concatenate([model_forward(X[i : i + chunk], model) for i in range(0, X.shape[0], chunk)])
    return from_targets(y)
