"""Small real-valued layer engine with analytic gradients and Adam.

Everything is batched over a leading axis and computed in float64. Tensors
follow the (H, W, S) convention: H feature rows, W lags, S channels.
Convolution is 'valid' with stride 1.

The convolutional model is

    R   = tanh(conv(X))                                  (H', W', S)
    W_a = softmax(fc2(tanh(fc1(mean_hw R))))             channel weights, S
    R_a = R * W_a
    W_s = softmax(fc2'(tanh(fc1'(mean_s R_a))))          spatial weights, H'W'
    R_s = R_a * W_s
    y   = out(tanh(fc_b(tanh(fc_a(flatten R_s)))))       2K outputs

with the flatten taken row-major over (h, w, s).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ShapeError

ACTIVATIONS = ("tanh", "softmax", "linear")


@dataclass
class DenseLayer:
    weights: np.ndarray  # (out, in)
    biases: np.ndarray  # (out,)
    activation: str = "tanh"

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.biases = np.asarray(self.biases, dtype=np.float64)
        if self.weights.ndim != 2 or self.biases.shape != (self.weights.shape[0],):
            raise ShapeError(f"inconsistent dense layer shapes {self.weights.shape}, {self.biases.shape}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def shape(self):
        return self.weights.shape


@dataclass
class ConvLayer:
    kernels: np.ndarray  # (S, kh, kw, C)
    biases: np.ndarray  # (S,)

    def __post_init__(self):
        self.kernels = np.asarray(self.kernels, dtype=np.float64)
        self.biases = np.asarray(self.biases, dtype=np.float64)
        if self.kernels.ndim != 4 or self.biases.shape != (self.kernels.shape[0],):
            raise ShapeError(f"inconsistent conv layer shapes {self.kernels.shape}, {self.biases.shape}")


@dataclass
class AttentionParams:
    channel_fc1: DenseLayer  # S -> S/3, tanh
    channel_fc2: DenseLayer  # S/3 -> S, softmax
    spatial_fc1: DenseLayer  # HW -> HW/3, tanh
    spatial_fc2: DenseLayer  # HW/3 -> HW, softmax


@dataclass
class DrvcnnModel:
    K: int
    M: int
    envelope_exponents: tuple
    conv: ConvLayer
    attention: AttentionParams
    fc1: DenseLayer
    fc2: DenseLayer
    out: DenseLayer
    frozen_conv: bool = False

    kind = "drvcnn"

    @property
    def input_shape(self):
        return (2 + len(self.envelope_exponents), self.M + 1, self.K)

    @property
    def map_shape(self):
        s, kh, kw, _ = self.conv.kernels.shape
        h, w, _ = self.input_shape
        return (h - kh + 1, w - kw + 1, s)

    def parameters(self) -> dict:
        a = self.attention
        return {
            "conv.kernels": self.conv.kernels,
            "conv.biases": self.conv.biases,
            "attn.channel.fc1.w": a.channel_fc1.weights,
            "attn.channel.fc1.b": a.channel_fc1.biases,
            "attn.channel.fc2.w": a.channel_fc2.weights,
            "attn.channel.fc2.b": a.channel_fc2.biases,
            "attn.spatial.fc1.w": a.spatial_fc1.weights,
            "attn.spatial.fc1.b": a.spatial_fc1.biases,
            "attn.spatial.fc2.w": a.spatial_fc2.weights,
            "attn.spatial.fc2.b": a.spatial_fc2.biases,
            "head.fc1.w": self.fc1.weights,
            "head.fc1.b": self.fc1.biases,
            "head.fc2.w": self.fc2.weights,
            "head.fc2.b": self.fc2.biases,
            "head.out.w": self.out.weights,
            "head.out.b": self.out.biases,
        }

    def with_parameters(self, params: dict) -> "DrvcnnModel":
        p = {**self.parameters(), **params}
        for name, old in self.parameters().items():
            if np.shape(p[name]) != old.shape:
                raise ShapeError(f"{name}: expected shape {old.shape}, got {np.shape(p[name])}")
        a = self.attention
        return replace(
            self,
            conv=ConvLayer(p["conv.kernels"], p["conv.biases"]),
            attention=AttentionParams(
                DenseLayer(p["attn.channel.fc1.w"], p["attn.channel.fc1.b"], a.channel_fc1.activation),
                DenseLayer(p["attn.channel.fc2.w"], p["attn.channel.fc2.b"], a.channel_fc2.activation),
                DenseLayer(p["attn.spatial.fc1.w"], p["attn.spatial.fc1.b"], a.spatial_fc1.activation),
                DenseLayer(p["attn.spatial.fc2.w"], p["attn.spatial.fc2.b"], a.spatial_fc2.activation),
            ),
            fc1=DenseLayer(p["head.fc1.w"], p["head.fc1.b"], self.fc1.activation),
            fc2=DenseLayer(p["head.fc2.w"], p["head.fc2.b"], self.fc2.activation),
            out=DenseLayer(p["head.out.w"], p["head.out.b"], self.out.activation),
        )

    def trainable_names(self) -> list:
        names = list(self.parameters())
        if self.frozen_conv:
            names = [n for n in names if not n.startswith("conv.")]
        return names


@dataclass
class MlpModel:
    """Fully connected baseline: tanh hidden layers, linear output."""

    variant: str  # "arvtdnn" or "dnn"
    K: int
    M: int
    envelope_exponents: tuple
    layers: list

    kind = "mlp"

    def parameters(self) -> dict:
        out = {}
        for i, layer in enumerate(self.layers):
            name = "out" if i == len(self.layers) - 1 else f"fc{i + 1}"
            out[f"{name}.w"] = layer.weights
            out[f"{name}.b"] = layer.biases
        return out

    def with_parameters(self, params: dict) -> "MlpModel":
        p = {**self.parameters(), **params}
        names = list(self.parameters())
        layers = []
        for i, layer in enumerate(self.layers):
            w, b = p[names[2 * i]], p[names[2 * i + 1]]
            if np.shape(w) != layer.weights.shape or np.shape(b) != layer.biases.shape:
                raise ShapeError(f"layer {i}: parameter shape mismatch")
            layers.append(DenseLayer(w, b, layer.activation))
        return replace(self, layers=layers)

    def trainable_names(self) -> list:
        return list(self.parameters())


def count_parameters(model) -> int:
    """Total number of trainable scalars (weights and biases)."""
    if hasattr(model, "coefficient_count"):
        return model.coefficient_count
    return int(sum(np.size(v) for v in model.parameters().values()))


def glorot_uniform(rng: np.random.Generator, fan_out: int, fan_in: int, shape=None) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape or (fan_out, fan_in))


def init_dense(rng, n_in: int, n_out: int, activation: str) -> DenseLayer:
    return DenseLayer(glorot_uniform(rng, n_out, n_in), np.zeros(n_out), activation)


# -- primitive layers -------------------------------------------------------


def _batched(x, ndim):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == ndim:
        return x[None], True
    if x.ndim == ndim + 1:
        return x, False
    raise ShapeError(f"expected a {ndim}-D array or a batch of them, got shape {x.shape}")


def _patches(X: np.ndarray, kh: int, kw: int) -> np.ndarray:
    # (B, H', W', kh*kw*C), window flattened row-major as (i, j, c)
    win = sliding_window_view(X, (kh, kw), axis=(1, 2))  # (B, H', W', C, kh, kw)
    win = win.transpose(0, 1, 2, 4, 5, 3)
    return win.reshape(win.shape[:3] + (-1,))


def conv2d_valid_forward(X, layer: ConvLayer) -> np.ndarray:
    """tanh(valid 2-D convolution + bias) over a (H, W, C) tensor or a batch."""
    Xb, single = _batched(X, 3)
    s, kh, kw, c = layer.kernels.shape
    if Xb.shape[3] != c:
        raise ShapeError(f"input depth {Xb.shape[3]} does not match kernel depth {c}")
    if Xb.shape[1] < kh or Xb.shape[2] < kw:
        raise ShapeError(f"input {Xb.shape[1:3]} smaller than kernel {(kh, kw)}")
    out = np.tanh(_patches(Xb, kh, kw) @ layer.kernels.reshape(s, -1).T + layer.biases)
    return out[0] if single else out


def avg_pool(R, axis: str) -> np.ndarray:
    """Mean over H, W (``axis="spatial"`` -> S values) or over S (``"channel"`` -> H x W)."""
    Rb, single = _batched(R, 3)
    if axis == "spatial":
        out = Rb.mean(axis=(1, 2))
    elif axis == "channel":
        out = Rb.mean(axis=3)
    else:
        raise ValueError("axis must be 'spatial' or 'channel'")
    return out[0] if single else out


def softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _activate(z, activation):
    if activation == "tanh":
        return np.tanh(z)
    if activation == "softmax":
        return softmax(z)
    return z


def dense_forward(x, layer: DenseLayer) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != layer.weights.shape[1]:
        raise ShapeError(f"input length {x.shape[-1]} does not match layer input {layer.weights.shape[1]}")
    return _activate(x @ layer.weights.T + layer.biases, layer.activation)


def channel_attention(R, p: AttentionParams):
    """Channel weights W_a (sum to 1) and the reweighted map R * W_a."""
    Rb, single = _batched(R, 3)
    if Rb.shape[3] != p.channel_fc1.weights.shape[1]:
        raise ShapeError("channel count does not match the attention parameters")
    wa = dense_forward(dense_forward(Rb.mean(axis=(1, 2)), p.channel_fc1), p.channel_fc2)
    ra = Rb * wa[:, None, None, :]
    return (wa[0], ra[0]) if single else (wa, ra)


def spatial_attention(Ra, p: AttentionParams):
    """Spatial weights W_s over the H*W positions and the reweighted map."""
    Rb, single = _batched(Ra, 3)
    b, h, w, _ = Rb.shape
    if h * w != p.spatial_fc1.weights.shape[1]:
        raise ShapeError("spatial size does not match the attention parameters")
    ws = dense_forward(dense_forward(Rb.mean(axis=3).reshape(b, h * w), p.spatial_fc1), p.spatial_fc2)
    rs = Rb * ws.reshape(b, h, w, 1)
    return (ws[0], rs[0]) if single else (ws, rs)


# -- convolutional model ----------------------------------------------------


def _drvcnn_forward(model: DrvcnnModel, X: np.ndarray):
    s, kh, kw, c = model.conv.kernels.shape
    if X.shape[1:] != model.input_shape:
        raise ShapeError(f"input shape {X.shape[1:]} does not match model input {model.input_shape}")
    b = X.shape[0]
    a = model.attention
    P = _patches(X, kh, kw)
    R = np.tanh(P @ model.conv.kernels.reshape(s, -1).T + model.conv.biases)
    _, h, w, _ = R.shape
    pc = R.mean(axis=(1, 2))
    a1 = np.tanh(pc @ a.channel_fc1.weights.T + a.channel_fc1.biases)
    wa = softmax(a1 @ a.channel_fc2.weights.T + a.channel_fc2.biases)
    Ra = R * wa[:, None, None, :]
    ps = Ra.mean(axis=3).reshape(b, h * w)
    s1 = np.tanh(ps @ a.spatial_fc1.weights.T + a.spatial_fc1.biases)
    ws = softmax(s1 @ a.spatial_fc2.weights.T + a.spatial_fc2.biases)
    Rs = Ra * ws.reshape(b, h, w, 1)
    f = Rs.reshape(b, -1)
    h1 = np.tanh(f @ model.fc1.weights.T + model.fc1.biases)
    h2 = np.tanh(h1 @ model.fc2.weights.T + model.fc2.biases)
    y = h2 @ model.out.weights.T + model.out.biases
    cache = dict(P=P, R=R, pc=pc, a1=a1, wa=wa, Ra=Ra, ps=ps, s1=s1, ws=ws, f=f, h1=h1, h2=h2)
    return y, cache


def _softmax_backward(w, dw):
    return w * (dw - np.sum(dw * w, axis=-1, keepdims=True))


def _drvcnn_backward(model: DrvcnnModel, cache: dict, dy: np.ndarray, skip_conv: bool) -> dict:
    a = model.attention
    P, R, Ra, wa, ws = cache["P"], cache["R"], cache["Ra"], cache["wa"], cache["ws"]
    b, h, w, s = R.shape
    g = {}

    g["head.out.w"] = dy.T @ cache["h2"]
    g["head.out.b"] = dy.sum(axis=0)
    dz2 = (dy @ model.out.weights) * (1.0 - cache["h2"] ** 2)
    g["head.fc2.w"] = dz2.T @ cache["h1"]
    g["head.fc2.b"] = dz2.sum(axis=0)
    dz1 = (dz2 @ model.fc2.weights) * (1.0 - cache["h1"] ** 2)
    g["head.fc1.w"] = dz1.T @ cache["f"]
    g["head.fc1.b"] = dz1.sum(axis=0)
    dRs = (dz1 @ model.fc1.weights).reshape(b, h, w, s)

    dRa = dRs * ws.reshape(b, h, w, 1)
    dws = np.sum(dRs * Ra, axis=3).reshape(b, h * w)
    dz = _softmax_backward(ws, dws)
    g["attn.spatial.fc2.w"] = dz.T @ cache["s1"]
    g["attn.spatial.fc2.b"] = dz.sum(axis=0)
    dz = (dz @ a.spatial_fc2.weights) * (1.0 - cache["s1"] ** 2)
    g["attn.spatial.fc1.w"] = dz.T @ cache["ps"]
    g["attn.spatial.fc1.b"] = dz.sum(axis=0)
    dps = dz @ a.spatial_fc1.weights
    dRa = dRa + dps.reshape(b, h, w, 1) / s

    dR = dRa * wa[:, None, None, :]
    dwa = np.sum(dRa * R, axis=(1, 2))
    dz = _softmax_backward(wa, dwa)
    g["attn.channel.fc2.w"] = dz.T @ cache["a1"]
    g["attn.channel.fc2.b"] = dz.sum(axis=0)
    dz = (dz @ a.channel_fc2.weights) * (1.0 - cache["a1"] ** 2)
    g["attn.channel.fc1.w"] = dz.T @ cache["pc"]
    g["attn.channel.fc1.b"] = dz.sum(axis=0)

    if not skip_conv:
        dpc = dz @ a.channel_fc1.weights
        dR = dR + dpc[:, None, None, :] / (h * w)
        dZ = (dR * (1.0 - R**2)).reshape(-1, s)
        g["conv.kernels"] = (dZ.T @ P.reshape(-1, P.shape[-1])).reshape(model.conv.kernels.shape)
        g["conv.biases"] = dZ.sum(axis=0)
    return g


# -- fully connected model --------------------------------------------------


def _mlp_forward(model: MlpModel, X: np.ndarray):
    acts = [X]
    for layer in model.layers:
        acts.append(_activate(acts[-1] @ layer.weights.T + layer.biases, layer.activation))
    return acts[-1], acts


def _mlp_backward(model: MlpModel, acts: list, dy: np.ndarray) -> dict:
    names = list(model.parameters())
    g = {}
    delta = dy
    for i in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[i]
        if layer.activation == "tanh":
            delta = delta * (1.0 - acts[i + 1] ** 2)
        g[names[2 * i]] = delta.T @ acts[i]
        g[names[2 * i + 1]] = delta.sum(axis=0)
        if i:
            delta = delta @ layer.weights
    return {n: g[n] for n in names}


# -- public model API -------------------------------------------------------


def _model_input(model, X):
    X = np.asarray(X, dtype=np.float64)
    if model.kind == "drvcnn":
        return _batched(X, 3)
    return _batched(X, 1)


def model_forward(X, model) -> np.ndarray:
    """Predicted (I_1, Q_1, ..., I_K, Q_K) for one input or a batch."""
    Xb, single = _model_input(model, X)
    if model.kind == "drvcnn":
        y, _ = _drvcnn_forward(model, Xb)
    else:
        if Xb.shape[1] != model.layers[0].weights.shape[1]:
            raise ShapeError(f"input length {Xb.shape[1]} does not match {model.layers[0].weights.shape[1]}")
        y, _ = _mlp_forward(model, Xb)
    return y[0] if single else y


def model_gradients(model, X, Y, frozen_conv: bool | None = None):
    """Batch-mean MSE loss and its exact gradients.

    The loss is the mean of squared errors over all batch entries and all
    2K outputs. Returns ``(loss, grads)`` where ``grads`` maps parameter
    names to arrays; conv entries are omitted when the conv layer is frozen.
    """
    Xb, _ = _model_input(model, X)
    Yb = np.asarray(Y, dtype=np.float64).reshape(Xb.shape[0], -1)
    if Xb.shape[0] == 0:
        raise ShapeError("empty batch")
    if model.kind == "drvcnn":
        y, cache = _drvcnn_forward(model, Xb)
    else:
        y, cache = _mlp_forward(model, Xb)
    err = y - Yb
    loss = float(np.mean(err**2))
    dy = 2.0 * err / err.size
    if model.kind == "drvcnn":
        frozen = model.frozen_conv if frozen_conv is None else frozen_conv
        grads = _drvcnn_backward(model, cache, dy, skip_conv=frozen)
    else:
        grads = _mlp_backward(model, cache, dy)
    return loss, grads


def mse_loss(model, X, Y) -> float:
    y = model_forward(X, model)
    return float(np.mean((np.reshape(y, np.shape(Y)) - np.asarray(Y)) ** 2))


# -- optimiser --------------------------------------------------------------


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict, grads: dict, state: AdamState):
    """One Adam update of the parameters named in ``grads``.

    Returns new ``(params, state)``; inputs are not modified. Moments of a
    parameter start at zero the first time it receives a gradient.
    """
    t = state.t + 1
    new_params = dict(params)
    m, v = dict(state.m), dict(state.v)
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    for name, g in grads.items():
        theta = params[name]
        if np.shape(g) != np.shape(theta):
            raise ShapeError(f"{name}: gradient shape {np.shape(g)} != parameter shape {np.shape(theta)}")
        m[name] = state.beta1 * m.get(name, 0.0) + (1.0 - state.beta1) * g
        v[name] = state.beta2 * v.get(name, 0.0) + (1.0 - state.beta2) * g * g
        m_hat = m[name] / c1
        v_hat = v[name] / c2
        new_params[name] = theta - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return new_params, replace(state, t=t, m=m, v=v)
