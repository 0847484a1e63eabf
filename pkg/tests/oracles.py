"""Independent reference computations used by the tests."""

import math

import numpy as np

from pa_modelkit.neuralcore import mse_loss


def central_differences(model, X, Y, names=None, h=1e-5):
    """Numerical gradient of the batch MSE for every scalar parameter."""
    params = model.parameters()
    out = {}
    for name in names or params:
        base = params[name]
        num = np.zeros_like(base)
        for idx in np.ndindex(base.shape):
            bumped = base.copy()
            bumped[idx] = base[idx] + h
            up = mse_loss(model.with_parameters({name: bumped}), X, Y)
            bumped[idx] = base[idx] - h
            down = mse_loss(model.with_parameters({name: bumped}), X, Y)
            num[idx] = (up - down) / (2 * h)
        out[name] = num
    return out


def block_relative_error(analytic, numeric):
    """max |a - n| over a block, relative to the block's largest gradient magnitude."""
    a, n = np.asarray(analytic), np.asarray(numeric)
    scale = max(np.abs(a).max(), np.abs(n).max())
    if scale == 0:
        return 0.0
    return float(np.abs(a - n).max() / scale)


def nmse_loop(pred, meas):
    """Per-sample summation of the normalised error power, in dB."""
    num = 0.0
    den = 0.0
    for p, m in zip(pred, meas):
        num += (p.real - m.real) ** 2 + (p.imag - m.imag) ** 2
        den += m.real**2 + m.imag**2
    return -math.inf if num == 0 else 10 * math.log10(num / den)


def randomize(model, rng, scale=0.5):
    return model.with_parameters({k: v + rng.normal(0, scale, v.shape) for k, v in model.parameters().items()})
