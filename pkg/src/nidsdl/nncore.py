"""Minimal deterministic neural-network engine.

Every operation comes as a forward/backward pair working on float64
numpy arrays: forward returns (output, cache), backward consumes the
upstream gradient plus the cache and returns gradients for inputs and
parameters. There is no autodiff graph; callers wire the passes
explicitly, which keeps every gradient finite-difference checkable.

Cell conventions (the layer names fix only the cell family, so the gate
equations used here are pinned once and for all):

    RNN    h' = tanh(x Wx + h Wh + b)
    LSTM   gates packed (i, f, g, o):
               i, f, o = sigmoid(.), g = tanh(.)
               c' = f * c + i * g;  h' = o * tanh(c')
    GRU    gates packed (z, r, n):
               z, r = sigmoid(.)
               n  = tanh(x Wxn + r * (h Whn) + bn)
               h' = (1 - z) * h + z * n

Weights initialize uniformly in +-sqrt(6 / (fan_in + fan_out)), biases
at zero, from a seeded generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("none", "relu", "sigmoid", "tanh")


def sigmoid(z):
    # Split by sign so exp never overflows.
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def relu(z):
    return np.maximum(z, 0.0)


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def _as2d(x, name):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {x.shape}")
    return x


def apply_activation(a, activation):
    if activation == "none":
        return a
    if activation == "relu":
        return relu(a)
    if activation == "sigmoid":
        return sigmoid(a)
    if activation == "tanh":
        return np.tanh(a)
    raise ValueError(f"unknown activation {activation!r}")


def activation_grad(dy, y, activation):
    if activation == "none":
        return dy
    if activation == "relu":
        return dy * (y > 0.0)
    if activation == "sigmoid":
        return dy * y * (1.0 - y)
    if activation == "tanh":
        return dy * (1.0 - y * y)
    raise ValueError(f"unknown activation {activation!r}")


# ---------------------------------------------------------------------------
# dense


def dense_forward(x, w, b, activation="none"):
    """y = act(x W + b) for x (B, in), w (in, out), b (out,)."""
    x = _as2d(x, "x")
    if w.ndim != 2 or x.shape[1] != w.shape[0]:
        raise ValueError(f"dense shape mismatch: x {x.shape} vs w {w.shape}")
    if b.shape != (w.shape[1],):
        raise ValueError(f"dense bias shape {b.shape} does not match w {w.shape}")
    y = apply_activation(x @ w + b, activation)
    return y, (x, w, y, activation)


def dense_backward(dy, cache):
    x, w, y, activation = cache
    da = activation_grad(dy, y, activation)
    return da @ w.T, x.T @ da, da.sum(axis=0)


# ---------------------------------------------------------------------------
# conv1d / maxpool1d


def conv_geometry(t, width, stride, padding):
    if padding == "valid":
        pad_left = pad_right = 0
        t_out = (t - width) // stride + 1 if t >= width else 0
    elif padding == "same":
        t_out = -(-t // stride)  # ceil
        pad_total = max((t_out - 1) * stride + width - t, 0)
        pad_left = pad_total // 2
        pad_right = pad_total - pad_left
    else:
        raise ValueError(f"unknown padding {padding!r}")
    if t_out < 1:
        raise ValueError(f"kernel width {width} exceeds padded length {t + pad_left + pad_right}")
    return t_out, pad_left, pad_right


def _windows(x, width, stride, t_out):
    # (B, T, C) -> view (B, t_out, width, C) without copying.
    b, t, c = x.shape
    sb, st, sc = x.strides
    return np.lib.stride_tricks.as_strided(
        x, shape=(b, t_out, width, c), strides=(sb, st * stride, st, sc), writeable=False
    )


def conv1d_forward(x, kernels, bias, stride=1, padding="valid"):
    """Cross-correlation over (B, T, C) with kernels (K, width, C) -> (B, T', K)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise ValueError(f"conv1d input must be (B, T, C), got {x.shape}")
    k, width, c_k = kernels.shape
    if c_k != x.shape[2]:
        raise ValueError(f"kernel channels {c_k} do not match input channels {x.shape[2]}")
    if bias.shape != (k,):
        raise ValueError(f"conv1d bias shape {bias.shape} does not match {k} kernels")
    t_out, pad_left, pad_right = conv_geometry(x.shape[1], width, stride, padding)
    xp = np.pad(x, ((0, 0), (pad_left, pad_right), (0, 0))) if pad_left or pad_right else x
    cols = _windows(xp, width, stride, t_out)
    y = np.einsum("btwc,kwc->btk", cols, kernels, optimize=True) + bias
    return y, (xp, x.shape, kernels, stride, pad_left, t_out)


def conv1d_backward(dy, cache):
    xp, x_shape, kernels, stride, pad_left, t_out = cache
    k, width, _ = kernels.shape
    cols = _windows(xp, width, stride, t_out)
    dk = np.einsum("btwc,btk->kwc", cols, dy, optimize=True)
    db = dy.sum(axis=(0, 1))
    dcols = np.einsum("btk,kwc->btwc", dy, kernels, optimize=True)
    dxp = np.zeros_like(xp)
    for i in range(width):
        dxp[:, i : i + stride * t_out : stride, :] += dcols[:, :, i, :]
    dx = dxp[:, pad_left : pad_left + x_shape[1], :]
    return dx, dk, db


def maxpool1d_forward(x, window, stride=None):
    """Per-window max over (B, T, C); gradient routes to the earliest argmax."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise ValueError(f"maxpool1d input must be (B, T, C), got {x.shape}")
    stride = window if stride is None else stride
    if window > x.shape[1]:
        raise ValueError(f"pool window {window} exceeds length {x.shape[1]}")
    t_out = (x.shape[1] - window) // stride + 1
    wins = _windows(x, window, stride, t_out)
    arg = wins.argmax(axis=2)  # first max wins ties
    y = np.take_along_axis(wins, arg[:, :, None, :], axis=2)[:, :, 0, :]
    return y, (x.shape, window, stride, t_out, arg)


def maxpool1d_backward(dy, cache):
    x_shape, window, stride, t_out, arg = cache
    dx = np.zeros(x_shape)
    b, c = x_shape[0], x_shape[2]
    bi, ti, ci = np.ix_(np.arange(b), np.arange(t_out), np.arange(c))
    np.add.at(dx, (bi, ti * stride + arg, ci), dy)
    return dx


# ---------------------------------------------------------------------------
# recurrent steps


def rnn_step(x, h, wx, wh, b):
    """h' = tanh(x Wx + h Wh + b)."""
    x, h = _as2d(x, "x"), _as2d(h, "h")
    if x.shape[1] != wx.shape[0] or h.shape[1] != wh.shape[0] or wx.shape[1] != wh.shape[1]:
        raise ValueError(f"rnn shape mismatch: x {x.shape}, h {h.shape}, wx {wx.shape}, wh {wh.shape}")
    h_new = np.tanh(x @ wx + h @ wh + b)
    return h_new, (x, h, wx, wh, h_new)


def rnn_step_backward(dh_new, cache):
    x, h, wx, wh, h_new = cache
    da = dh_new * (1.0 - h_new * h_new)
    return da @ wx.T, da @ wh.T, x.T @ da, h.T @ da, da.sum(axis=0)


def lstm_step(x, h, c, wx, wh, b):
    """One LSTM step with gates packed (i, f, g, o) along the last axis."""
    x, h, c = _as2d(x, "x"), _as2d(h, "h"), _as2d(c, "c")
    hidden = h.shape[1]
    if wx.shape != (x.shape[1], 4 * hidden) or wh.shape != (hidden, 4 * hidden) or b.shape != (4 * hidden,):
        raise ValueError(f"lstm shape mismatch: x {x.shape}, h {h.shape}, wx {wx.shape}, wh {wh.shape}, b {b.shape}")
    z = x @ wx + h @ wh + b
    i = sigmoid(z[:, :hidden])
    f = sigmoid(z[:, hidden : 2 * hidden])
    g = np.tanh(z[:, 2 * hidden : 3 * hidden])
    o = sigmoid(z[:, 3 * hidden :])
    c_new = f * c + i * g
    tc = np.tanh(c_new)
    h_new = o * tc
    return h_new, c_new, (x, h, c, wx, wh, i, f, g, o, tc)


def lstm_step_backward(dh_new, dc_new, cache):
    x, h, c, wx, wh, i, f, g, o, tc = cache
    do = dh_new * tc
    dc_total = dc_new + dh_new * o * (1.0 - tc * tc)
    di = dc_total * g
    df = dc_total * c
    dg = dc_total * i
    dc = dc_total * f
    dz = np.concatenate(
        [di * i * (1.0 - i), df * f * (1.0 - f), dg * (1.0 - g * g), do * o * (1.0 - o)], axis=1
    )
    return dz @ wx.T, dz @ wh.T, dc, x.T @ dz, h.T @ dz, dz.sum(axis=0)


def gru_step(x, h, wx, wh, b):
    """One GRU step with gates packed (z, r, n) along the last axis."""
    x, h = _as2d(x, "x"), _as2d(h, "h")
    hidden = h.shape[1]
    if wx.shape != (x.shape[1], 3 * hidden) or wh.shape != (hidden, 3 * hidden) or b.shape != (3 * hidden,):
        raise ValueError(f"gru shape mismatch: x {x.shape}, h {h.shape}, wx {wx.shape}, wh {wh.shape}, b {b.shape}")
    zx = x @ wx + b
    hh = h @ wh
    z = sigmoid(zx[:, :hidden] + hh[:, :hidden])
    r = sigmoid(zx[:, hidden : 2 * hidden] + hh[:, hidden : 2 * hidden])
    hn = hh[:, 2 * hidden :]
    n = np.tanh(zx[:, 2 * hidden :] + r * hn)
    h_new = (1.0 - z) * h + z * n
    return h_new, (x, h, wx, wh, z, r, n, hn)


def gru_step_backward(dh_new, cache):
    x, h, wx, wh, z, r, n, hn = cache
    dz = dh_new * (n - h)
    dn = dh_new * z
    dan = dn * (1.0 - n * n)
    dr = dan * hn
    daz = dz * z * (1.0 - z)
    dar = dr * r * (1.0 - r)
    dzx = np.concatenate([daz, dar, dan], axis=1)
    dhh = np.concatenate([daz, dar, dan * r], axis=1)
    dx = dzx @ wx.T
    dh = dhh @ wh.T + dh_new * (1.0 - z)
    return dx, dh, x.T @ dzx, h.T @ dhh, dzx.sum(axis=0)


# ---------------------------------------------------------------------------
# loss and optimizer

BCE_EPS = 1e-12


def bce_loss(p, y):
    """Mean binary cross-entropy over probabilities; returns (loss, dL/dp).

    Probabilities clamp to [BCE_EPS, 1 - BCE_EPS] so the loss stays finite
    at p in {0, 1}; the gradient is zero where the clamp binds.
    """
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if p.shape != y.shape:
        raise ValueError(f"shape mismatch: p {p.shape} vs y {y.shape}")
    if p.size == 0:
        raise ValueError("empty probability vector")
    if (p < 0.0).any() or (p > 1.0).any():
        raise ValueError("probabilities must lie in [0, 1]")
    pc = np.clip(p, BCE_EPS, 1.0 - BCE_EPS)
    loss = float(np.mean(-(y * np.log(pc) + (1.0 - y) * np.log1p(-pc))))
    inside = (p > BCE_EPS) & (p < 1.0 - BCE_EPS)
    dp = np.where(inside, (pc - y) / (pc * (1.0 - pc)), 0.0) / p.size
    return loss, dp


@dataclass
class AdamState:
    """Adam moments plus hyperparameters; one entry per named parameter."""

    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.lr <= 0.0:
            raise ValueError("learning rate must be positive")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("betas must lie in [0, 1)")
        if self.t < 0:
            raise ValueError("step counter must be non-negative")


def adam_step(params: dict, grads: dict, state: AdamState):
    """Bias-corrected Adam update, in place on the parameter arrays."""
    state.t += 1
    bc1 = 1.0 - state.beta1**state.t
    bc2 = 1.0 - state.beta2**state.t
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {name!r} {p.shape}")
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.epsilon)
    return params, state


# ---------------------------------------------------------------------------
# gradient checking

FD_STEP = 1e-5


@dataclass(frozen=True)
class GradCheckReport:
    name: str
    max_rel_error: float
    worst_input: str
    worst_index: tuple
    analytic: float
    numeric: float

    def passed(self, tolerance: float) -> bool:
        return self.max_rel_error < tolerance


def grad_check(fn, inputs: dict, step: float = FD_STEP, name: str = "fragment") -> GradCheckReport:
    """Compare fn's analytic gradients against central finite differences.

    fn maps {name: array} to (scalar loss, {name: gradient array}); every
    entry of every input is perturbed by +-step. Relative error per entry
    is |a - n| / max(|a|, |n|, 1e-8).
    """
    _, analytic = fn(inputs)
    worst = (-1.0, "", (), 0.0, 0.0)
    for key, arr in inputs.items():
        a_grad = analytic[key]
        it = np.nditer(arr, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            orig = arr[idx]
            arr[idx] = orig + step
            loss_hi, _ = fn(inputs)
            arr[idx] = orig - step
            loss_lo, _ = fn(inputs)
            arr[idx] = orig
            numeric = (loss_hi - loss_lo) / (2.0 * step)
            a = float(a_grad[idx])
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            if rel > worst[0]:
                worst = (rel, key, idx, a, numeric)
            it.iternext()
    return GradCheckReport(name, worst[0], worst[1], worst[2], worst[3], worst[4])


def _rng_inputs(rng, *shapes):
    return [rng.uniform(-1.0, 1.0, size=shape) for shape in shapes]


def _weighted_sum_loss(y, weights):
    return float((y * weights).sum())


def check_dense(seed: int, activation: str = "relu") -> GradCheckReport:
    rng = np.random.default_rng(seed)
    b, din, dout = rng.integers(1, 8, size=3)
    bias = rng.uniform(-0.5, 0.5, size=dout)
    # Redraw until no pre-activation sits near the relu kink, where central
    # differences are invalid.
    while True:
        x, w = _rng_inputs(rng, (b, din), (din, dout))
        if np.abs(x @ w + bias).min() > 1e-3:
            break
    weights = rng.normal(size=(b, dout))

    def fn(inputs):
        y, cache = dense_forward(inputs["x"], inputs["w"], inputs["b"], activation)
        dx, dw, db = dense_backward(weights, cache)
        return _weighted_sum_loss(y, weights), {"x": dx, "w": dw, "b": db}

    return grad_check(fn, {"x": x, "w": w, "b": bias}, name=f"dense/{activation}")


def check_conv1d(seed: int) -> GradCheckReport:
    rng = np.random.default_rng(seed)
    b = int(rng.integers(1, 4))
    t = int(rng.integers(4, 9))
    c = int(rng.integers(1, 4))
    k = int(rng.integers(1, 4))
    width = int(rng.integers(1, min(t, 4) + 1))
    stride = int(rng.integers(1, 3))
    padding = "valid" if rng.integers(2) else "same"
    x, kernels = _rng_inputs(rng, (b, t, c), (k, width, c))
    bias = rng.uniform(-0.5, 0.5, size=k)
    t_out, _, _ = conv_geometry(t, width, stride, padding)
    weights = rng.normal(size=(b, t_out, k))

    def fn(inputs):
        y, cache = conv1d_forward(inputs["x"], inputs["k"], inputs["b"], stride, padding)
        dx, dk, db = conv1d_backward(weights, cache)
        return _weighted_sum_loss(y, weights), {"x": dx, "k": dk, "b": db}

    return grad_check(fn, {"x": x, "k": kernels, "b": bias}, name=f"conv1d/{padding}/s{stride}")


def check_maxpool(seed: int) -> GradCheckReport:
    rng = np.random.default_rng(seed)
    b = int(rng.integers(1, 4))
    t = int(rng.integers(3, 9))
    c = int(rng.integers(1, 4))
    window = int(rng.integers(2, min(t, 4) + 1))
    stride = int(rng.integers(1, 3))
    # Spread values out so the finite-difference step cannot flip an argmax.
    x = rng.permutation(b * t * c).astype(np.float64).reshape(b, t, c) * 0.1
    t_out = (t - window) // stride + 1
    weights = rng.normal(size=(b, t_out, c))

    def fn(inputs):
        y, cache = maxpool1d_forward(inputs["x"], window, stride)
        dx = maxpool1d_backward(weights, cache)
        return _weighted_sum_loss(y, weights), {"x": dx}

    return grad_check(fn, {"x": x}, name=f"maxpool/w{window}s{stride}")


def check_rnn(seed: int) -> GradCheckReport:
    rng = np.random.default_rng(seed)
    b, din, hidden = (int(v) for v in rng.integers(1, 8, size=3))
    x, h, wx, wh = _rng_inputs(rng, (b, din), (b, hidden), (din, hidden), (hidden, hidden))
    bias = rng.uniform(-0.5, 0.5, size=hidden)
    weights = rng.normal(size=(b, hidden))

    def fn(inputs):
        h_new, cache = rnn_step(inputs["x"], inputs["h"], inputs["wx"], inputs["wh"], inputs["b"])
        dx, dh, dwx, dwh, db = rnn_step_backward(weights, cache)
        return _weighted_sum_loss(h_new, weights), {"x": dx, "h": dh, "wx": dwx, "wh": dwh, "b": db}

    return grad_check(fn, {"x": x, "h": h, "wx": wx, "wh": wh, "b": bias}, name="rnn_step")


def check_lstm(seed: int) -> GradCheckReport:
    rng = np.random.default_rng(seed)
    b, din, hidden = (int(v) for v in rng.integers(1, 8, size=3))
    x, h, c, wx, wh = _rng_inputs(rng, (b, din), (b, hidden), (b, hidden), (din, 4 * hidden), (hidden, 4 * hidden))
    bias = rng.uniform(-0.5, 0.5, size=4 * hidden)
    w_h = rng.normal(size=(b, hidden))
    w_c = rng.normal(size=(b, hidden))

    def fn(inputs):
        h_new, c_new, cache = lstm_step(
            inputs["x"], inputs["h"], inputs["c"], inputs["wx"], inputs["wh"], inputs["b"]
        )
        dx, dh, dc, dwx, dwh, db = lstm_step_backward(w_h, w_c, cache)
        loss = _weighted_sum_loss(h_new, w_h) + _weighted_sum_loss(c_new, w_c)
        return loss, {"x": dx, "h": dh, "c": dc, "wx": dwx, "wh": dwh, "b": db}

    return grad_check(fn, {"x": x, "h": h, "c": c, "wx": wx, "wh": wh, "b": bias}, name="lstm_step")


def check_gru(seed: int) -> GradCheckReport:
    rng = np.random.default_rng(seed)
    b, din, hidden = (int(v) for v in rng.integers(1, 8, size=3))
    x, h, wx, wh = _rng_inputs(rng, (b, din), (b, hidden), (din, 3 * hidden), (hidden, 3 * hidden))
    bias = rng.uniform(-0.5, 0.5, size=3 * hidden)
    weights = rng.normal(size=(b, hidden))

    def fn(inputs):
        h_new, cache = gru_step(inputs["x"], inputs["h"], inputs["wx"], inputs["wh"], inputs["b"])
        dx, dh, dwx, dwh, db = gru_step_backward(weights, cache)
        return _weighted_sum_loss(h_new, weights), {"x": dx, "h": dh, "wx": dwx, "wh": dwh, "b": db}

    return grad_check(fn, {"x": x, "h": h, "wx": wx, "wh": wh, "b": bias}, name="gru_step")


def check_bce_composite(seed: int) -> GradCheckReport:
    """Dense(sigmoid) feeding bce_loss: the full output head of every model."""
    rng = np.random.default_rng(seed)
    b, din = int(rng.integers(2, 8)), int(rng.integers(1, 8))
    x, w = _rng_inputs(rng, (b, din), (din, 1))
    bias = rng.uniform(-0.5, 0.5, size=1)
    y = rng.integers(0, 2, size=b).astype(np.float64)

    def fn(inputs):
        p2d, cache = dense_forward(inputs["x"], inputs["w"], inputs["b"], "sigmoid")
        loss, dp = bce_loss(p2d[:, 0], y)
        dx, dw, db = dense_backward(dp[:, None], cache)
        return loss, {"x": dx, "w": dw, "b": db}

    return grad_check(fn, {"x": x, "w": w, "b": bias}, name="bce_composite")


LAYER_CHECKS = {
    "dense": check_dense,
    "conv1d": check_conv1d,
    "maxpool": check_maxpool,
    "rnn": check_rnn,
    "lstm": check_lstm,
    "gru": check_gru,
    "bce": check_bce_composite,
}


def run_all_checks(seeds=range(20), tolerance: float = 1e-4, layers=None) -> dict[str, GradCheckReport]:
    """Run every layer check over the given seeds; keep each layer's worst report."""
    names = tuple(layers) if layers else tuple(LAYER_CHECKS)
    unknown = [n for n in names if n not in LAYER_CHECKS]
    if unknown:
        raise ValueError(f"unknown layer kind(s): {unknown}")
    worst: dict[str, GradCheckReport] = {}
    for name in names:
        for seed in seeds:
            report = LAYER_CHECKS[name](seed)
            if name not in worst or report.max_rel_error > worst[name].max_rel_error:
                worst[name] = report
    return worst
