"""The five classifier architectures, the training loop, and scoring.

Layer plans are fixed per architecture (widths are a documented design
choice; only the cell families and the "more than three hidden layers"
depth of the dense net are externally constrained):

    dnn   Dense 128 -> 64 -> 32 -> 16 (relu), Dense 1 (sigmoid)
    cnn   reshape (T=input_dim, C=1); Conv1D(32, w3, relu) -> maxpool(2)
          -> Conv1D(64, w3, relu) -> maxpool(2) -> flatten
          -> Dense 64 (relu) -> Dense 1 (sigmoid)
    rnn / lstm / gru
          reshape (T=input_dim, C=1); one 64-unit recurrent layer,
          last hidden state -> Dense 1 (sigmoid)

Forward passes are pure; per-call caches are owned by the caller, so a
trained model can score from many threads at once.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from . import nncore
from .errors import DataError, TrainingDivergedError
from .preprocess import EncodedDataset

ARCHITECTURES = ("dnn", "cnn", "rnn", "lstm", "gru")

RECURRENT_UNITS = 64
DNN_WIDTHS = (128, 64, 32, 16)
CNN_FILTERS = (32, 64)
CNN_KERNEL_WIDTH = 3
CNN_POOL = 2
CNN_DENSE = 64


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    lr: float = 0.01
    batch_size: int = 1024
    validation_fraction: float = 0.2
    seed: int = 0
    threshold: float = 0.5

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must lie in [0, 1)")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must lie in (0, 1)")
        if self.lr <= 0.0:
            raise ValueError("lr must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass(frozen=True)
class ModelSpec:
    arch: str
    input_dim: int
    plan: tuple[dict, ...]
    param_count: int


@dataclass(frozen=True)
class EpochStats:
    train_loss: float
    val_loss: float
    val_accuracy: float


# ---------------------------------------------------------------------------
# layers: thin stateful wrappers over the nncore forward/backward pairs


class _SeqReshape:
    """(B, D) -> (B, D, 1): treat the feature vector as a 1-channel sequence."""

    param_order = ()

    def __init__(self):
        self.params = {}

    def describe(self):
        return {"kind": "reshape_seq"}

    def forward(self, x):
        return x[:, :, None], None

    def backward(self, dy, cache):
        return dy[:, :, 0], {}

    @staticmethod
    def out_shape(in_shape):
        return (*in_shape, 1)


class _Flatten:
    param_order = ()

    def __init__(self):
        self.params = {}

    def describe(self):
        return {"kind": "flatten"}

    def forward(self, x):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, dy, cache):
        return dy.reshape(cache), {}

    @staticmethod
    def out_shape(in_shape):
        return (int(np.prod(in_shape)),)


class _Dense:
    param_order = ("w", "b")

    def __init__(self, in_dim, out_dim, activation, rng):
        self.in_dim, self.out_dim, self.activation = in_dim, out_dim, activation
        self.params = {
            "w": nncore.glorot_uniform(rng, (in_dim, out_dim), in_dim, out_dim),
            "b": np.zeros(out_dim),
        }

    def describe(self):
        return {"kind": "dense", "in": self.in_dim, "out": self.out_dim, "activation": self.activation}

    def forward(self, x):
        return nncore.dense_forward(x, self.params["w"], self.params["b"], self.activation)

    def backward(self, dy, cache):
        dx, dw, db = nncore.dense_backward(dy, cache)
        return dx, {"w": dw, "b": db}

    def out_shape(self, in_shape):
        return (self.out_dim,)


class _Conv1D:
    param_order = ("k", "b")

    def __init__(self, in_ch, filters, width, activation, rng, stride=1, padding="valid"):
        self.in_ch, self.filters, self.width = in_ch, filters, width
        self.stride, self.padding, self.activation = stride, padding, activation
        fan = width * in_ch, width * filters
        self.params = {
            "k": nncore.glorot_uniform(rng, (filters, width, in_ch), *fan),
            "b": np.zeros(filters),
        }

    def describe(self):
        return {
            "kind": "conv1d",
            "in_ch": self.in_ch,
            "filters": self.filters,
            "width": self.width,
            "stride": self.stride,
            "padding": self.padding,
            "activation": self.activation,
        }

    def forward(self, x):
        a, conv_cache = nncore.conv1d_forward(x, self.params["k"], self.params["b"], self.stride, self.padding)
        y = nncore.apply_activation(a, self.activation)
        return y, (conv_cache, y)

    def backward(self, dy, cache):
        conv_cache, y = cache
        da = nncore.activation_grad(dy, y, self.activation)
        dx, dk, db = nncore.conv1d_backward(da, conv_cache)
        return dx, {"k": dk, "b": db}

    def out_shape(self, in_shape):
        t_out, _, _ = nncore.conv_geometry(in_shape[0], self.width, self.stride, self.padding)
        return (t_out, self.filters)


class _MaxPool1D:
    param_order = ()

    def __init__(self, window, stride=None):
        self.window = window
        self.stride = window if stride is None else stride
        self.params = {}

    def describe(self):
        return {"kind": "maxpool1d", "window": self.window, "stride": self.stride}

    def forward(self, x):
        return nncore.maxpool1d_forward(x, self.window, self.stride)

    def backward(self, dy, cache):
        return nncore.maxpool1d_backward(dy, cache), {}

    def out_shape(self, in_shape):
        if self.window > in_shape[0]:
            raise ValueError(f"pool window {self.window} exceeds length {in_shape[0]}")
        return ((in_shape[0] - self.window) // self.stride + 1, in_shape[1])


class _Recurrent:
    """Single recurrent layer over (B, T, C); emits the final hidden state."""

    param_order = ("wx", "wh", "b")

    def __init__(self, kind, in_dim, hidden, rng):
        self.kind, self.in_dim, self.hidden = kind, in_dim, hidden
        gates = {"rnn": 1, "lstm": 4, "gru": 3}[kind]
        self.params = {
            "wx": nncore.glorot_uniform(rng, (in_dim, gates * hidden), in_dim, gates * hidden),
            "wh": nncore.glorot_uniform(rng, (hidden, gates * hidden), hidden, gates * hidden),
            "b": np.zeros(gates * hidden),
        }

    def describe(self):
        return {"kind": self.kind, "in": self.in_dim, "hidden": self.hidden}

    def forward(self, x):
        b, t, _ = x.shape
        wx, wh, bias = self.params["wx"], self.params["wh"], self.params["b"]
        h = np.zeros((b, self.hidden))
        c = np.zeros((b, self.hidden))
        steps = []
        for i in range(t):
            if self.kind == "rnn":
                h, cache = nncore.rnn_step(x[:, i, :], h, wx, wh, bias)
            elif self.kind == "lstm":
                h, c, cache = nncore.lstm_step(x[:, i, :], h, c, wx, wh, bias)
            else:
                h, cache = nncore.gru_step(x[:, i, :], h, wx, wh, bias)
            steps.append(cache)
        return h, (x.shape, steps)

    def backward(self, dy, cache):
        x_shape, steps = cache
        b, t, _ = x_shape
        dx = np.empty(x_shape)
        dwx = np.zeros_like(self.params["wx"])
        dwh = np.zeros_like(self.params["wh"])
        db = np.zeros_like(self.params["b"])
        dh = dy
        dc = np.zeros((b, self.hidden))
        for i in range(t - 1, -1, -1):
            if self.kind == "rnn":
                dxi, dh, g_wx, g_wh, g_b = nncore.rnn_step_backward(dh, steps[i])
            elif self.kind == "lstm":
                dxi, dh, dc, g_wx, g_wh, g_b = nncore.lstm_step_backward(dh, dc, steps[i])
            else:
                dxi, dh, g_wx, g_wh, g_b = nncore.gru_step_backward(dh, steps[i])
            dx[:, i, :] = dxi
            dwx += g_wx
            dwh += g_wh
            db += g_b
        return dx, {"wx": dwx, "wh": dwh, "b": db}

    def out_shape(self, in_shape):
        return (self.hidden,)


class Network:
    """An ordered layer stack ending in a single sigmoid unit."""

    def __init__(self, layers):
        self.layers = list(layers)

    def forward(self, x):
        caches = []
        for layer in self.layers:
            x, cache = layer.forward(x)
            caches.append(cache)
        return x[:, 0], caches

    def backward(self, dp, caches):
        grads = {}
        dy = dp[:, None]
        for i in range(len(self.layers) - 1, -1, -1):
            dy, layer_grads = self.layers[i].backward(dy, caches[i])
            for name, g in layer_grads.items():
                grads[f"{i}.{name}"] = g
        return grads

    def scores(self, x, batch_size=4096):
        """Inference-only forward over (N, D); pure and thread-safe."""
        x = np.asarray(x, dtype=np.float64)
        parts = []
        for start in range(0, x.shape[0], batch_size):
            p, _ = self.forward(x[start : start + batch_size])
            parts.append(p)
        return np.concatenate(parts) if parts else np.empty(0)

    @property
    def params(self):
        out = {}
        for i, layer in enumerate(self.layers):
            for name in layer.param_order:
                out[f"{i}.{name}"] = layer.params[name]
        return out

    def param_count(self):
        return sum(int(p.size) for p in self.params.values())

    def plan(self):
        return tuple(layer.describe() for layer in self.layers)


@dataclass(frozen=True)
class TrainedModel:
    spec: ModelSpec
    net: Network
    config: TrainConfig
    history: tuple[EpochStats, ...]
    threshold: float
    encoder_digest: str | None = None


def _build_layers(arch, input_dim, rng):
    if arch == "dnn":
        layers = []
        width_in = input_dim
        for width in DNN_WIDTHS:
            layers.append(_Dense(width_in, width, "relu", rng))
            width_in = width
        layers.append(_Dense(width_in, 1, "sigmoid", rng))
        return layers
    if arch == "cnn":
        layers = [_SeqReshape()]
        shape = (input_dim, 1)
        in_ch = 1
        for filters in CNN_FILTERS:
            conv = _Conv1D(in_ch, filters, CNN_KERNEL_WIDTH, "relu", rng)
            pool = _MaxPool1D(CNN_POOL)
            shape = pool.out_shape(conv.out_shape(shape))
            layers.extend([conv, pool])
            in_ch = filters
        layers.append(_Flatten())
        flat = int(np.prod(shape))
        layers.append(_Dense(flat, CNN_DENSE, "relu", rng))
        layers.append(_Dense(CNN_DENSE, 1, "sigmoid", rng))
        return layers
    if arch in ("rnn", "lstm", "gru"):
        return [
            _SeqReshape(),
            _Recurrent(arch, 1, RECURRENT_UNITS, rng),
            _Dense(RECURRENT_UNITS, 1, "sigmoid", rng),
        ]
    raise ValueError(f"unknown architecture {arch!r}; expected one of {ARCHITECTURES}")


def build(arch: str, input_dim: int, seed: int) -> tuple[ModelSpec, Network]:
    """Deterministically initialize one architecture for the given input width."""
    if input_dim < 1:
        raise ValueError(f"input_dim must be >= 1, got {input_dim}")
    rng = np.random.default_rng(seed)
    net = Network(_build_layers(arch, input_dim, rng))
    spec = ModelSpec(arch, input_dim, net.plan(), net.param_count())
    return spec, net


def network_from_plan(plan) -> Network:
    """Rebuild the layer stack described by a serialized plan (zero-initialized)."""
    rng = np.random.default_rng(0)
    layers = []
    for entry in plan:
        kind = entry["kind"]
        if kind == "reshape_seq":
            layers.append(_SeqReshape())
        elif kind == "flatten":
            layers.append(_Flatten())
        elif kind == "dense":
            layers.append(_Dense(entry["in"], entry["out"], entry["activation"], rng))
        elif kind == "conv1d":
            layers.append(
                _Conv1D(
                    entry["in_ch"],
                    entry["filters"],
                    entry["width"],
                    entry["activation"],
                    rng,
                    entry["stride"],
                    entry["padding"],
                )
            )
        elif kind == "maxpool1d":
            layers.append(_MaxPool1D(entry["window"], entry["stride"]))
        elif kind in ("rnn", "lstm", "gru"):
            layers.append(_Recurrent(kind, entry["in"], entry["hidden"], rng))
        else:
            raise ValueError(f"unknown layer kind in plan: {kind!r}")
    return Network(layers)


def train(spec: ModelSpec, net: Network, data: EncodedDataset, config: TrainConfig) -> TrainedModel:
    """Minibatch Adam over seeded shuffles; the last validation_fraction of
    the shuffled rows is held out for per-epoch validation metrics."""
    n = len(data)
    if n == 0:
        raise DataError("training data is empty")
    if data.matrix.shape[1] != spec.input_dim:
        raise DataError(f"data has {data.matrix.shape[1]} columns, model expects {spec.input_dim}")
    labels = data.labels.astype(np.float64)
    if labels.min() == labels.max():
        raise DataError("training data contains a single class")

    rng = np.random.default_rng(config.seed)
    perm = rng.permutation(n)
    x = data.matrix[perm]
    y = labels[perm]
    n_val = math.floor(config.validation_fraction * n)
    n_train = n - n_val
    x_train, y_train = x[:n_train], y[:n_train]
    x_val, y_val = x[n_train:], y[n_train:]

    state = nncore.AdamState(lr=config.lr)
    params = net.params
    history = []
    for epoch in range(config.epochs):
        order = rng.permutation(n_train)
        total = 0.0
        for start in range(0, n_train, config.batch_size):
            idx = order[start : start + config.batch_size]
            p, caches = net.forward(x_train[idx])
            loss, dp = nncore.bce_loss(p, y_train[idx])
            if not math.isfinite(loss):
                raise TrainingDivergedError(f"{spec.arch}: non-finite loss at epoch {epoch + 1}")
            grads = net.backward(dp, caches)
            nncore.adam_step(params, grads, state)
            total += loss * len(idx)
        train_loss = total / n_train
        if n_val:
            p_val = net.scores(x_val)
            val_loss, _ = nncore.bce_loss(p_val, y_val)
            val_acc = float(np.mean((p_val >= config.threshold) == (y_val == 1.0)))
        else:
            val_loss, val_acc = float("nan"), float("nan")
        if not math.isfinite(train_loss):
            raise TrainingDivergedError(f"{spec.arch}: non-finite epoch loss at epoch {epoch + 1}")
        history.append(EpochStats(train_loss, val_loss, val_acc))
    return TrainedModel(spec, net, config, tuple(history), config.threshold)


def predict(model: TrainedModel, x) -> float:
    """Score one encoded vector; attack iff score >= model.threshold."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.spec.input_dim,):
        raise DataError(f"expected vector of length {model.spec.input_dim}, got shape {x.shape}")
    p, _ = model.net.forward(x[None, :])
    return float(p[0])


def classify_scores(scores, threshold: float) -> np.ndarray:
    """Attack (1) iff score >= threshold."""
    return (np.asarray(scores) >= threshold).astype(np.uint8)


def history_csv(model: TrainedModel) -> str:
    buf = io.StringIO()
    buf.write("epoch,train_loss,val_loss,val_accuracy\n")
    for i, stats in enumerate(model.history, start=1):
        buf.write(f"{i},{stats.train_loss!r},{stats.val_loss!r},{stats.val_accuracy!r}\n")
    return buf.getvalue()
