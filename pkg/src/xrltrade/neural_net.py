"""Fully connected Q-network (input -> 50 -> 50 -> 2) with hand-written backprop and Adam."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, FormatError, NumericError, UsageError
from .trading_env import N_CHANNELS, Normalizer

N_ACTIONS = 2
MAGIC = b"XRLQNET"
FORMAT_VERSION = b"1"


@dataclass
class QNetwork:
    """Weights are stored as (fan_in, fan_out) so a layer computes ``x @ W + b``.

    ReLU on every hidden layer, identity on the output layer.
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise DimensionError("need one bias vector per weight matrix")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise DimensionError(f"layer {i}: weight {w.shape} and bias {b.shape} disagree")
            if i and self.weights[i - 1].shape[1] != w.shape[0]:
                raise DimensionError(f"layer {i} input {w.shape[0]} != previous output")

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def output_dim(self) -> int:
        return self.weights[-1].shape[1]

    def parameters(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]

    def __call__(self, x):
        return forward(self, x)


def init_network(input_dim: int, seed: int, hidden: int = 50, n_hidden_layers: int = 2) -> QNetwork:
    """Glorot-uniform weights from a seeded generator, zero biases."""
    if input_dim < 1:
        raise DimensionError("input_dim must be >= 1")
    rng = np.random.default_rng(seed)
    sizes = [input_dim] + [hidden] * n_hidden_layers + [N_ACTIONS]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes, sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return QNetwork(weights, biases)


def _check_input(net: QNetwork, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != net.input_dim or x.ndim not in (1, 2):
        raise DimensionError(f"expected observation of length {net.input_dim}, got shape {x.shape}")
    return x


def _forward_cache(net: QNetwork, x: np.ndarray):
    activations = [x]
    pre = None
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        pre = activations[-1] @ w + b
        if i < last:
            activations.append(np.maximum(pre, 0.0))
    return activations, pre


def forward(net: QNetwork, observation) -> np.ndarray:
    """Q-values ``(Q(s, sell), Q(s, buy))``; a 2-D input gives one row per observation."""
    x = _check_input(net, observation)
    _, out = _forward_cache(net, x)
    return out


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def arrays(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]


def backward(net: QNetwork, observation, action_index, target) -> tuple[float, Gradients]:
    """Loss and gradient of the squared TD error on the taken action's head.

    Accepts a single observation or a batch; a batch loss is the mean over rows.
    """
    x = _check_input(net, observation)
    single = x.ndim == 1
    xb = x[None, :] if single else x
    actions = np.atleast_1d(np.asarray(action_index, dtype=np.int64))
    targets = np.atleast_1d(np.asarray(target, dtype=np.float64))
    n = xb.shape[0]
    if actions.shape != (n,) or targets.shape != (n,):
        raise DimensionError("need one action and one target per observation")
    if np.any((actions < 0) | (actions >= net.output_dim)):
        raise UsageError("action index out of range")
    if not np.all(np.isfinite(targets)):
        raise NumericError("non-finite target")

    activations, out = _forward_cache(net, xb)
    rows = np.arange(n)
    err = out[rows, actions] - targets
    loss = float(np.mean(err**2))

    delta = np.zeros_like(out)
    delta[rows, actions] = 2.0 * err / n
    gw = [None] * len(net.weights)
    gb = [None] * len(net.weights)
    for i in range(len(net.weights) - 1, -1, -1):
        gw[i] = activations[i].T @ delta
        gb[i] = delta.sum(axis=0)
        if i:
            delta = (delta @ net.weights[i].T) * (activations[i] > 0)
    return loss, Gradients(gw, gb)


@dataclass
class AdamState:
    learning_rate: float = 0.005
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_network(cls, net: QNetwork, learning_rate: float = 0.005, **kw) -> "AdamState":
        params = net.parameters()
        return cls(
            learning_rate=learning_rate,
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
            **kw,
        )


def adam_step(net: QNetwork, state: AdamState, grads: Gradients) -> tuple[QNetwork, AdamState]:
    """Bias-corrected Adam update, applied in place; returns the same objects."""
    params = net.parameters()
    gs = grads.arrays()
    if len(gs) != len(params) or any(g.shape != p.shape for g, p in zip(gs, params)):
        raise DimensionError("gradient shapes do not match the network")
    if not all(np.all(np.isfinite(g)) for g in gs):
        raise NumericError("non-finite gradient")
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for p, g, m, v in zip(params, gs, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.learning_rate * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return net, state


def copy_parameters(source: QNetwork) -> QNetwork:
    return QNetwork([w.copy() for w in source.weights], [b.copy() for b in source.biases])


def networks_equal(a: QNetwork, b: QNetwork) -> bool:
    pa, pb = a.parameters(), b.parameters()
    return len(pa) == len(pb) and all(np.array_equal(x, y) for x, y in zip(pa, pb))


# Weight file: magic "XRLQNET" + version byte, u32 layer count, u32 (rows, cols)
# per layer, f64 weights row-major then biases per layer, f64 channel mins then maxs.
# All little-endian.


def save_weights(net: QNetwork, normalizer: Normalizer) -> bytes:
    parts = [MAGIC + FORMAT_VERSION, struct.pack("<I", len(net.weights))]
    for w in net.weights:
        parts.append(struct.pack("<II", *w.shape))
    for w, b in zip(net.weights, net.biases):
        parts.append(np.ascontiguousarray(w, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    parts.append(np.asarray(normalizer.mins, dtype="<f8").tobytes())
    parts.append(np.asarray(normalizer.maxs, dtype="<f8").tobytes())
    return b"".join(parts)


def load_weights(data: bytes, expected_input_dim: int | None = None) -> tuple[QNetwork, Normalizer]:
    if len(data) < 8 or data[:7] != MAGIC:
        raise FormatError("not a Q-network weight file (bad magic)")
    if data[7:8] != FORMAT_VERSION:
        raise FormatError(f"unsupported weight file version {data[7:8]!r}")
    pos = 8

    def take(n: int) -> bytes:
        nonlocal pos
        if pos + n > len(data):
            raise FormatError("truncated weight file")
        chunk = data[pos : pos + n]
        pos += n
        return chunk

    (n_layers,) = struct.unpack("<I", take(4))
    if not 1 <= n_layers <= 64:
        raise FormatError(f"implausible layer count {n_layers}")
    shapes = [struct.unpack("<II", take(8)) for _ in range(n_layers)]
    weights, biases = [], []
    for rows, cols in shapes:
        weights.append(np.frombuffer(take(8 * rows * cols), dtype="<f8").reshape(rows, cols).astype(np.float64))
        biases.append(np.frombuffer(take(8 * cols), dtype="<f8").astype(np.float64))
    mins = np.frombuffer(take(8 * N_CHANNELS), dtype="<f8").astype(np.float64)
    maxs = np.frombuffer(take(8 * N_CHANNELS), dtype="<f8").astype(np.float64)
    if pos != len(data):
        raise FormatError(f"{len(data) - pos} trailing bytes after weight file payload")
    try:
        net = QNetwork(weights, biases)
    except DimensionError as exc:
        raise FormatError(f"inconsistent layer shapes: {exc}") from None
    if expected_input_dim is not None and net.input_dim != expected_input_dim:
        raise DimensionError(
            f"weight file expects input_dim {net.input_dim}, configuration gives {expected_input_dim}"
        )
    return net, Normalizer(mins, maxs)
