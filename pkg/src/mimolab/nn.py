"""Dense feed-forward networks trained with backpropagation and AdaBound.

Batches are row-major: an input batch has shape ``(B, input_dim)``.  Losses
are summed over the batch by :func:`loss`/:func:`backward`; :func:`train`
averages them per sample so step sizes do not depend on the batch size.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from . import ops

HIDDEN_ACTIVATIONS = ("relu", "linear")
HEADS = ("softmax", "cluster_softmax", "sigmoid", "linear")
LOG_FLOOR = 1e-12
WIDE_HIDDEN = (1024, 512, 256)
DESK_HIDDEN = (256, 128, 64)


@dataclass
class Layer:
    W: np.ndarray  # (fan_in, fan_out)
    b: np.ndarray
    activation: str


@dataclass
class DenseNetwork:
    layers: list[Layer]
    clusters: int = 1

    def __post_init__(self):
        if not self.layers:
            raise ValueError("a network needs at least one layer")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.W.shape[1] != nxt.W.shape[0]:
                raise ValueError("layer dimensions do not chain")
            if prev.activation not in HIDDEN_ACTIVATIONS:
                raise ValueError(f"{prev.activation} is only allowed on the final layer")
        for layer in self.layers:
            if layer.b.shape != (layer.W.shape[1],):
                raise ValueError("bias length must equal layer width")
            if not (np.all(np.isfinite(layer.W)) and np.all(np.isfinite(layer.b))):
                raise ValueError("network parameters must be finite")
        if self.head not in HEADS:
            raise ValueError(f"unknown head {self.head!r}")
        if self.head == "cluster_softmax" and self.output_dim % self.clusters:
            raise ValueError("output width must split evenly into clusters")

    @classmethod
    def build(cls, dims: Sequence[int], head: str = "softmax", *, clusters: int = 1,
              hidden_activation: str = "relu", rng: np.random.Generator | None = None,
              dtype=np.float64) -> "DenseNetwork":
        """Glorot-uniform weights and zero biases for the layer widths ``dims``."""
        rng = np.random.default_rng(0) if rng is None else rng
        layers = []
        for i, (fan_in, fan_out) in enumerate(zip(dims, dims[1:])):
            limit = math.sqrt(6.0 / (fan_in + fan_out))
            W = rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(dtype)
            act = head if i == len(dims) - 2 else hidden_activation
            layers.append(Layer(W, np.zeros(fan_out, dtype=dtype), act))
        return cls(layers, clusters)

    @property
    def input_dim(self) -> int:
        return self.layers[0].W.shape[0]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].W.shape[1]

    @property
    def head(self) -> str:
        return self.layers[-1].activation

    @property
    def dims(self) -> list[int]:
        return [self.input_dim] + [layer.W.shape[1] for layer in self.layers]

    @property
    def dtype(self):
        return self.layers[0].W.dtype

    def params(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out += [layer.W, layer.b]
        return out

    def is_zero(self) -> bool:
        return all(not np.any(p) for p in self.params())

    def copy(self) -> "DenseNetwork":
        return copy.deepcopy(self)

    def forward(self, x) -> np.ndarray:
        return forward(self, x)


def _activate(z, kind: str, clusters: int = 1):
    if kind == "relu":
        return np.maximum(z, 0)
    if kind == "linear":
        return z
    if kind == "sigmoid":
        return 0.5 * (1.0 + np.tanh(0.5 * z))
    if kind == "softmax":
        e = np.exp(z - z.max(axis=-1, keepdims=True))
        return e / e.sum(axis=-1, keepdims=True)
    if kind == "cluster_softmax":
        shape = z.shape
        g = z.reshape(shape[:-1] + (clusters, shape[-1] // clusters))
        e = np.exp(g - g.max(axis=-1, keepdims=True))
        return (e / e.sum(axis=-1, keepdims=True)).reshape(shape)
    raise ValueError(f"unknown activation {kind!r}")


def _check_input(net: DenseNetwork, x) -> np.ndarray:
    x = np.asarray(x, dtype=net.dtype)
    if x.shape[-1] != net.input_dim:
        raise ValueError(f"input has {x.shape[-1]} features, network expects {net.input_dim}")
    return x


def forward(net: DenseNetwork, x) -> np.ndarray:
    a = _check_input(net, x)
    for layer in net.layers:
        a = _activate(ops.matmul(a, layer.W) + layer.b, layer.activation, net.clusters)
    return a


def _forward_cached(net: DenseNetwork, x):
    acts = [x]
    a = x
    for layer in net.layers:
        a = _activate(ops.matmul(a, layer.W) + layer.b, layer.activation, net.clusters)
        acts.append(a)
    return acts


def _check_target(output, target, head: str, clusters: int):
    target = np.asarray(target)
    if target.shape != np.shape(output):
        raise ValueError(f"target shape {target.shape} does not match output {np.shape(output)}")
    if head in ("softmax", "cluster_softmax", "sigmoid") and (target.min() < 0 or target.max() > 1):
        raise ValueError(f"{head} targets must lie in [0, 1]")
    return target


def loss(output, target, head: str, clusters: int = 1) -> float:
    """Summed loss: cross-entropy for probability heads, half squared error for linear."""
    output = np.asarray(output, dtype=np.float64)
    target = _check_target(output, target, head, clusters).astype(np.float64)
    if head in ("softmax", "cluster_softmax"):
        return float(-np.sum(target * np.log(np.maximum(output, LOG_FLOOR))))
    if head == "sigmoid":
        return float(-np.sum(target * np.log(np.maximum(output, LOG_FLOOR))
                             + (1 - target) * np.log(np.maximum(1 - output, LOG_FLOOR))))
    if head == "linear":
        return float(0.5 * np.sum((output - target) ** 2))
    raise ValueError(f"unknown head {head!r}")


def _head_delta(out, target, head: str, clusters: int):
    """d loss / d logits for the final layer, valid for any target weights."""
    if head == "softmax":
        return out * target.sum(axis=-1, keepdims=True) - target
    if head == "cluster_softmax":
        shape = out.shape
        p = out.reshape(shape[:-1] + (clusters, -1))
        t = target.reshape(p.shape)
        return (p * t.sum(axis=-1, keepdims=True) - t).reshape(shape)
    # sigmoid + BCE and linear + squared error share the same form
    return out - target


def backward(net: DenseNetwork, x, target, scale: float = 1.0):
    """Gradients of the summed loss, ordered like ``net.params()``.

    Returns ``(grads, summed_loss)``.  ``scale`` multiplies the gradients
    (``1/B`` gives the per-sample mean).
    """
    x = _check_input(net, np.atleast_2d(x))
    target = np.atleast_2d(np.asarray(target))
    acts = _forward_cached(net, x)
    out = acts[-1]
    value = loss(out, target, net.head, net.clusters)
    delta = _head_delta(out, target.astype(out.dtype), net.head, net.clusters)
    if scale != 1.0:
        delta = delta * out.dtype.type(scale)
    grads: list[np.ndarray] = [None] * (2 * len(net.layers))  # type: ignore[list-item]
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        grads[2 * i] = ops.matmul(acts[i].T, delta)
        grads[2 * i + 1] = delta.sum(axis=0)
        if i:
            delta = ops.matmul(delta, layer.W.T)
            if net.layers[i - 1].activation == "relu":
                delta = delta * (acts[i] > 0)
    return grads, value


# -- AdaBound -------------------------------------------------------------------------


@dataclass(frozen=True)
class AdaBoundConfig:
    lr: float = 1e-3
    final_lr: float = 0.1
    betas: tuple[float, float] = (0.9, 0.999)
    gamma: float = 1e-3
    eps: float = 1e-8


@dataclass
class OptimizerState:
    config: AdaBoundConfig
    exp_avg: list[np.ndarray]
    exp_avg_sq: list[np.ndarray]
    step: int = 0

    @classmethod
    def init(cls, params: Iterable[np.ndarray], config: AdaBoundConfig | None = None) -> "OptimizerState":
        params = list(params)
        return cls(config or AdaBoundConfig(), [np.zeros_like(p) for p in params],
                   [np.zeros_like(p) for p in params])

    def bounds(self, t: int | None = None) -> tuple[float, float]:
        """Step-size clipping interval after ``t`` steps."""
        t = self.step if t is None else t
        c = self.config
        width = 1.0 / (c.gamma * t + 1.0)
        return c.final_lr * (1.0 - width), c.final_lr * (1.0 + width)


def adabound_step(state: OptimizerState, params: list[np.ndarray], grads: list[np.ndarray]):
    """One in-place AdaBound update; returns ``params``."""
    if len(params) != len(state.exp_avg) or len(grads) != len(params):
        raise ValueError("parameter list does not match optimizer state")
    c = state.config
    b1, b2 = c.betas
    state.step += 1
    t = state.step
    lower, upper = state.bounds(t)
    base = c.lr * math.sqrt(1 - b2**t) / (1 - b1**t)
    for p, g, m, v in zip(params, grads, state.exp_avg, state.exp_avg_sq):
        if p.shape != g.shape or p.shape != m.shape:
            raise ValueError(f"shape mismatch: param {p.shape}, grad {np.shape(g)}")
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        step = np.clip(base / (np.sqrt(v) + c.eps), lower, upper)
        p -= (step * m).astype(p.dtype, copy=False)
    return params


# -- training loop --------------------------------------------------------------------


@dataclass
class TrainingConfig:
    batch_size: int = 500
    iterations: int = 1000
    train_eb_n0_db: float = 5.0
    optimizer: AdaBoundConfig = field(default_factory=AdaBoundConfig)
    seed: int = 0
    # plateau stopping: with a window, ``iterations`` is a cap and training ends once the
    # mean loss of a window improves on the previous one by less than ``plateau_tol`` (relative)
    plateau_window: int = 0
    plateau_tol: float = 0.0

    def __post_init__(self):
        if self.batch_size < 1 or self.iterations < 1:
            raise ValueError("batch_size and iterations must be >= 1")
        if self.plateau_window < 0 or self.plateau_tol < 0:
            raise ValueError("plateau settings must be non-negative")


BatchSource = Callable[[np.random.Generator, int], tuple]


def _batches(data, rng: np.random.Generator, b: int) -> Iterator[tuple]:
    if callable(data):
        while True:
            yield data(rng, b)
    X, Z = (data.s, data.z) if hasattr(data, "s") else data
    X = np.asarray(X)
    Z = np.asarray(Z)
    if len(X) == 0:
        raise ValueError("dataset is empty")
    while True:
        idx = rng.integers(0, len(X), size=b)
        yield X[idx], Z[idx]


@dataclass
class TrainResult:
    net: DenseNetwork
    loss_trace: np.ndarray
    state: OptimizerState


def train(net: DenseNetwork, data, config: TrainingConfig, *, state: OptimizerState | None = None,
          callback: Callable[[int, float], None] | None = None) -> TrainResult:
    """Mini-batch AdaBound training, in place on ``net``.

    The returned trace is shorter than ``config.iterations`` when the plateau
    rule stopped training early.  ``data`` is a dataset (``.s``/``.z`` or an ``(X, Z)`` pair) sampled with
    replacement, or a callable ``source(rng, b) -> (X, Z)`` that synthesizes
    a fresh batch every iteration.
    """
    rng = np.random.default_rng(config.seed)
    params = net.params()
    state = state or OptimizerState.init(params, config.optimizer)
    trace = np.empty(config.iterations)
    batches = _batches(data, rng, config.batch_size)
    w = config.plateau_window
    for it in range(config.iterations):
        X, Z = next(batches)
        grads, value = backward(net, X, Z, scale=1.0 / len(X))
        adabound_step(state, params, grads)
        trace[it] = value / len(X)
        if callback is not None:
            callback(it, trace[it])
        done = it + 1
        if w and done % w == 0 and done >= 2 * w:
            prev, last = trace[done - 2 * w:done - w].mean(), trace[done - w:done].mean()
            if prev - last < config.plateau_tol * abs(prev):
                return TrainResult(net, trace[:done], state)
    return TrainResult(net, trace, state)


# -- checkpoints ----------------------------------------------------------------------

CHECKPOINT_MAGIC = "mimolab-network"
CHECKPOINT_VERSION = 1


def _fmt(row) -> str:
    return " ".join(f"{float(v):.17g}" for v in row)


def write_network(f, net: DenseNetwork) -> None:
    f.write(f"{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}\n")
    f.write(f"dtype {np.dtype(net.dtype).name} clusters {net.clusters} layers {len(net.layers)}\n")
    for layer in net.layers:
        fan_in, fan_out = layer.W.shape
        f.write(f"layer {fan_in} {fan_out} {layer.activation}\n")
        for row in layer.W:
            f.write(_fmt(row) + "\n")
        f.write(_fmt(layer.b) + "\n")


def read_network(lines: Iterator[str]) -> DenseNetwork:
    header = next(lines).split()
    if header[:1] != [CHECKPOINT_MAGIC] or int(header[1]) != CHECKPOINT_VERSION:
        raise ValueError(f"not a version-{CHECKPOINT_VERSION} network checkpoint")
    meta = next(lines).split()
    dtype = np.dtype(meta[1])
    clusters, n_layers = int(meta[3]), int(meta[5])
    layers = []
    for _ in range(n_layers):
        tag = next(lines).split()
        fan_in, fan_out, act = int(tag[1]), int(tag[2]), tag[3]
        W = np.array([[float(v) for v in next(lines).split()] for _ in range(fan_in)]).reshape(fan_in, fan_out)
        b = np.array([float(v) for v in next(lines).split()]).reshape(fan_out)
        layers.append(Layer(W.astype(dtype), b.astype(dtype), act))
    return DenseNetwork(layers, clusters)


def save_network(path, net: DenseNetwork) -> None:
    with open(path, "w") as f:
        write_network(f, net)


def load_network(path) -> DenseNetwork:
    with open(path) as f:
        return read_network(iter(f))
