"""Dense multi-head network trained on the summed per-head cross-entropy.

Three output modes share the same ReLU trunk:

``label-diversity``
    one softmax head per ensemble member, widths ``L_m``;
``rvc``
    a single softmax head over the base classes;
``direct``
    one linear unit per target dimension trained with squared error on the
    support-normalized target.

All heads live in one output layer; head ``m`` owns the output columns
``offsets[m]:offsets[m + 1]``, which is the same as ``M`` parallel dense
layers.  The mini-batch loss is a sum over samples, not a mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .binning import DiscretizationEnsemble
from .encoding import EncodedBatch, encode_batch
from .errors import ConfigError, NumericalError
from .inference import ensemble_average, expected_values

MODES = ("label-diversity", "rvc", "direct")


@dataclass
class DenseLayer:
    weights: np.ndarray  # (out, in)
    biases: np.ndarray
    activation: str = "relu"

    def __post_init__(self):
        if self.activation not in ("relu", "linear"):
            raise ConfigError(f"unknown activation {self.activation!r}")
        if self.weights.shape[0] != self.biases.shape[0]:
            raise ConfigError("weights and biases disagree on output width")

    @property
    def shape(self) -> tuple[int, int]:
        return self.weights.shape


@dataclass
class MultiHeadNetwork:
    trunk: list[DenseLayer]
    head: DenseLayer
    mode: str
    ensemble: DiscretizationEnsemble
    bin_values: list[np.ndarray] | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        width = self.head.weights.shape[0]
        if self.mode == "direct":
            if self.head.activation != "linear":
                raise ConfigError("direct mode needs a linear output layer")
        else:
            if self.mode == "rvc" and self.ensemble.M != 1:
                raise ConfigError("rvc mode takes a single-member ensemble")
            if width != sum(self.ensemble.head_sizes):
                raise ConfigError(
                    f"head width {width} does not match ensemble sizes {self.ensemble.head_sizes}"
                )
        prev = None
        for i, layer in enumerate(self.layers):
            if prev is not None and layer.weights.shape[1] != prev:
                raise ConfigError(f"layer {i} expects {layer.weights.shape[1]} inputs, gets {prev}")
            prev = layer.weights.shape[0]

    @classmethod
    def build(
        cls,
        n_inputs: int,
        trunk_widths: Sequence[int],
        ensemble: DiscretizationEnsemble,
        mode: str = "label-diversity",
        seed: int = 0,
        n_outputs: int = 1,
    ) -> "MultiHeadNetwork":
        """He-uniform ReLU trunk and a LeCun-uniform output layer, biases zero."""
        rng = np.random.default_rng(seed)
        trunk = []
        fan_in = n_inputs
        for w in trunk_widths:
            lim = math.sqrt(6.0 / fan_in)
            trunk.append(DenseLayer(rng.uniform(-lim, lim, (w, fan_in)), np.zeros(w), "relu"))
            fan_in = w
        out = n_outputs if mode == "direct" else sum(ensemble.head_sizes)
        lim = math.sqrt(3.0 / fan_in)
        head = DenseLayer(rng.uniform(-lim, lim, (out, fan_in)), np.zeros(out), "linear")
        return cls(trunk, head, mode, ensemble)

    @property
    def layers(self) -> list[DenseLayer]:
        return [*self.trunk, self.head]

    @property
    def n_inputs(self) -> int:
        return self.layers[0].weights.shape[1]

    @property
    def offsets(self) -> np.ndarray:
        if self.mode == "direct":
            return np.array([0, self.head.weights.shape[0]], dtype=np.int64)
        return self.ensemble.offsets

    @property
    def target_center(self) -> float:
        return self.ensemble.support.midpoint

    @property
    def target_scale(self) -> float:
        return 0.5 * self.ensemble.support.width

    def parameters(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out += [layer.weights, layer.biases]
        return out

    def copy(self) -> "MultiHeadNetwork":
        def cp(layer):
            return DenseLayer(layer.weights.copy(), layer.biases.copy(), layer.activation)

        values = None if self.bin_values is None else [v.copy() for v in self.bin_values]
        return MultiHeadNetwork([cp(l) for l in self.trunk], cp(self.head), self.mode,
                                self.ensemble, values)

    def representatives(self) -> list[np.ndarray]:
        """Per-head bin values used for expected-value inference."""
        if self.bin_values is not None:
            return self.bin_values
        return self.ensemble.bin_means()


@dataclass
class ForwardState:
    """Pre-activations ``pre[i]`` and activations ``acts[i]`` (``acts[0]`` is the input)."""

    pre: list[np.ndarray]
    acts: list[np.ndarray]
    mode: str
    offsets: np.ndarray
    probs: np.ndarray | None = None

    @property
    def outputs(self) -> np.ndarray:
        return self.pre[-1]

    def head_probs(self, m: int) -> np.ndarray:
        return self.probs[:, self.offsets[m]:self.offsets[m + 1]]


def _trunk_forward(net: MultiHeadNetwork, X: np.ndarray):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != net.n_inputs:
        raise ConfigError(f"expected features of shape (N, {net.n_inputs}), got {X.shape}")
    pre, acts = [], [X]
    a = X
    for layer in net.layers:
        z = a @ layer.weights.T + layer.biases
        a = np.maximum(z, 0.0) if layer.activation == "relu" else z
        pre.append(z)
        acts.append(a)
    return pre, acts


def forward(net: MultiHeadNetwork, features: np.ndarray) -> ForwardState:
    pre, acts = _trunk_forward(net, features)
    fs = ForwardState(pre, acts, net.mode, net.offsets)
    if net.mode != "direct":
        fs.probs = kernels.softmax_heads(pre[-1], fs.offsets)
    return fs


def _normalized_targets(net, targets, n):
    t = np.asarray(targets, dtype=np.float64).reshape(n, -1)
    return (t - net.target_center) / net.target_scale


def _output_loss(net, fs: ForwardState, batch: EncodedBatch):
    """Data loss and its gradient with respect to the output layer's pre-activations."""
    n = fs.acts[0].shape[0]
    if len(batch) != n:
        raise ConfigError(f"batch has {len(batch)} samples, forward state has {n}")
    if net.mode == "direct":
        r = fs.outputs - _normalized_targets(net, batch.targets, n)
        return float(np.sum(r * r)), 2.0 * r
    if batch.labels.shape[1] != len(fs.offsets) - 1:
        raise ConfigError("batch labels and network heads disagree")
    loss, probs, grad = kernels.softmax_xent_heads(fs.outputs, fs.offsets, batch.labels)
    fs.probs = probs
    return loss, grad


def loss(net: MultiHeadNetwork, fs: ForwardState, batch: EncodedBatch) -> float:
    """Summed cross-entropy (or squared error in direct mode), without the L2 term."""
    return _output_loss(net, fs, batch)[0]


def l2_penalty(net: MultiHeadNetwork, l2: float) -> float:
    if l2 == 0.0:
        return 0.0
    return 0.5 * l2 * sum(float(np.sum(layer.weights ** 2)) for layer in net.layers)


def _backprop(net, fs, delta, l2):
    grads = []
    layers = net.layers
    for i in range(len(layers) - 1, -1, -1):
        layer = layers[i]
        dW = delta.T @ fs.acts[i]
        if l2:
            dW = dW + l2 * layer.weights
        grads.append((dW, delta.sum(axis=0)))
        if i:
            delta = (delta @ layer.weights) * (fs.pre[i - 1] > 0.0)
    grads.reverse()
    return grads


def backward(net: MultiHeadNetwork, fs: ForwardState, batch: EncodedBatch, l2: float = 0.0):
    """Exact gradient of ``loss + l2_penalty`` as ``[(dW, db), ...]`` per layer."""
    _, delta = _output_loss(net, fs, batch)
    return _backprop(net, fs, delta, l2)


def loss_and_grads(net: MultiHeadNetwork, batch: EncodedBatch, l2: float = 0.0):
    fs = ForwardState(*_trunk_forward(net, batch.features), net.mode, net.offsets)
    data, delta = _output_loss(net, fs, batch)
    return data, l2_penalty(net, l2), _backprop(net, fs, delta, l2)


class Adam:
    """Adaptive-moment optimizer with bias correction.

    Moments are kept per layer, mirroring ``(weights, biases)`` shapes.
    """

    def __init__(self, net: MultiHeadNetwork, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in net.parameters()]
        self.v = [np.zeros_like(p) for p in net.parameters()]

    def step(self, net: MultiHeadNetwork, grads) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        flat = [g for pair in grads for g in pair]
        for p, g, m, v in zip(net.parameters(), flat, self.m, self.v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class TrainConfig:
    epochs: int = 15
    batch_size: int = 32
    lr: float = 1e-3
    lr_decay: float = 0.1
    lr_decay_every: int = 10
    l2: float = 0.0
    seed: int = 0
    empirical_means: bool = False

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("batch size must be >= 1")
        if not (self.lr > 0 and math.isfinite(self.lr)):
            raise ConfigError("learning rate must be positive")
        if self.lr_decay_every < 1:
            raise ConfigError("lr decay interval must be >= 1")
        if self.l2 < 0:
            raise ConfigError("l2 must be >= 0")

    def lr_at(self, epoch: int) -> float:
        return self.lr * self.lr_decay ** (epoch // self.lr_decay_every)


@dataclass
class EpochRecord:
    epoch: int
    lr: float
    train_loss: float  # summed data loss over the epoch, divided by N
    val_mae: float


@dataclass
class TrainLog:
    records: list[EpochRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    @property
    def losses(self) -> list[float]:
        return [r.train_loss for r in self.records]


def predict(net: MultiHeadNetwork, features: np.ndarray) -> np.ndarray:
    """Point estimate per sample: the ensemble-averaged expected value, or the linear output."""
    fs = forward(net, features)
    if net.mode == "direct":
        return net.target_center + net.target_scale * fs.outputs[:, 0]
    return ensemble_average(expected_values(fs, net.representatives()))


def train(net: MultiHeadNetwork, features, targets, config: TrainConfig,
          val: tuple[np.ndarray, np.ndarray] | None = None) -> tuple[MultiHeadNetwork, TrainLog]:
    """Seeded mini-batch Adam training; mutates and returns ``net``.

    Raises :class:`NumericalError` naming epoch, batch and value on a
    non-finite loss.
    """
    log = TrainLog()
    full = encode_batch(features, targets, net.ensemble)
    if config.empirical_means and net.mode != "direct":
        net.bin_values = net.ensemble.bin_means(full.targets)
    n = len(full)
    if config.epochs == 0 or n == 0:
        return net, log
    opt = Adam(net, lr=config.lr)
    rng = np.random.default_rng(config.seed)
    for epoch in range(config.epochs):
        opt.lr = config.lr_at(epoch)
        order = rng.permutation(n)
        total = 0.0
        for b, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start:start + config.batch_size]
            batch = EncodedBatch(full.features[idx], full.labels[idx], full.targets[idx], net.ensemble)
            data, _, grads = loss_and_grads(net, batch, config.l2)
            if not math.isfinite(data):
                raise NumericalError(f"non-finite loss {data!r} at epoch {epoch}, batch {b}")
            opt.step(net, grads)
            total += data
        val_mae = float("nan")
        if val is not None and len(val[1]):
            val_mae = float(np.mean(np.abs(predict(net, val[0]) - np.asarray(val[1]))))
        log.records.append(EpochRecord(epoch, opt.lr, total / n, val_mae))
    for p in net.parameters():
        if not np.all(np.isfinite(p)):
            raise NumericalError("non-finite parameters after training")
    return net, log
