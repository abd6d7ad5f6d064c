from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Sequence

import numpy as np

from .affine import AffineFunction, DimensionError, FloatArray, affine_compose
from .config import Optimizer, TrainConfig


class TrainingDivergedError(RuntimeError):
    def __init__(self, message: str, *, epoch: int, batch: int, loss: float) -> None:
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch
        self.loss = loss


class Split(str, Enum):
    TRAIN = "train"
    TEST = "test"


def label_to_class(label: int) -> int:
    """Dataset digits 0..9 map to 1-based classifier outputs 1..10."""
    return int(label) + 1


def class_to_label(cls: int) -> int:
    return int(cls) - 1


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    inputs: FloatArray
    labels: np.ndarray
    split: Split = Split.TRAIN

    def __post_init__(self) -> None:
        inputs = np.asarray(self.inputs, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if inputs.ndim != 2:
            raise DimensionError(f"inputs must be a 2-D array, got shape {inputs.shape}")
        if inputs.shape[0] != labels.shape[0]:
            raise DimensionError(f"{inputs.shape[0]} inputs but {labels.shape[0]} labels")
        if labels.size and labels.min() < 0:
            raise ValueError("labels must be non-negative")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "split", Split(self.split))

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @property
    def dim(self) -> int:
        return int(self.inputs.shape[1])

    def head(self, count: int) -> LabeledDataset:
        return LabeledDataset(self.inputs[:count], self.labels[:count], self.split)


@dataclass(frozen=True, eq=False)
class Plnn:
    """Affine layers with ReLU between consecutive layers (none after the last)."""

    layers: tuple[AffineFunction, ...]

    def __post_init__(self) -> None:
        layers = tuple(self.layers)
        if not layers:
            raise DimensionError("a network needs at least one affine layer")
        for i in range(1, len(layers)):
            if layers[i].input_dim != layers[i - 1].output_dim:
                raise DimensionError(
                    f"layer {i + 1} expects input dim {layers[i].input_dim} "
                    f"but layer {i} outputs {layers[i - 1].output_dim}"
                )
        object.__setattr__(self, "layers", layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].input_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].output_dim

    @property
    def widths(self) -> tuple[int, ...]:
        return tuple(layer.output_dim for layer in self.layers[:-1])

    @property
    def neuron_count(self) -> int:
        """Number of ReLU neurons."""
        return sum(self.widths)

    def precompose(self, pre: AffineFunction) -> Plnn:
        """Network for x -> self(pre(x)); ``pre`` is folded into the first layer."""
        return Plnn((affine_compose(self.layers[0], pre),) + self.layers[1:])

    def __call__(self, x: Any) -> FloatArray:
        return plnn_eval(self, x)


def relu(x: FloatArray) -> FloatArray:
    return np.maximum(x, 0.0)


def plnn_eval(net: Plnn, x: Any) -> FloatArray:
    vec = np.asarray(x, dtype=np.float64).reshape(-1)
    if vec.shape[0] != net.input_dim:
        raise DimensionError(f"input of length {vec.shape[0]} does not match network input dim {net.input_dim}")
    out = vec
    for i, layer in enumerate(net.layers):
        out = layer.weight @ out + layer.bias
        if i < len(net.layers) - 1:
            out = relu(out)
    return out


def plnn_eval_many(net: Plnn, points: FloatArray) -> FloatArray:
    out = np.asarray(points, dtype=np.float64)
    if out.ndim != 2 or out.shape[1] != net.input_dim:
        raise DimensionError(f"points of shape {out.shape} do not match network input dim {net.input_dim}")
    for i, layer in enumerate(net.layers):
        out = out @ layer.weight.T + layer.bias
        if i < len(net.layers) - 1:
            out = relu(out)
    return out


def classify(net: Plnn, x: Any) -> int:
    """1-based argmax; np.argmax already returns the first maximal index."""
    return int(np.argmax(plnn_eval(net, x))) + 1


def classify_many(net: Plnn, points: FloatArray) -> np.ndarray:
    return np.argmax(plnn_eval_many(net, points), axis=1) + 1


def init_plnn(
    input_dim: int,
    widths: Sequence[int],
    num_classes: int,
    rng: np.random.Generator,
) -> Plnn:
    """Kaiming-normal weights (std = sqrt(2 / fan_in)), zero biases."""
    dims = [input_dim, *widths, num_classes]
    layers = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        weight = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_out, fan_in))
        layers.append(AffineFunction(weight, np.zeros(fan_out)))
    return Plnn(tuple(layers))


@dataclass
class _Params:
    weights: list[FloatArray]
    biases: list[FloatArray]

    @classmethod
    def from_net(cls, net: Plnn) -> _Params:
        return cls([np.array(l.weight) for l in net.layers], [np.array(l.bias) for l in net.layers])

    def to_net(self) -> Plnn:
        return Plnn(tuple(AffineFunction(w, b) for w, b in zip(self.weights, self.biases)))

    def flat(self) -> list[FloatArray]:
        return self.weights + self.biases


def _forward(params: _Params, x: FloatArray) -> tuple[list[FloatArray], list[FloatArray]]:
    """Returns per-layer inputs and preactivations."""
    inputs: list[FloatArray] = []
    pre: list[FloatArray] = []
    out = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        inputs.append(out)
        z = out @ w.T + b
        pre.append(z)
        out = relu(z) if i < last else z
    return inputs, pre


def _softmax_xent(logits: FloatArray, targets: np.ndarray) -> tuple[float, FloatArray]:
    """Mean cross-entropy and its gradient w.r.t. the logits."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=1, keepdims=True)
    n = logits.shape[0]
    rows = np.arange(n)
    log_probs = shifted[rows, targets] - np.log(exp.sum(axis=1))
    loss = float(-log_probs.mean())
    grad = probs
    grad[rows, targets] -= 1.0
    return loss, grad / n


def _loss_and_grads(params: _Params, x: FloatArray, targets: np.ndarray) -> tuple[float, _Params]:
    inputs, pre = _forward(params, x)
    loss, delta = _softmax_xent(pre[-1], targets)
    gw: list[FloatArray] = [np.empty(0)] * len(params.weights)
    gb: list[FloatArray] = [np.empty(0)] * len(params.weights)
    for i in range(len(params.weights) - 1, -1, -1):
        gw[i] = delta.T @ inputs[i]
        gb[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ params.weights[i]) * (pre[i - 1] > 0.0)
    return loss, _Params(gw, gb)


class _Adam:
    def __init__(self, params: _Params, cfg: TrainConfig) -> None:
        self.cfg = cfg
        self.m = [np.zeros_like(p) for p in params.flat()]
        self.v = [np.zeros_like(p) for p in params.flat()]
        self.t = 0

    def step(self, params: _Params, grads: _Params) -> None:
        c = self.cfg
        self.t += 1
        fix1 = 1.0 - c.beta1**self.t
        fix2 = 1.0 - c.beta2**self.t
        for p, g, m, v in zip(params.flat(), grads.flat(), self.m, self.v):
            m *= c.beta1
            m += (1.0 - c.beta1) * g
            v *= c.beta2
            v += (1.0 - c.beta2) * g * g
            p -= c.learning_rate * (m / fix1) / (np.sqrt(v / fix2) + c.adam_epsilon)


class _Sgd:
    def __init__(self, params: _Params, cfg: TrainConfig) -> None:
        self.cfg = cfg
        self.velocity = [np.zeros_like(p) for p in params.flat()]

    def step(self, params: _Params, grads: _Params) -> None:
        for p, g, vel in zip(params.flat(), grads.flat(), self.velocity):
            vel *= self.cfg.momentum
            vel -= self.cfg.learning_rate * g
            p += vel


@dataclass(frozen=True)
class EpochReport:
    epoch: int
    mean_loss: float
    train_accuracy: float


def train(
    data: LabeledDataset,
    cfg: TrainConfig,
    encoder: AffineFunction | None = None,
    *,
    on_epoch: Callable[[EpochReport], None] | None = None,
) -> Plnn:
    """Minibatch softmax cross-entropy training.

    The returned network acts on ``encoder(x)`` when an encoder is given; the
    encoder itself is frozen. Deploy it as ``net.precompose(encoder)``.
    """
    if len(data) == 0:
        raise ValueError("cannot train on an empty dataset")
    x = data.inputs
    if encoder is not None:
        if encoder.input_dim != data.dim:
            raise DimensionError(f"encoder expects input dim {encoder.input_dim}, data has {data.dim}")
        x = encoder.apply_many(x)
    targets = data.labels
    num_classes = cfg.num_classes or int(targets.max()) + 1
    if targets.max() >= num_classes:
        raise ValueError(f"label {int(targets.max())} does not fit {num_classes} classes")

    rng = np.random.default_rng(cfg.seed)
    params = _Params.from_net(init_plnn(x.shape[1], cfg.layer_widths, num_classes, rng))
    optimizer: _Adam | _Sgd = _Adam(params, cfg) if cfg.optimizer == Optimizer.ADAM else _Sgd(params, cfg)

    n = x.shape[0]
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        losses = []
        for batch, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start:start + cfg.batch_size]
            loss, grads = _loss_and_grads(params, x[idx], targets[idx])
            if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.flat()):
                raise TrainingDivergedError(
                    f"non-finite loss {loss} at epoch {epoch}, batch {batch} "
                    f"(lr={cfg.learning_rate}, optimizer={cfg.optimizer.value})",
                    epoch=epoch,
                    batch=batch,
                    loss=loss,
                )
            losses.append(loss)
            optimizer.step(params, grads)
        if on_epoch is not None:
            net = params.to_net()
            acc = float(np.mean(classify_many(net, x) == targets + 1))
            on_epoch(EpochReport(epoch, float(np.mean(losses)), acc))
    return params.to_net()


@dataclass
class GradientReport:
    max_relative_error: float
    checked: int = 0
    skipped: bool = False
    reason: str = ""
    worst_parameter: str = ""
    errors: list[float] = field(default_factory=list, repr=False)


def gradient_check(
    net: Plnn,
    x: Any,
    label: int,
    *,
    h: float = 1e-5,
    kink_margin: float = 1e-4,
) -> GradientReport:
    """Backprop gradient of the cross-entropy loss vs. central differences.

    ``label`` is the 0-based target index. Points with a preactivation
    closer than ``kink_margin`` to zero are skipped.
    """
    vec = np.asarray(x, dtype=np.float64).reshape(1, -1)
    if vec.shape[1] != net.input_dim:
        raise DimensionError(f"input of length {vec.shape[1]} does not match network input dim {net.input_dim}")
    target = np.array([int(label)])
    params = _Params.from_net(net)
    _, pre = _forward(params, vec)
    for i, z in enumerate(pre[:-1]):
        closest = float(np.min(np.abs(z)))
        if closest < kink_margin:
            return GradientReport(
                max_relative_error=float("nan"),
                skipped=True,
                reason=f"layer {i + 1} preactivation {closest:.2e} within {kink_margin:.0e} of a ReLU kink",
            )

    _, grads = _loss_and_grads(params, vec, target)
    names = [f"W{i + 1}" for i in range(len(params.weights))] + [f"b{i + 1}" for i in range(len(params.biases))]
    worst = 0.0
    worst_name = ""
    errors: list[float] = []
    for name, p, g in zip(names, params.flat(), grads.flat()):
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            saved = p[idx]
            p[idx] = saved + h
            up, _ = _softmax_xent(_forward(params, vec)[1][-1], target)
            p[idx] = saved - h
            down, _ = _softmax_xent(_forward(params, vec)[1][-1], target)
            p[idx] = saved
            numeric = (up - down) / (2.0 * h)
            analytic = float(g[idx])
            err = abs(analytic - numeric) / max(abs(analytic) + abs(numeric), 1e-6)
            errors.append(err)
            if err > worst:
                worst = err
                worst_name = f"{name}{list(idx)}"
    return GradientReport(max_relative_error=worst, checked=len(errors), worst_parameter=worst_name, errors=errors)
