"""Concrete objectives: MLPs, the two loss kinds, and benchmark functions.

Every model is expressed twice over the same parameter layout: a plain
numpy value path (fast, used by loss evaluation and finite-difference
oracles) and a taped graph (used by every derivative computation). Tests
pin the two paths against each other.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .autodiff import LossKind, Objective
from .data import Batch
from .params import ManifestEntry, ParamVector
from .tape import Node, Tape


class Activation(enum.Enum):
    RELU = "relu"
    TANH = "tanh"


@dataclass(frozen=True)
class MlpSpec:
    """Fully-connected net: input width, hidden widths, output width.

    The output layer is always linear; softmax lives inside the loss.
    When `activation` is None it defaults to tanh for regression (MSE)
    and relu for classification, either is configurable.
    """

    layer_widths: tuple[int, ...]
    loss: LossKind
    activation: Optional[Activation] = None

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        object.__setattr__(self, "layer_widths", widths)
        if len(widths) < 2:
            raise ValueError("an MLP needs at least input and output widths")
        if any(w < 1 for w in widths):
            raise ValueError("all layer widths must be positive")

    @property
    def hidden_activation(self) -> Activation:
        if self.activation is not None:
            return self.activation
        return Activation.TANH if self.loss is LossKind.MSE else Activation.RELU


@dataclass(frozen=True)
class RosenbrockSpec:
    a: float = 1.0
    b: float = 100.0

    def __post_init__(self):
        if self.b <= 0:
            raise ValueError("b must be positive")


def mlp_manifest(spec: MlpSpec) -> tuple[ManifestEntry, ...]:
    entries = []
    offset = 0
    for i, (din, dout) in enumerate(zip(spec.layer_widths[:-1], spec.layer_widths[1:])):
        entries.append(ManifestEntry(f"layer{i}.weight", (din, dout), offset))
        offset += din * dout
        entries.append(ManifestEntry(f"layer{i}.bias", (dout,), offset))
        offset += dout
    return tuple(entries)


def mlp_init(spec: MlpSpec, seed: int) -> ParamVector:
    """Uniform fan-in/fan-out weights in [-s, s], s = sqrt(6/(fan_in+fan_out)); zero biases."""
    rng = np.random.default_rng(seed)
    chunks = []
    for din, dout in zip(spec.layer_widths[:-1], spec.layer_widths[1:]):
        s = np.sqrt(6.0 / (din + dout))
        chunks.append(rng.uniform(-s, s, size=din * dout))
        chunks.append(np.zeros(dout))
    return ParamVector(np.concatenate(chunks), mlp_manifest(spec))


def _mlp_forward_raw(spec: MlpSpec, values: np.ndarray, inputs: np.ndarray) -> np.ndarray:
    act = spec.hidden_activation
    h = inputs
    offset = 0
    n_layers = len(spec.layer_widths) - 1
    for i, (din, dout) in enumerate(zip(spec.layer_widths[:-1], spec.layer_widths[1:])):
        w = values[offset : offset + din * dout].reshape(din, dout)
        offset += din * dout
        b = values[offset : offset + dout]
        offset += dout
        h = h @ w + b
        if i < n_layers - 1:
            h = np.maximum(h, 0.0) if act is Activation.RELU else np.tanh(h)
    return h


def _mlp_trace(spec: MlpSpec, tape: Tape, theta: Node, inputs: np.ndarray) -> Node:
    act = spec.hidden_activation
    h = tape.const(inputs)
    offset = 0
    n_layers = len(spec.layer_widths) - 1
    for i, (din, dout) in enumerate(zip(spec.layer_widths[:-1], spec.layer_widths[1:])):
        w = tape.reshape(tape.slice1d(theta, offset, offset + din * dout), (din, dout))
        offset += din * dout
        b = tape.slice1d(theta, offset, offset + dout)
        offset += dout
        h = tape.add_row(tape.matmul(h, w), b)
        if i < n_layers - 1:
            h = tape.relu(h) if act is Activation.RELU else tape.tanh(h)
    return h


def _loss_node(tape: Tape, kind: LossKind, outputs: Node, targets: np.ndarray) -> Node:
    if kind is LossKind.SOFTMAX_CROSS_ENTROPY:
        return tape.softmax_xent(outputs, targets)
    targets = np.asarray(targets, dtype=np.float64)
    if targets.ndim == 1:
        targets = targets[:, None]
    diff = tape.sub(outputs, tape.const(targets))
    return tape.scale(tape.sum(tape.square(diff)), 1.0 / targets.shape[0])


def mlp_objective(spec: MlpSpec) -> Objective:
    manifest = mlp_manifest(spec)

    def trace(tape: Tape, theta: Node, batch: Batch):
        outputs = _mlp_trace(spec, tape, theta, batch.inputs)
        return outputs, _loss_node(tape, spec.loss, outputs, batch.targets)

    def value(values: np.ndarray, batch: Batch) -> float:
        outputs = _mlp_forward_raw(spec, values, batch.inputs)
        return loss_eval(spec.loss, outputs, batch.targets)

    def predict(values: np.ndarray, inputs: np.ndarray) -> np.ndarray:
        return _mlp_forward_raw(spec, values, inputs)

    widths = "x".join(str(w) for w in spec.layer_widths)
    return Objective(
        name=f"mlp[{widths}]",
        manifest=manifest,
        loss_kind=spec.loss,
        trace=trace,
        value=value,
        predict=predict,
    )


def rosenbrock_objective(spec: RosenbrockSpec = RosenbrockSpec()) -> Objective:
    """f(x, y) = (a - x)^2 + b (y - x^2)^2 on a 2-parameter vector.

    Batch-independent; curvature products use the exact Hessian (there is
    no model/loss split, so Gauss-Newton/Fisher curvature is undefined).
    """
    a, b = spec.a, spec.b
    manifest = (ManifestEntry("xy", (2,), 0),)

    def trace(tape: Tape, theta: Node, batch):
        x = tape.slice1d(theta, 0, 1)
        y = tape.slice1d(theta, 1, 2)
        f = tape.square(a - x) + b * tape.square(y - tape.square(x))
        return None, tape.sum(f)

    def value(values: np.ndarray, batch) -> float:
        x, y = values
        return float((a - x) ** 2 + b * (y - x * x) ** 2)

    return Objective(
        name="rosenbrock",
        manifest=manifest,
        loss_kind=None,
        trace=trace,
        value=value,
        batch_free=True,
    )


def quadratic_objective(a_matrix: np.ndarray, b: Optional[np.ndarray] = None) -> Objective:
    """f(theta) = 1/2 theta^T A theta + b^T theta; verification workhorse.

    With symmetric A the Hessian is exactly A, the quadratic model is
    exact, and line-search / damping behavior has closed forms.
    """
    a_matrix = np.asarray(a_matrix, dtype=np.float64)
    n = a_matrix.shape[0]
    if a_matrix.shape != (n, n):
        raise ValueError("A must be square")
    manifest = (ManifestEntry("theta", (n,), 0),)

    def trace(tape: Tape, theta: Node, batch):
        q = tape.matmul(tape.const(a_matrix), theta)
        f = tape.scale(tape.sum(tape.mul(theta, q)), 0.5)
        if b is not None:
            f = f + tape.sum(tape.mul(theta, tape.const(b)))
        return None, f

    def value(values: np.ndarray, batch) -> float:
        out = 0.5 * values @ a_matrix @ values
        if b is not None:
            out += b @ values
        return float(out)

    return Objective(
        name="quadratic",
        manifest=manifest,
        loss_kind=None,
        trace=trace,
        value=value,
        batch_free=True,
    )


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def loss_eval(kind: LossKind, outputs: np.ndarray, targets) -> float:
    """Mean-reduced loss over the batch, stabilized for cross-entropy."""
    outputs = np.asarray(outputs, dtype=np.float64)
    if kind is LossKind.MSE:
        targets = np.asarray(targets, dtype=np.float64)
        if targets.ndim == 1:
            targets = targets[:, None]
        if outputs.shape != targets.shape:
            raise ValueError(
                f"MSE shape mismatch: outputs {outputs.shape} vs targets {targets.shape}"
            )
        diff = outputs - targets
        return float((diff * diff).sum() / outputs.shape[0])
    labels = np.asarray(targets)
    n, k = outputs.shape
    if labels.shape != (n,) or not np.issubdtype(labels.dtype, np.integer):
        raise ValueError("cross-entropy expects an (N,) integer label vector")
    if labels.min() < 0 or labels.max() >= k:
        raise ValueError(f"class label out of range [0, {k})")
    zmax = outputs.max(axis=1, keepdims=True)
    lse = zmax[:, 0] + np.log(np.exp(outputs - zmax).sum(axis=1))
    return float((lse - outputs[np.arange(n), labels]).mean())


def accuracy(outputs: np.ndarray, labels: np.ndarray) -> float:
    return float((outputs.argmax(axis=1) == labels).mean())
