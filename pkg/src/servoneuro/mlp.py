"""Feed-forward perceptron: evaluation, exact error Jacobian, serialization.

Flat weight order is canonical: layers from input side to output side, within a
layer one neuron at a time, each neuron contributing its incoming weights
followed by its bias.  A network with layer sizes (n0, n1, ..., nL) therefore
has sum((n_{i}+1) * n_{i+1}) weights.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .scaling import AffineScaling


class ActivationKind(Enum):
    TANH = "tanh"
    LINEAR = "linear"


class ArchitectureError(ValueError):
    """Raised for invalid layer shapes or mismatched weight vectors."""


def weight_count(layer_sizes) -> int:
    return sum((fi + 1) * fo for fi, fo in zip(layer_sizes, layer_sizes[1:]))


def _validate_architecture(layer_sizes, activations):
    if len(layer_sizes) < 2:
        raise ArchitectureError("need at least an input and an output layer")
    if any(int(n) < 1 for n in layer_sizes):
        raise ArchitectureError("all layer widths must be positive")
    if len(activations) != len(layer_sizes) - 1:
        raise ArchitectureError("need one activation per non-input layer")


@dataclass(frozen=True, eq=False)
class MlpNetwork:
    layer_sizes: tuple
    activations: tuple
    weights: np.ndarray

    def __post_init__(self):
        layer_sizes = tuple(int(n) for n in self.layer_sizes)
        activations = tuple(ActivationKind(a) for a in self.activations)
        _validate_architecture(layer_sizes, activations)
        weights = np.asarray(self.weights, dtype=float)
        if weights.shape != (weight_count(layer_sizes),):
            raise ArchitectureError(
                f"weight vector has length {weights.size}, "
                f"expected {weight_count(layer_sizes)}"
            )
        object.__setattr__(self, "layer_sizes", layer_sizes)
        object.__setattr__(self, "activations", activations)
        object.__setattr__(self, "weights", weights)

    @property
    def n_weights(self) -> int:
        return self.weights.size

    @property
    def input_width(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_width(self) -> int:
        return self.layer_sizes[-1]

    def layers(self):
        """Yield (W, b) views into the flat vector, one pair per layer."""
        pos = 0
        for fi, fo in zip(self.layer_sizes, self.layer_sizes[1:]):
            block = self.weights[pos : pos + (fi + 1) * fo].reshape(fo, fi + 1)
            yield block[:, :fi], block[:, fi]
            pos += (fi + 1) * fo

    def with_weights(self, weights: np.ndarray) -> "MlpNetwork":
        return dataclasses.replace(self, weights=np.asarray(weights, dtype=float))

    def __eq__(self, other):
        if not isinstance(other, MlpNetwork):
            return NotImplemented
        return (
            self.layer_sizes == other.layer_sizes
            and self.activations == other.activations
            and np.array_equal(self.weights, other.weights)
        )


def init_weights(layer_sizes, activations, seed: int, scale: float) -> MlpNetwork:
    """Uniform weights on [-scale, scale] from a PRNG seeded with `seed`."""
    layer_sizes = tuple(int(n) for n in layer_sizes)
    activations = tuple(ActivationKind(a) for a in activations)
    _validate_architecture(layer_sizes, activations)
    if scale < 0:
        raise ValueError("scale must be nonnegative")
    rng = np.random.default_rng(seed)
    w = rng.uniform(-scale, scale, weight_count(layer_sizes))
    return MlpNetwork(layer_sizes, activations, w)


def _activate(z, kind):
    return np.tanh(z) if kind is ActivationKind.TANH else z


def forward_batch(net: MlpNetwork, inputs: np.ndarray) -> np.ndarray:
    """Evaluate the network on a (P, n_in) matrix; returns (P, n_out)."""
    a = np.asarray(inputs, dtype=float)
    if a.ndim != 2 or a.shape[1] != net.input_width:
        raise ArchitectureError(
            f"input width {a.shape[-1]} does not match network input "
            f"width {net.input_width}"
        )
    for (W, b), kind in zip(net.layers(), net.activations):
        a = _activate(a @ W.T + b, kind)
    return a


def forward(net: MlpNetwork, x) -> float:
    """Single-pattern evaluation; returns a scalar for a one-output network."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    out = forward_batch(net, x)[0]
    return float(out[0]) if net.output_width == 1 else out


def error_jacobian(net: MlpNetwork, inputs: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Analytic Jacobian of the per-pattern errors e_p = d_p - y_p.

    Row p holds de_p/dw over the flat weight vector.  Single-output
    networks only (one error per pattern).
    """
    if net.output_width != 1:
        raise ArchitectureError("error_jacobian supports single-output networks")
    X = np.asarray(inputs, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if X.ndim != 2 or X.shape[1] != net.input_width:
        raise ArchitectureError("input width does not match network")
    if X.shape[0] == 0:
        raise ValueError("empty dataset")
    if targets.shape[0] != X.shape[0]:
        raise ValueError("inputs and targets disagree on pattern count")

    acts = [X]
    zs = []
    a = X
    layers = list(net.layers())
    for (W, b), kind in zip(layers, net.activations):
        z = a @ W.T + b
        a = _activate(z, kind)
        zs.append(z)
        acts.append(a)

    P = X.shape[0]
    # dy/dz for the output layer
    if net.activations[-1] is ActivationKind.TANH:
        delta = 1.0 - acts[-1] ** 2
    else:
        delta = np.ones((P, 1))

    blocks = []
    for layer in range(len(layers) - 1, -1, -1):
        a_prev = acts[layer]
        grad_w = delta[:, :, None] * a_prev[:, None, :]
        block = np.concatenate([grad_w, delta[:, :, None]], axis=2)
        blocks.append(block.reshape(P, -1))
        if layer > 0:
            W, _ = layers[layer]
            back = delta @ W
            if net.activations[layer - 1] is ActivationKind.TANH:
                back = back * (1.0 - acts[layer] ** 2)
            delta = back
    return -np.concatenate(blocks[::-1], axis=1)


def flatten(net: MlpNetwork) -> np.ndarray:
    return net.weights.copy()


def unflatten(layer_sizes, activations, vector) -> MlpNetwork:
    return MlpNetwork(tuple(layer_sizes), tuple(activations), np.asarray(vector, dtype=float))


# --- serialization ---------------------------------------------------------

_MAGIC = "servoneuro-net 1"


def save_network(path, net: MlpNetwork, input_scaling=None, target_scaling=None):
    """Write a network plus its scaling metadata as round-trip-exact text."""
    if input_scaling is None:
        input_scaling = AffineScaling.identity(net.input_width)
    if target_scaling is None:
        target_scaling = AffineScaling.identity(net.output_width)
    lines = [
        _MAGIC,
        "layers " + " ".join(str(n) for n in net.layer_sizes),
        "activations " + " ".join(a.value for a in net.activations),
        "input_offset " + " ".join(repr(float(v)) for v in input_scaling.offset),
        "input_gain " + " ".join(repr(float(v)) for v in input_scaling.gain),
        "target_offset " + " ".join(repr(float(v)) for v in target_scaling.offset),
        "target_gain " + " ".join(repr(float(v)) for v in target_scaling.gain),
        f"weights {net.n_weights}",
    ]
    lines.extend(repr(float(v)) for v in net.weights)
    Path(path).write_text("\n".join(lines) + "\n")


def load_network(path):
    """Read a serialized network; returns (net, input_scaling, target_scaling)."""
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != _MAGIC:
        raise ValueError(f"{path}: not a servoneuro network file")

    fields = {}
    for line in lines[1:8]:
        key, _, rest = line.partition(" ")
        fields[key] = rest.split()
    required = (
        "layers",
        "activations",
        "input_offset",
        "input_gain",
        "target_offset",
        "target_gain",
        "weights",
    )
    missing = [k for k in required if k not in fields]
    if missing:
        raise ValueError(f"{path}: missing header field(s) {missing}")

    layer_sizes = tuple(int(n) for n in fields["layers"])
    activations = tuple(ActivationKind(a) for a in fields["activations"])
    count = int(fields["weights"][0])
    values = [float(v) for v in lines[8 : 8 + count]]
    if len(values) != count:
        raise ValueError(f"{path}: expected {count} weights, found {len(values)}")
    net = MlpNetwork(layer_sizes, activations, np.array(values))
    input_scaling = AffineScaling(
        np.array([float(v) for v in fields["input_offset"]]),
        np.array([float(v) for v in fields["input_gain"]]),
    )
    target_scaling = AffineScaling(
        np.array([float(v) for v in fields["target_offset"]]),
        np.array([float(v) for v in fields["target_gain"]]),
    )
    return net, input_scaling, target_scaling
