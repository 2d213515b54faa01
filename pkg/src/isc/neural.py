"""Small fully connected networks with hand-written backpropagation.

Weights are stored ``(fan_in, fan_out)`` so a batch ``X`` of shape
``(batch, fan_in)`` maps to ``X @ W + b``. Everything is float64.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

ACTIVATIONS = ("relu", "sigmoid", "softmax", "identity")


class ShapeError(ValueError):
    pass


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softmax(z):
    z = np.asarray(z, dtype=float)
    shifted = z - z.max(axis=-1, keepdims=True)
    ez = np.exp(shifted)
    return ez / ez.sum(axis=-1, keepdims=True)


def _activate(kind: str, z: np.ndarray) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "sigmoid":
        return sigmoid(z)
    if kind == "softmax":
        return softmax(z)
    return z


def _activation_backward(kind: str, z: np.ndarray, a: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Pull gradient ``g`` w.r.t. activation output back to pre-activation ``z``."""
    if kind == "relu":
        return g * (z > 0)
    if kind == "sigmoid":
        return g * a * (1.0 - a)
    if kind == "softmax":
        return a * (g - np.sum(g * a, axis=-1, keepdims=True))
    return g


@dataclass
class Dense:
    weight: np.ndarray
    bias: np.ndarray
    activation: str = "identity"

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.activation not in ACTIVATIONS:
            raise ShapeError(f"unknown activation {self.activation!r}")
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[1],):
            raise ShapeError(f"bias {self.bias.shape} does not match weight {self.weight.shape}")

    @property
    def fan_in(self) -> int:
        return self.weight.shape[0]

    @property
    def fan_out(self) -> int:
        return self.weight.shape[1]


@dataclass
class Cache:
    inputs: list[np.ndarray]
    preacts: list[np.ndarray]
    outputs: list[np.ndarray]
    squeeze: bool


class DenseNet:
    def __init__(self, layers: Sequence[Dense]):
        self.layers = list(layers)
        if not self.layers:
            raise ShapeError("a network needs at least one layer")
        for i, (a, b) in enumerate(zip(self.layers, self.layers[1:])):
            if a.fan_out != b.fan_in:
                raise ShapeError(f"layer {i} outputs {a.fan_out} but layer {i + 1} expects {b.fan_in}")
        for layer in self.layers[:-1]:
            if layer.activation == "softmax":
                raise ShapeError("softmax is only allowed as the final activation")

    @classmethod
    def build(cls, sizes: Sequence[int], activations: Sequence[str],
              rng: np.random.Generator | None = None, scale: float = 1.0) -> "DenseNet":
        """He-style random init (zeros when ``rng`` is None)."""
        if len(activations) != len(sizes) - 1:
            raise ShapeError("need one activation per weight layer")
        layers = []
        for fan_in, fan_out, act in zip(sizes, sizes[1:], activations):
            if rng is None:
                w = np.zeros((fan_in, fan_out))
            else:
                w = rng.normal(0.0, scale * np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
            layers.append(Dense(w, np.zeros(fan_out), act))
        return cls(layers)

    @property
    def input_width(self) -> int:
        return self.layers[0].fan_in

    @property
    def output_width(self) -> int:
        return self.layers[-1].fan_out

    def copy(self) -> "DenseNet":
        return DenseNet([Dense(l.weight.copy(), l.bias.copy(), l.activation) for l in self.layers])

    # -- evaluation ------------------------------------------------------
    def forward_cached(self, x) -> tuple[np.ndarray, Cache]:
        x = np.asarray(x, dtype=np.float64)
        squeeze = x.ndim == 1
        if squeeze:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.input_width:
            raise ShapeError(f"input shape {x.shape} does not match width {self.input_width}")
        inputs, preacts, outputs = [], [], []
        a = x
        for layer in self.layers:
            inputs.append(a)
            z = a @ layer.weight + layer.bias
            a = _activate(layer.activation, z)
            preacts.append(z)
            outputs.append(a)
        return (a[0] if squeeze else a), Cache(inputs, preacts, outputs, squeeze)

    def forward(self, x) -> np.ndarray:
        return self.forward_cached(x)[0]

    def logits(self, x) -> np.ndarray:
        """Pre-activation of the final layer."""
        _, cache = self.forward_cached(x)
        z = cache.preacts[-1]
        return z[0] if cache.squeeze else z

    def backward_cached(self, cache: Cache, upstream, *, wrt_logits: bool = False):
        """Gradients of ``sum(upstream * output)`` given a forward cache.

        With ``wrt_logits`` the upstream is taken w.r.t. the final
        pre-activation instead of the final output. Returns
        ``([(dW, db), ...], dx)``; parameter gradients are summed over the batch.
        """
        g = np.asarray(upstream, dtype=np.float64)
        if cache.squeeze and g.ndim == 1:
            g = g[None, :]
        if g.shape != cache.outputs[-1].shape:
            raise ShapeError(f"upstream shape {g.shape} does not match output {cache.outputs[-1].shape}")
        grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(self.layers)  # type: ignore[list-item]
        for i in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[i]
            if not (wrt_logits and i == len(self.layers) - 1):
                g = _activation_backward(layer.activation, cache.preacts[i], cache.outputs[i], g)
            grads[i] = (cache.inputs[i].T @ g, g.sum(axis=0))
            g = g @ layer.weight.T
        return grads, (g[0] if cache.squeeze else g)

    def backward(self, x, upstream, *, wrt_logits: bool = False):
        _, cache = self.forward_cached(x)
        return self.backward_cached(cache, upstream, wrt_logits=wrt_logits)

    # -- parameters ------------------------------------------------------
    def get_flat(self) -> np.ndarray:
        return np.concatenate([np.concatenate([l.weight.ravel(), l.bias]) for l in self.layers])

    def set_flat(self, flat: np.ndarray) -> "DenseNet":
        """New network with parameters taken from ``flat``."""
        flat = np.asarray(flat, dtype=np.float64)
        layers, pos = [], 0
        for l in self.layers:
            nw, nb = l.weight.size, l.bias.size
            w = flat[pos:pos + nw].reshape(l.weight.shape)
            b = flat[pos + nw:pos + nw + nb]
            pos += nw + nb
            layers.append(Dense(w.copy(), b.copy(), l.activation))
        if pos != flat.size:
            raise ShapeError(f"expected {pos} parameters, got {flat.size}")
        return DenseNet(layers)

    @staticmethod
    def flatten_grads(grads) -> np.ndarray:
        return np.concatenate([np.concatenate([dw.ravel(), db]) for dw, db in grads])

    def sgd_step(self, grads, lr: float) -> "DenseNet":
        """Descent step ``theta - lr * grad`` (returns a new network)."""
        return DenseNet([Dense(l.weight - lr * dw, l.bias - lr * db, l.activation)
                         for l, (dw, db) in zip(self.layers, grads)])

    def n_params(self) -> int:
        return sum(l.weight.size + l.bias.size for l in self.layers)

    def allclose(self, other: "DenseNet", atol: float = 0.0) -> bool:
        return (len(self.layers) == len(other.layers)
                and all(a.activation == b.activation and a.weight.shape == b.weight.shape
                        for a, b in zip(self.layers, other.layers))
                and np.allclose(self.get_flat(), other.get_flat(), rtol=0.0, atol=atol))


def forward(net: DenseNet, x) -> np.ndarray:
    return net.forward(x)


def backward(net: DenseNet, x, upstream):
    return net.backward(x, upstream)


# -- checkpoints -----------------------------------------------------------
# One row per parameter tensor: layer,param,activation,rows,cols,values...

def save_checkpoint(net: DenseNet, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["layer", "param", "activation", "rows", "cols", "values"])
        for i, layer in enumerate(net.layers):
            r, c = layer.weight.shape
            w.writerow([i, "W", layer.activation, r, c] + [repr(float(v)) for v in layer.weight.ravel()])
            w.writerow([i, "b", layer.activation, 1, c] + [repr(float(v)) for v in layer.bias])


def load_checkpoint(path: str | Path) -> DenseNet:
    weights: dict[int, np.ndarray] = {}
    biases: dict[int, np.ndarray] = {}
    acts: dict[int, str] = {}
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            i, kind, act, r, c = int(row[0]), row[1], row[2], int(row[3]), int(row[4])
            vals = np.array([float(v) for v in row[5:]], dtype=np.float64)
            acts[i] = act
            if kind == "W":
                weights[i] = vals.reshape(r, c)
            else:
                biases[i] = vals
    return DenseNet([Dense(weights[i], biases[i], acts[i]) for i in sorted(weights)])
