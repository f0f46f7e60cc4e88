"""Dense feed-forward networks with hand-written backprop and an Adam optimiser.

Everything is float64. A network is mutated only by :func:`adam_step`, which bumps
its ``version``; caches from an older version are rejected by :func:`backward`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, NumericError, ParameterError, ShapeError

ACTIVATIONS = ("relu", "tanh", "sigmoid", "linear", "softmax_segment")
SEGMENT_KINDS = ("tanh", "softmax")

_net_ids = itertools.count()


@dataclass(eq=False)
class Layer:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: str
    segments: tuple = ()  # ((kind, width), ...) for softmax_segment

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ParameterError(f"unknown activation {self.activation!r}")
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ShapeError(f"bias {self.bias.shape} does not match weight {self.weight.shape}")
        if self.activation == "softmax_segment":
            self.segments = tuple((str(k), int(w)) for k, w in self.segments)
            if any(k not in SEGMENT_KINDS or w < 1 for k, w in self.segments):
                raise ParameterError(f"bad segment spec {self.segments}")
            if sum(w for _, w in self.segments) != self.weight.shape[0]:
                raise ShapeError("segment widths must add up to the layer width")

    @property
    def n_in(self) -> int:
        return self.weight.shape[1]

    @property
    def n_out(self) -> int:
        return self.weight.shape[0]


@dataclass(eq=False)
class DenseNetwork:
    layers: list
    version: int = 0
    uid: int = field(default_factory=lambda: next(_net_ids))

    def __post_init__(self):
        if not self.layers:
            raise ParameterError("a network needs at least one layer")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.n_out != nxt.n_in:
                raise ShapeError(f"layer widths {prev.n_out} -> {nxt.n_in} are incompatible")

    @property
    def n_in(self) -> int:
        return self.layers[0].n_in

    @property
    def n_out(self) -> int:
        return self.layers[-1].n_out

    @property
    def n_params(self) -> int:
        return sum(l.weight.size + l.bias.size for l in self.layers)

    def parameters(self):
        for layer in self.layers:
            yield layer.weight
            yield layer.bias

    def copy(self) -> "DenseNetwork":
        return DenseNetwork(
            [Layer(l.weight.copy(), l.bias.copy(), l.activation, l.segments) for l in self.layers]
        )

    def to_dict(self) -> dict:
        return {
            "layers": [
                {
                    "in": l.n_in,
                    "out": l.n_out,
                    "activation": l.activation,
                    "segments": [list(s) for s in l.segments],
                    "weight": l.weight.tolist(),
                    "bias": l.bias.tolist(),
                }
                for l in self.layers
            ]
        }

    @classmethod
    def from_dict(cls, d) -> "DenseNetwork":
        return cls(
            [
                Layer(np.asarray(l["weight"], float), np.asarray(l["bias"], float), l["activation"],
                      tuple(tuple(s) for s in l.get("segments", ())))
                for l in d["layers"]
            ]
        )


def build_network(sizes, activations, rng: np.random.Generator, segments=()) -> DenseNetwork:
    """Weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).

    Non-zero biases matter: with zero biases every first-layer ReLU kink passes
    through the origin. ``segments`` applies to a final softmax_segment layer.
    """
    if len(activations) != len(sizes) - 1:
        raise ParameterError("need one activation per layer")
    layers = []
    for i, (n_in, n_out, act) in enumerate(zip(sizes[:-1], sizes[1:], activations)):
        limit = 1.0 / np.sqrt(n_in)
        w = rng.uniform(-limit, limit, size=(n_out, n_in))
        b = rng.uniform(-limit, limit, size=n_out)
        segs = segments if (act == "softmax_segment" and i == len(activations) - 1) else ()
        layers.append(Layer(w, b, act, segs))
    return DenseNetwork(layers)


def _segment_slices(segments):
    start = 0
    for kind, width in segments:
        yield kind, slice(start, start + width)
        start += width


def _activate(layer, z):
    act = layer.activation
    if act == "relu":
        return np.maximum(z, 0.0)
    if act == "tanh":
        return np.tanh(z)
    if act == "sigmoid":
        # split by sign to avoid overflow in exp
        out = np.empty_like(z)
        pos = z >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out
    if act == "linear":
        return z.copy()
    out = np.empty_like(z)
    for kind, sl in _segment_slices(layer.segments):
        if kind == "tanh":
            out[:, sl] = np.tanh(z[:, sl])
        else:
            zs = z[:, sl] - z[:, sl].max(axis=1, keepdims=True)
            e = np.exp(zs)
            out[:, sl] = e / e.sum(axis=1, keepdims=True)
    return out


def _activation_backward(layer, z, a, grad):
    act = layer.activation
    if act == "relu":
        return grad * (z > 0)
    if act == "tanh":
        return grad * (1.0 - a * a)
    if act == "sigmoid":
        return grad * a * (1.0 - a)
    if act == "linear":
        return grad
    out = np.empty_like(grad)
    for kind, sl in _segment_slices(layer.segments):
        g, s = grad[:, sl], a[:, sl]
        if kind == "tanh":
            out[:, sl] = g * (1.0 - s * s)
        else:
            out[:, sl] = s * (g - (g * s).sum(axis=1, keepdims=True))
    return out


@dataclass
class ForwardCache:
    net_uid: int
    net_version: int
    inputs: list
    preacts: list
    outputs: list


@dataclass
class Gradients:
    layers: list  # [(dW, db), ...]
    input: np.ndarray


def forward(net: DenseNetwork, batch: np.ndarray):
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != net.n_in:
        raise ShapeError(f"network expects input width {net.n_in}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NumericError("non-finite value in network input")
    inputs, pre, outs = [], [], []
    h = x
    for layer in net.layers:
        inputs.append(h)
        z = h @ layer.weight.T + layer.bias
        h = _activate(layer, z)
        pre.append(z)
        outs.append(h)
    return h, ForwardCache(net.uid, net.version, inputs, pre, outs)


def backward(net: DenseNetwork, cache: ForwardCache, output_grad: np.ndarray) -> Gradients:
    """Reverse-mode gradients of ``sum(output * output_grad)`` for all parameters and the input."""
    if cache.net_uid != net.uid or cache.net_version != net.version:
        raise ContractError("forward cache does not belong to this network state")
    g = np.asarray(output_grad, dtype=np.float64)
    if g.shape != cache.outputs[-1].shape:
        raise ShapeError(f"output gradient shape {g.shape} != output shape {cache.outputs[-1].shape}")
    grads = [None] * len(net.layers)
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        dz = _activation_backward(layer, cache.preacts[i], cache.outputs[i], g)
        grads[i] = (dz.T @ cache.inputs[i], dz.sum(axis=0))
        g = dz @ layer.weight
    return Gradients(grads, g)


@dataclass(eq=False)
class AdamState:
    m: list
    v: list
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_network(cls, net: DenseNetwork, beta1=0.9, beta2=0.999, eps=1e-8) -> "AdamState":
        zeros = [np.zeros_like(p) for p in net.parameters()]
        return cls(zeros, [z.copy() for z in zeros], 0, beta1, beta2, eps)

    def to_dict(self) -> dict:
        return {
            "step": self.step, "beta1": self.beta1, "beta2": self.beta2, "eps": self.eps,
            "m": [a.tolist() for a in self.m], "v": [a.tolist() for a in self.v],
        }


def adam_step(net: DenseNetwork, grads: Gradients, state: AdamState, lr: float):
    """Bias-corrected Adam update, applied in place. Returns ``(net, state)``."""
    params = list(net.parameters())
    flat = [g for pair in grads.layers for g in pair]
    if len(flat) != len(params) or len(state.m) != len(params):
        raise ShapeError("gradient / optimiser state does not match network parameters")
    for i, (p, g) in enumerate(zip(params, flat)):
        if g.shape != p.shape:
            raise ShapeError(f"layer {i // 2}: gradient shape {g.shape} != parameter shape {p.shape}")
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient in layer {i // 2}")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for p, g, m, v in zip(params, flat, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    net.version += 1
    return net, state
