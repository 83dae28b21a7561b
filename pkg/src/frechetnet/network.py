"""ReLU multilayer perceptron producing the final hidden-layer representation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, ParameterError


@dataclass(frozen=True)
class Architecture:
    input_dim: int
    hidden_widths: tuple
    dropout: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))
        if self.input_dim < 1:
            raise ParameterError("input_dim must be at least 1")
        if not self.hidden_widths or min(self.hidden_widths) < 1:
            raise ParameterError("need at least one hidden layer, all widths >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ParameterError("dropout must lie in [0, 1)")

    @classmethod
    def uniform(cls, input_dim, width, depth, last_width, dropout=0.0):
        """First ``depth - 1`` layers share ``width``; the last has ``last_width``."""
        return cls(input_dim, (width,) * (depth - 1) + (last_width,), dropout)

    @property
    def depth(self):
        return len(self.hidden_widths)

    @property
    def output_dim(self):
        return self.hidden_widths[-1]

    @property
    def fan_ins(self):
        return (self.input_dim,) + self.hidden_widths[:-1]

    def param_shapes(self):
        return [((w, f), (w,)) for w, f in zip(self.hidden_widths, self.fan_ins)]


@dataclass
class NetworkParams:
    """Per-layer weights ``W_l`` of shape ``(p_l, p_{l-1})`` and shifts ``b_l``."""

    weights: list
    biases: list

    def copy(self):
        return type(self)([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def arrays(self):
        """Flat list ``[W_1, b_1, ..., W_L, b_L]``."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def flatten(self):
        return np.concatenate([a.ravel() for a in self.arrays()])

    def unflatten(self, flat):
        flat = np.asarray(flat, dtype=float)
        if flat.size != sum(a.size for a in self.arrays()):
            raise DimensionError("flat parameter vector has the wrong length")
        pos = 0
        new = []
        for a in self.arrays():
            new.append(flat[pos:pos + a.size].reshape(a.shape).copy())
            pos += a.size
        return type(self)(new[0::2], new[1::2])

    def zeros_like(self):
        return type(self)([np.zeros_like(w) for w in self.weights], [np.zeros_like(b) for b in self.biases])

    def is_finite(self):
        return all(np.all(np.isfinite(a)) for a in self.arrays())

    def check(self, arch: Architecture):
        for (ws, bs), w, b in zip(arch.param_shapes(), self.weights, self.biases, strict=True):
            if w.shape != ws or b.shape != bs:
                raise DimensionError("parameter shapes do not match the architecture")


def init_params(arch: Architecture, rng) -> NetworkParams:
    """Fan-in scaled uniform init: entries of ``W_l, b_l`` on ``±1/sqrt(p_{l-1})``."""
    weights, biases = [], []
    for (wshape, bshape), fan_in in zip(arch.param_shapes(), arch.fan_ins):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, wshape))
        biases.append(rng.uniform(-bound, bound, bshape))
    return NetworkParams(weights, biases)


@dataclass
class ForwardCache:
    inputs: np.ndarray
    pre: list = field(default_factory=list)
    post: list = field(default_factory=list)
    masks: list = field(default_factory=list)


def forward(params: NetworkParams, arch: Architecture, x, train=False, rng=None):
    """Map a batch ``x`` of shape ``(n, p)`` to ``g_L`` of shape ``(n, p_L)``.

    In training mode inverted dropout is applied to the outputs of layers
    ``1..L-1``; the final representation never receives dropout.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != arch.input_dim:
        raise DimensionError(f"expected inputs with {arch.input_dim} columns, got shape {x.shape}")
    rate = arch.dropout if train else 0.0
    if rate > 0 and rng is None:
        raise ParameterError("training-mode dropout needs an rng")
    cache = ForwardCache(inputs=x)
    h = x
    last = arch.depth - 1
    for l, (W, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ W.T + b
        h = np.maximum(z, 0.0)
        mask = None
        if rate > 0 and l < last:
            mask = (rng.random(h.shape) >= rate) / (1.0 - rate)
            h = h * mask
        cache.pre.append(z)
        cache.post.append(h)
        cache.masks.append(mask)
    return h, cache


def backward(params: NetworkParams, cache: ForwardCache, grad_out):
    """Reverse-mode pass from ``dL/dg_L`` to parameter gradients."""
    grads_w = [None] * len(params.weights)
    grads_b = [None] * len(params.weights)
    g = grad_out
    for l in range(len(params.weights) - 1, -1, -1):
        if cache.masks[l] is not None:
            g = g * cache.masks[l]
        g = g * (cache.pre[l] > 0)
        h_in = cache.inputs if l == 0 else cache.post[l - 1]
        grads_w[l] = g.T @ h_in
        grads_b[l] = g.sum(axis=0)
        if l > 0:
            g = g @ params.weights[l]
    return grads_w, grads_b
