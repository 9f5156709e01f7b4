"""APPNP and GCN forward passes over the tape.

Both models share the convention that dropout precedes every linear
layer and fires only in training mode.
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import InputError
from .graph import Graph
from .optim import glorot_init


def _check_dropout(rate):
    if not 0.0 <= rate < 1.0:
        raise InputError(f"dropout_rate must be in [0, 1), got {rate}")


def _need_rng(train_flag, rate, rng):
    if train_flag and rate > 0.0 and rng is None:
        raise InputError("training-mode forward with dropout needs an rng")


@dataclass
class AppnpParams:
    """Two-layer MLP plus the propagation schedule."""

    w0: Tensor
    b0: Tensor
    w1: Tensor
    b1: Tensor
    propagation_steps: int = 10
    alpha: float = 0.1
    dropout_rate: float = 0.5

    def __post_init__(self):
        if self.propagation_steps < 0:
            raise InputError(f"propagation_steps must be >= 0, got {self.propagation_steps}")
        if not 0.0 < self.alpha <= 1.0:
            raise InputError(f"alpha must be in (0, 1], got {self.alpha}")
        _check_dropout(self.dropout_rate)
        hidden = self.w0.shape[1]
        if self.b0.shape != (hidden,) or self.w1.shape[0] != hidden:
            raise InputError("MLP layer shapes do not chain")
        if self.b1.shape != (self.w1.shape[1],):
            raise InputError("output bias does not match the class count")

    @classmethod
    def init(cls, num_features, num_classes, hidden=64, seed=0, **kwargs) -> "AppnpParams":
        s0, s1 = np.random.SeedSequence(seed).generate_state(2)
        return cls(
            w0=glorot_init(num_features, hidden, int(s0)),
            b0=Tensor(np.zeros(hidden), requires_grad=True),
            w1=glorot_init(hidden, num_classes, int(s1)),
            b1=Tensor(np.zeros(num_classes), requires_grad=True),
            **kwargs,
        )

    def params(self):
        return [self.w0, self.b0, self.w1, self.b1]

    def named_params(self):
        return [("w0", self.w0), ("b0", self.b0), ("w1", self.w1), ("b1", self.b1)]

    def load_named(self, loaded):
        by_name = dict(loaded)
        for name, tensor in self.named_params():
            if name not in by_name:
                raise InputError(f"checkpoint is missing parameter {name!r}")
            if by_name[name].shape != tensor.data.shape:
                raise InputError(f"checkpoint shape mismatch for {name!r}")
            tensor.data = np.array(by_name[name], dtype=np.float64)


@dataclass
class GcnParams:
    """Two graph-convolution weight matrices, no biases."""

    w0: Tensor
    w1: Tensor
    dropout_rate: float = 0.5

    def __post_init__(self):
        _check_dropout(self.dropout_rate)
        if self.w0.shape[1] != self.w1.shape[0]:
            raise InputError("layer shapes do not chain")

    @classmethod
    def init(cls, num_features, num_classes, hidden=64, seed=0, **kwargs) -> "GcnParams":
        s0, s1 = np.random.SeedSequence(seed).generate_state(2)
        return cls(
            w0=glorot_init(num_features, hidden, int(s0)),
            w1=glorot_init(hidden, num_classes, int(s1)),
            **kwargs,
        )

    def params(self):
        return [self.w0, self.w1]

    def named_params(self):
        return [("w0", self.w0), ("w1", self.w1)]

    def load_named(self, loaded):
        by_name = dict(loaded)
        for name, tensor in self.named_params():
            if name not in by_name:
                raise InputError(f"checkpoint is missing parameter {name!r}")
            if by_name[name].shape != tensor.data.shape:
                raise InputError(f"checkpoint shape mismatch for {name!r}")
            tensor.data = np.array(by_name[name], dtype=np.float64)


def _mlp(g: Graph, p: AppnpParams, train_flag: bool, rng) -> Tensor:
    x = ad.dropout(Tensor(g.features), p.dropout_rate, rng, train_flag)
    h = ad.relu(ad.add(ad.matmul(x, p.w0), p.b0))
    h = ad.dropout(h, p.dropout_rate, rng, train_flag)
    return ad.add(ad.matmul(h, p.w1), p.b1)


def appnp_forward(g: Graph, p: AppnpParams, train_flag: bool, rng=None) -> Tensor:
    """Personalized-propagation logits: H = MLP(X), then K steps of
    Z <- (1-alpha) A_norm Z + alpha H starting from Z = H."""
    _need_rng(train_flag, p.dropout_rate, rng)
    h = _mlp(g, p, train_flag, rng)
    z = h
    for _ in range(p.propagation_steps):
        z = ad.add(
            ad.mul(ad.sparse_matmul(g.norm_adjacency, z), 1.0 - p.alpha),
            ad.mul(h, p.alpha),
        )
    return z


def gcn_forward(g: Graph, p: GcnParams, train_flag: bool, rng=None) -> Tensor:
    """Two-layer graph convolution: A_norm ReLU(A_norm X W0) W1."""
    _need_rng(train_flag, p.dropout_rate, rng)
    x = ad.dropout(Tensor(g.features), p.dropout_rate, rng, train_flag)
    h = ad.relu(ad.sparse_matmul(g.norm_adjacency, ad.matmul(x, p.w0)))
    h = ad.dropout(h, p.dropout_rate, rng, train_flag)
    return ad.sparse_matmul(g.norm_adjacency, ad.matmul(h, p.w1))
