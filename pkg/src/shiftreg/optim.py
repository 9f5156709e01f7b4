"""Adam optimizer, weight initialization, and parameter checkpoints."""

import struct
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor
from .errors import InputError


@dataclass
class AdamState:
    """Per-parameter moment buffers plus the shared step counter."""

    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps_hat: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_params(cls, params, learning_rate=0.01, **kwargs) -> "AdamState":
        state = cls(learning_rate=learning_rate, **kwargs)
        state.m = [np.zeros_like(p.data) for p in params]
        state.v = [np.zeros_like(p.data) for p in params]
        return state


def adam_step(params, grads, state: AdamState):
    """One Adam update with bias correction. Parameters are updated in
    place; the (mutated) params and state are returned."""
    if len(params) != len(state.m):
        raise InputError("optimizer state does not match parameter list")
    state.step += 1
    bc1 = 1.0 - state.beta1**state.step
    bc2 = 1.0 - state.beta2**state.step
    for i, (p, g) in enumerate(zip(params, grads)):
        if g.shape != p.data.shape:
            raise InputError(f"gradient shape {g.shape} != parameter shape {p.data.shape}")
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * (g * g)
        m_hat = state.m[i] / bc1
        v_hat = state.v[i] / bc2
        p.data = p.data - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps_hat)
    return params, state


def glorot_init(rows: int, cols: int, seed: int) -> Tensor:
    """Uniform init in +-sqrt(6/(rows+cols)), deterministic per seed."""
    if rows <= 0 or cols <= 0:
        raise InputError(f"glorot_init needs positive dims, got ({rows}, {cols})")
    limit = np.sqrt(6.0 / (rows + cols))
    rng = np.random.default_rng(seed)
    return Tensor(rng.uniform(-limit, limit, (rows, cols)), requires_grad=True)


_MAGIC = b"SRCK"


def save_params(path, named_params):
    """Write a checkpoint: a list of (name, shape, float64 data) records
    in a fixed little-endian binary layout."""
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<Q", len(named_params)))
        for name, tensor in named_params:
            data = tensor.data if isinstance(tensor, Tensor) else np.asarray(tensor)
            raw = name.encode("utf-8")
            f.write(struct.pack("<Q", len(raw)))
            f.write(raw)
            f.write(struct.pack("<Q", data.ndim))
            f.write(struct.pack(f"<{data.ndim}Q", *data.shape))
            f.write(np.ascontiguousarray(data, dtype="<f8").tobytes())


def load_params(path):
    """Read a checkpoint back as a list of (name, ndarray) pairs."""
    with open(path, "rb") as f:
        if f.read(4) != _MAGIC:
            raise InputError(f"{path} is not a parameter checkpoint")
        (count,) = struct.unpack("<Q", f.read(8))
        out = []
        for _ in range(count):
            (name_len,) = struct.unpack("<Q", f.read(8))
            name = f.read(name_len).decode("utf-8")
            (ndim,) = struct.unpack("<Q", f.read(8))
            shape = struct.unpack(f"<{ndim}Q", f.read(8 * ndim))
            n = int(np.prod(shape)) if ndim else 1
            data = np.frombuffer(f.read(8 * n), dtype="<f8").reshape(shape)
            out.append((name, data.astype(np.float64)))
    return out
