"""Finite-difference verification of reverse-mode gradients."""

import numpy as np

from .autodiff import Tape, Tensor, backward
from .errors import InputError


def numerical_grad(f, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of a scalar-valued f at x.

    f takes an ndarray and returns a python float; every entry of x is
    perturbed by +-h in turn.
    """
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = float(f(x))
        flat[i] = orig - h
        fm = float(f(x))
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return g


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> float:
    """max |a - n| / max(|a|, |n|, floor) over all entries."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    if a.shape != n.shape:
        raise InputError(f"gradient shapes differ: {a.shape} vs {n.shape}")
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float(np.max(np.abs(a - n) / denom)) if a.size else 0.0


def check_gradients(build_loss, arrays, h: float = 1e-6) -> float:
    """Compare taped gradients against central differences.

    build_loss receives a list of Tensors (one per input array, all with
    requires_grad) and must return a scalar Tensor. Returns the maximum
    relative error across all inputs.
    """
    arrays = [np.asarray(a, dtype=np.float64) for a in arrays]

    with Tape() as tape:
        tensors = [Tensor(a.copy(), requires_grad=True) for a in arrays]
        loss = build_loss(tensors)
        backward(tape, loss)
    analytic = [t.grad for t in tensors]

    worst = 0.0
    for idx in range(len(arrays)):
        def scalar_f(perturbed, idx=idx):
            with Tape() as tape2:
                ts = [Tensor(a.copy(), requires_grad=True) for a in arrays]
                ts[idx] = Tensor(perturbed.copy(), requires_grad=True)
                out = build_loss(ts)
            return float(out.data)

        numeric = numerical_grad(scalar_f, arrays[idx].copy(), h=h)
        worst = max(worst, max_relative_error(analytic[idx], numeric))
    return worst
