"""Dense tensors with reverse-mode differentiation on an explicit tape.

A ``Tape`` records operations in execution order (which is already a
topological order); ``backward`` walks the list once in reverse,
accumulating adjoints at fan-out nodes. All data is float64.

A tape and the tensors flowing through it belong to a single training
run. Separate runs each open their own tape and may execute in parallel;
reusing one parameter tensor on two live tapes concurrently is not
supported. Entering a tape context makes it the recording target for the
current thread; ``no_grad()`` suspends recording (used for evaluation
passes).
"""

import threading
from contextlib import contextmanager
from typing import Callable, NamedTuple

import numpy as np

from .errors import InputError
from .sparse import SparseMatrix, spmm

_tls = threading.local()


def _tape_stack():
    if not hasattr(_tls, "stack"):
        _tls.stack = []
    return _tls.stack


def _active_tape():
    stack = _tape_stack()
    return stack[-1] if stack else None


@contextmanager
def no_grad():
    """Suspend tape recording for the enclosed block."""
    _tape_stack().append(None)
    try:
        yield
    finally:
        _tape_stack().pop()


class TapeOp(NamedTuple):
    out_id: int
    input_ids: tuple
    backward_rule: Callable  # maps d(loss)/d(out) to per-input adjoints


class Tensor:
    """A dense float64 array, optionally tracked for differentiation."""

    __slots__ = ("data", "requires_grad", "grad", "node_id", "tape")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = None
        self.node_id = None
        self.tape = None

    @property
    def shape(self):
        return self.data.shape

    def item(self):
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __matmul__(self, other):
        return matmul(self, other)


class Tape:
    """Ordered record of differentiable operations for one run."""

    def __init__(self):
        self.ops: list[TapeOp] = []
        self.leaves: dict[int, Tensor] = {}
        self._next_id = 0

    def __enter__(self):
        _tape_stack().append(self)
        return self

    def __exit__(self, *exc):
        popped = _tape_stack().pop()
        assert popped is self

    def _fresh_id(self):
        self._next_id += 1
        return self._next_id

    def _register(self, t: Tensor):
        """Attach a tensor to this tape, assigning a fresh node id. A
        parameter reused across epochs migrates to each new tape on first
        touch."""
        t.node_id = self._fresh_id()
        t.tape = self
        if t.requires_grad:
            self.leaves[t.node_id] = t


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _tracked(t: Tensor, tape):
    if tape is None:
        return False
    return t.requires_grad or t.tape is tape


def _record(out_data, inputs, backward_rule):
    """Create the output tensor, recording the op if any input is live on
    the active tape."""
    tape = _active_tape()
    out = Tensor(out_data)
    live = [t for t in inputs if _tracked(t, tape)]
    if not live:
        return out
    for t in live:
        if t.tape is not tape:
            tape._register(t)
    tape._register(out)
    out.requires_grad = True
    ids = tuple(t.node_id if _tracked(t, tape) else None for t in inputs)
    tape.ops.append(TapeOp(out.node_id, ids, backward_rule))
    return out


def backward(tape: Tape, loss: Tensor) -> dict[int, np.ndarray]:
    """Reverse sweep from a scalar loss.

    Returns adjoints keyed by node id and stores them on ``.grad`` of
    every requires_grad leaf (zeros for leaves the loss never touched).
    Fan-out contributions accumulate.
    """
    if loss.data.shape != ():
        raise InputError(f"loss must be a scalar, got shape {loss.data.shape}")
    if loss.tape is not tape or loss.node_id is None:
        raise InputError("loss was not recorded on this tape")
    grads: dict[int, np.ndarray] = {loss.node_id: np.ones(())}
    for op in reversed(tape.ops):
        g_out = grads.pop(op.out_id, None)
        if g_out is None:
            continue
        contribs = op.backward_rule(g_out)
        for in_id, g in zip(op.input_ids, contribs):
            if in_id is None or g is None:
                continue
            if in_id in grads:
                grads[in_id] = grads[in_id] + g
            else:
                grads[in_id] = g
    for node_id, leaf in tape.leaves.items():
        leaf.grad = grads.get(node_id, np.zeros_like(leaf.data))
        grads.setdefault(node_id, leaf.grad)
    return grads


# ---------------------------------------------------------------------------
# primitives


def _unbroadcast(g, shape):
    """Reduce a gradient back to the shape it was broadcast from."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    keep = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if keep:
        g = g.sum(axis=keep, keepdims=True)
    return g.reshape(shape)


def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    sa, sb = a.data.shape, b.data.shape
    return _record(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)),
    )


def sub(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    sa, sb = a.data.shape, b.data.shape
    return _record(
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)),
    )


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    da, db = a.data, b.data
    return _record(
        da * db,
        (a, b),
        lambda g: (_unbroadcast(g * db, da.shape), _unbroadcast(g * da, db.shape)),
    )


def matmul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise InputError(
            f"matmul expects 2-d operands, got {a.data.shape} and {b.data.shape}"
        )
    if a.data.shape[1] != b.data.shape[0]:
        raise InputError(f"matmul shape mismatch: {a.data.shape} @ {b.data.shape}")
    da, db = a.data, b.data
    return _record(
        da @ db,
        (a, b),
        lambda g: (g @ db.T, da.T @ g),
    )


def sparse_matmul(m: SparseMatrix, h) -> Tensor:
    """Product of a constant sparse matrix with a dense tensor."""
    h = _as_tensor(h)
    return _record(spmm(m, h.data), (h,), lambda g: (spmm(m.transpose(), g),))


def transpose(a):
    a = _as_tensor(a)
    return _record(a.data.T.copy(), (a,), lambda g: (g.T,))


def relu(a):
    a = _as_tensor(a)
    gate = a.data > 0
    return _record(a.data * gate, (a,), lambda g: (g * gate,))


def exp(a):
    a = _as_tensor(a)
    out = np.exp(a.data)
    return _record(out, (a,), lambda g: (g * out,))


def safe_sqrt(a):
    """Elementwise square root with derivative 0 at 0.

    The zero-derivative convention is the subgradient choice that keeps
    norm-like composites (sqrt of a sum of squares) well-defined when two
    samples coincide exactly.
    """
    a = _as_tensor(a)
    if np.any(a.data < 0):
        raise InputError("safe_sqrt requires non-negative input")
    out = np.sqrt(a.data)
    safe = np.where(out > 0, out, 1.0)
    return _record(out, (a,), lambda g: (g * np.where(out > 0, 0.5 / safe, 0.0),))


def powi(a, k: int):
    """Elementwise integer power, k >= 1."""
    a = _as_tensor(a)
    if int(k) != k or k < 1:
        raise InputError(f"powi exponent must be an integer >= 1, got {k}")
    k = int(k)
    da = a.data
    return _record(da**k, (a,), lambda g: (g * k * da ** (k - 1),))


def dropout(a, rate: float, rng, train: bool):
    """Inverted dropout: retained entries are scaled by 1/(1-rate) during
    training; evaluation mode is the identity and draws nothing from rng."""
    a = _as_tensor(a)
    if not 0.0 <= rate < 1.0:
        raise InputError(f"dropout rate must be in [0, 1), got {rate}")
    if not train or rate == 0.0:
        return a
    keep = rng.random(a.data.shape) >= rate
    scale = 1.0 / (1.0 - rate)
    mask = keep * scale
    return _record(a.data * mask, (a,), lambda g: (g * mask,))


def row_softmax(a):
    a = _as_tensor(a)
    shifted = a.data - a.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=1, keepdims=True)

    def rule(g):
        dot = (g * out).sum(axis=1, keepdims=True)
        return (out * (g - dot),)

    return _record(out, (a,), rule)


def reduce_sum(a, axis=None, keepdims=False):
    a = _as_tensor(a)
    shape = a.data.shape

    def rule(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return _record(a.data.sum(axis=axis, keepdims=keepdims), (a,), rule)


def reduce_mean(a, axis=None, keepdims=False):
    a = _as_tensor(a)
    shape = a.data.shape
    count = a.data.size if axis is None else shape[axis]

    def rule(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape) / count,)

    return _record(a.data.mean(axis=axis, keepdims=keepdims), (a,), rule)


def mean_rows(a):
    """Column-wise mean over rows: (n, h) -> (h,)."""
    return reduce_mean(a, axis=0)


def take_rows(a, indices):
    a = _as_tensor(a)
    indices = np.asarray(indices, dtype=np.int64)
    shape = a.data.shape

    def rule(g):
        out = np.zeros(shape)
        np.add.at(out, indices, g)
        return (out,)

    return _record(a.data[indices], (a,), rule)


def softmax_cross_entropy(logits, labels, mask):
    """Mean negative log-softmax of the true class over masked rows,
    stabilized by row-max subtraction."""
    logits = _as_tensor(logits)
    labels = np.asarray(labels, dtype=np.int64)
    mask = np.asarray(mask, dtype=bool)
    idx = np.flatnonzero(mask)
    if len(idx) == 0:
        raise InputError("cross-entropy mask selects no rows")
    rows = logits.data[idx]
    y = labels[idx]
    shifted = rows - rows.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(shifted).sum(axis=1))
    loss = float(np.mean(logsumexp - shifted[np.arange(len(idx)), y]))

    def rule(g):
        probs = np.exp(shifted)
        probs /= probs.sum(axis=1, keepdims=True)
        probs[np.arange(len(idx)), y] -= 1.0
        out = np.zeros(logits.data.shape)
        out[idx] = probs * (g / len(idx))
        return (out,)

    return _record(np.float64(loss), (logits,), rule)
