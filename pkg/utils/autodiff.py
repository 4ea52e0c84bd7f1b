"""
Minimal dense reverse-mode autodiff on numpy float64 arrays.

Only what the detector and the toy policy need:
matmul / spmm / add / sub / mul / scale / concat / leaky_relu / tanh / sigmoid /
log_sigmoid / softmax / log_softmax / log / mean / sum / dropout /
reshape / take_rows / pick.

Every op checks its forward value for NaN/Inf. Dropout takes an explicit mask,
so nothing in here draws random numbers.
"""
from __future__ import annotations

from contextlib import contextmanager
from contextvars import ContextVar
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import sparse
from scipy.special import expit, log_softmax as _log_softmax, softmax as _softmax

from domain.errors import GraphConsumedError, NonFiniteError, ShapeError


Number = Union[int, float]

# scoped to the current thread or task
_grad_enabled: ContextVar[bool] = ContextVar("grad_enabled", default=True)


def is_grad_enabled() -> bool:
    return _grad_enabled.get()


@contextmanager
def no_grad() -> Iterator[None]:
    token = _grad_enabled.set(False)
    try:
        yield
    finally:
        _grad_enabled.reset(token)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward", "_consumed")

    def __init__(self, data, requires_grad: bool = False, name: str = ""):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = bool(requires_grad)
        self.name = name
        self._parents: Tuple["Tensor", ...] = ()
        self._backward: Optional[Callable[[np.ndarray], None]] = None
        self._consumed = False

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}, name={self.name!r})"


def parameter(data, name: str = "") -> Tensor:
    return Tensor(np.array(data, dtype=np.float64, copy=True), requires_grad=True, name=name)


def constant(data) -> Tensor:
    return Tensor(data, requires_grad=False)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _accum(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64, copy=True)
    else:
        t.grad = t.grad + g


def _make(out: np.ndarray, parents: Sequence[Tensor], backward_fn: Callable[[np.ndarray], None], op: str) -> Tensor:
    out = np.asarray(out, dtype=np.float64)
    if not np.all(np.isfinite(out)):
        raise NonFiniteError(f"{op}: non-finite result")
    needs = _grad_enabled.get() and any(p.requires_grad for p in parents)
    t = Tensor(out, requires_grad=needs)
    if needs:
        t._parents = tuple(parents)
        t._backward = backward_fn
    return t


# ---- ops ----


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} @ {b.shape}")

    def backward(g: np.ndarray) -> None:
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)

    return _make(a.data @ b.data, (a, b), backward, "matmul")


def spmm(adj: sparse.spmatrix, x: Tensor) -> Tensor:
    """Constant sparse matrix times dense tensor."""
    x = _as_tensor(x)
    if adj.shape[1] != x.shape[0]:
        raise ShapeError(f"spmm: incompatible shapes {adj.shape} @ {x.shape}")
    adj_t = adj.T.tocsr()

    def backward(g: np.ndarray) -> None:
        _accum(x, np.asarray(adj_t @ g))

    return _make(np.asarray(adj @ x.data), (x,), backward, "spmm")


def add(a: Tensor, b) -> Tensor:
    a = _as_tensor(a)
    if not isinstance(b, Tensor):
        return _make(a.data + float(b), (a,), lambda g: _accum(a, g), "add")
    if a.shape == b.shape:

        def backward(g: np.ndarray) -> None:
            _accum(a, g)
            _accum(b, g)

        return _make(a.data + b.data, (a, b), backward, "add")
    # row bias: (n, d) + (d,)
    if a.data.ndim == 2 and b.data.ndim == 1 and b.shape[0] == a.shape[1]:

        def backward_bias(g: np.ndarray) -> None:
            _accum(a, g)
            _accum(b, g.sum(axis=0))

        return _make(a.data + b.data, (a, b), backward_bias, "add")
    raise ShapeError(f"add: incompatible shapes {a.shape} + {b.shape}")


def sub(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"sub: incompatible shapes {a.shape} - {b.shape}")

    def backward(g: np.ndarray) -> None:
        _accum(a, g)
        _accum(b, -g)

    return _make(a.data - b.data, (a, b), backward, "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"mul: incompatible shapes {a.shape} * {b.shape}")

    def backward(g: np.ndarray) -> None:
        _accum(a, g * b.data)
        _accum(b, g * a.data)

    return _make(a.data * b.data, (a, b), backward, "mul")


def scale(a: Tensor, c: Number) -> Tensor:
    a = _as_tensor(a)
    c = float(c)
    return _make(a.data * c, (a,), lambda g: _accum(a, g * c), "scale")


def neg(a: Tensor) -> Tensor:
    return scale(a, -1.0)


def concat(tensors: Sequence[Tensor], axis: int = 1) -> Tensor:
    ts = [_as_tensor(t) for t in tensors]
    if not ts:
        raise ShapeError("concat: empty input")
    sizes = [t.shape[axis] for t in ts]
    try:
        out = np.concatenate([t.data for t in ts], axis=axis)
    except ValueError as e:
        raise ShapeError(f"concat: {e}") from e
    bounds = np.cumsum([0] + sizes)

    def backward(g: np.ndarray) -> None:
        for t, lo, hi in zip(ts, bounds[:-1], bounds[1:]):
            index = [slice(None)] * g.ndim
            index[axis] = slice(int(lo), int(hi))
            _accum(t, g[tuple(index)])

    return _make(out, ts, backward, "concat")


def leaky_relu(x: Tensor, slope: float = 0.01) -> Tensor:
    x = _as_tensor(x)
    factor = np.where(x.data > 0, 1.0, float(slope))
    return _make(x.data * factor, (x,), lambda g: _accum(x, g * factor), "leaky_relu")


def tanh(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    out = np.tanh(x.data)
    return _make(out, (x,), lambda g: _accum(x, g * (1.0 - out * out)), "tanh")


def sigmoid(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    out = expit(x.data)
    return _make(out, (x,), lambda g: _accum(x, g * out * (1.0 - out)), "sigmoid")


def log_sigmoid(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    out = -np.logaddexp(0.0, -x.data)
    return _make(out, (x,), lambda g: _accum(x, g * expit(-x.data)), "log_sigmoid")


def softmax(x: Tensor) -> Tensor:
    """Softmax over the last axis."""
    x = _as_tensor(x)
    out = _softmax(x.data, axis=-1)

    def backward(g: np.ndarray) -> None:
        _accum(x, out * (g - np.sum(g * out, axis=-1, keepdims=True)))

    return _make(out, (x,), backward, "softmax")


def log_softmax(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    out = _log_softmax(x.data, axis=-1)
    probs = np.exp(out)

    def backward(g: np.ndarray) -> None:
        _accum(x, g - probs * np.sum(g, axis=-1, keepdims=True))

    return _make(out, (x,), backward, "log_softmax")


def log(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    if np.any(x.data <= 0):
        raise NonFiniteError("log: non-positive input")
    return _make(np.log(x.data), (x,), lambda g: _accum(x, g / x.data), "log")


def mean(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    n = x.data.size
    if n == 0:
        raise ShapeError("mean: empty tensor")
    return _make(np.array(x.data.mean()), (x,), lambda g: _accum(x, np.full(x.shape, float(g) / n)), "mean")


def sum(x: Tensor, axis: Optional[int] = None) -> Tensor:  # noqa: A001 - mirrors numpy naming
    x = _as_tensor(x)
    if axis is None:
        return _make(np.array(x.data.sum()), (x,), lambda g: _accum(x, np.full(x.shape, float(g))), "sum")

    def backward(g: np.ndarray) -> None:
        _accum(x, np.broadcast_to(np.expand_dims(g, axis), x.shape))

    return _make(x.data.sum(axis=axis), (x,), backward, "sum")


def dropout(x: Tensor, mask: Optional[np.ndarray], p: float) -> Tensor:
    """Inverted dropout with a caller-supplied 0/1 mask; p == 0 or no mask is identity."""
    x = _as_tensor(x)
    if mask is None or p <= 0.0:
        return x
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != x.shape:
        raise ShapeError(f"dropout: mask shape {mask.shape} != {x.shape}")
    factor = mask / (1.0 - float(p))
    return _make(x.data * factor, (x,), lambda g: _accum(x, g * factor), "dropout")


def reshape(x: Tensor, shape: Tuple[int, ...]) -> Tensor:
    x = _as_tensor(x)
    try:
        out = x.data.reshape(shape)
    except ValueError as e:
        raise ShapeError(f"reshape: {e}") from e
    return _make(out, (x,), lambda g: _accum(x, g.reshape(x.shape)), "reshape")


def take_rows(w: Tensor, idx: np.ndarray) -> Tensor:
    """Row gather (embedding lookup); gradients scatter-add back."""
    w = _as_tensor(w)
    idx = np.asarray(idx, dtype=np.int64)

    def backward(g: np.ndarray) -> None:
        if not w.requires_grad:
            return
        full = np.zeros_like(w.data)
        np.add.at(full, idx, g)
        _accum(w, full)

    return _make(w.data[idx], (w,), backward, "take_rows")


def pick(x: Tensor, idx: np.ndarray) -> Tensor:
    """out[i] = x[i, idx[i]] for a 2-D tensor."""
    x = _as_tensor(x)
    idx = np.asarray(idx, dtype=np.int64)
    if x.data.ndim != 2 or idx.shape != (x.shape[0],):
        raise ShapeError(f"pick: shape {x.shape} with index {idx.shape}")
    rows = np.arange(x.shape[0])

    def backward(g: np.ndarray) -> None:
        full = np.zeros_like(x.data)
        full[rows, idx] = g
        _accum(x, full)

    return _make(x.data[rows, idx], (x,), backward, "pick")


# ---- backward ----


def _topo_order(root: Tensor) -> List[Tensor]:
    order: List[Tensor] = []
    seen = set()
    stack: List[Tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor) -> None:
    """
    Reverse-mode pass from a scalar loss. Gradients accumulate into `.grad`
    of every reachable tensor with requires_grad. The recording is released
    afterwards; calling backward twice on the same loss is an error.
    """
    if loss.data.size != 1:
        raise ShapeError(f"backward: loss must be scalar, got shape {loss.shape}")
    if loss._consumed:
        raise GraphConsumedError("backward: recording already consumed")
    loss._consumed = True
    if not loss.requires_grad:
        return
    order = _topo_order(loss)
    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
    for node in order:
        if node._parents:
            node._parents = ()
            node._backward = None
            node.grad = None


def gradient_check(
    loss_fn: Callable[[], Tensor],
    params: Sequence[Tensor],
    n_samples: int = 100,
    h: float = 1e-4,
    seed: int = 0,
    floor: float = 1e-3,
) -> float:
    """
    Max relative error between analytic gradients and central differences
    over `n_samples` randomly chosen scalar parameters.
    relative error = |a - n| / max(|a|, |n|, floor)
    """
    for p in params:
        p.zero_grad()
    loss = loss_fn()
    backward(loss)
    analytic: Dict[int, np.ndarray] = {
        i: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data)) for i, p in enumerate(params)
    }

    slots = [(i, j) for i, p in enumerate(params) for j in range(p.data.size)]
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(slots), size=min(n_samples, len(slots)), replace=False)

    worst = 0.0
    with no_grad():
        for c in chosen:
            i, j = slots[int(c)]
            flat = params[i].data.reshape(-1)
            orig = flat[j]
            flat[j] = orig + h
            f_plus = loss_fn().item()
            flat[j] = orig - h
            f_minus = loss_fn().item()
            flat[j] = orig
            numeric = (f_plus - f_minus) / (2.0 * h)
            a = float(analytic[i].reshape(-1)[j])
            rel = abs(a - numeric) / max(abs(a), abs(numeric), floor)
            worst = max(worst, rel)
    for p in params:
        p.zero_grad()
    return worst
