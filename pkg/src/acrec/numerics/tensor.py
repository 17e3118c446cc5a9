"""Reverse-mode autodiff over dense numpy arrays.

Only the operations the recommender actually needs are implemented:
vectors, matrices, and scalars, with float32 for training and float64
for gradient checking. Graphs are built eagerly; ``backward`` walks a
topological order of the recorded closures.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "ShapeError",
    "parameter",
    "constant",
    "set_debug_checks",
    "add",
    "sub",
    "neg",
    "mul",
    "scale",
    "matmul",
    "add_row",
    "concat",
    "stack_rows",
    "slice_cols",
    "slice_vec",
    "row",
    "flatten",
    "transpose",
    "broadcast_rows",
    "ramp",
    "sigmoid",
    "softplus",
    "softmax_rows",
    "layer_norm_rows",
    "dropout",
    "sum_all",
    "backward",
]

_DEBUG_CHECKS = False


def set_debug_checks(enabled: bool) -> None:
    """Enable per-op finiteness assertions (slow; for tests/debugging)."""
    global _DEBUG_CHECKS
    _DEBUG_CHECKS = bool(enabled)


class ShapeError(ValueError):
    pass


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn", "_done")

    def __init__(
        self,
        data: np.ndarray,
        requires_grad: bool = False,
        parents: Sequence["Tensor"] = (),
        backward_fn: Optional[Callable[[np.ndarray], None]] = None,
    ):
        self.data = np.asarray(data)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self._parents = tuple(parents)
        self._backward_fn = backward_fn
        self._done = False
        if _DEBUG_CHECKS and not np.all(np.isfinite(self.data)):
            raise FloatingPointError("non-finite values in forward result")

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def zero_grad(self) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        else:
            self.grad.fill(0.0)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        return sub(self, other)

    def __mul__(self, other: "Tensor") -> "Tensor":
        return mul(self, other)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def __neg__(self) -> "Tensor":
        return neg(self)


def parameter(data: np.ndarray) -> Tensor:
    """A trainable leaf. Its grad buffer exists from creation, so a
    parameter unreachable from a loss holds exact zeros after backward."""
    t = Tensor(np.array(data, copy=True), requires_grad=True)
    t.grad = np.zeros_like(t.data)
    return t


def constant(data: np.ndarray, dtype=None) -> Tensor:
    arr = np.asarray(data, dtype=dtype)
    return Tensor(arr, requires_grad=False)


def _check_same_dtype(a: Tensor, b: Tensor, op: str) -> None:
    if a.data.dtype != b.data.dtype:
        raise ShapeError(f"{op}: dtype mismatch {a.data.dtype} vs {b.data.dtype}")


def _needs(t: Tensor) -> bool:
    return t.requires_grad


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_same_dtype(a, b, "add")
    if a.shape != b.shape:
        raise ShapeError(f"add: shape mismatch {a.shape} vs {b.shape}")
    req = _needs(a) or _needs(b)

    def bwd(g):
        if _needs(a):
            a.accumulate_grad(g)
        if _needs(b):
            b.accumulate_grad(g)

    return Tensor(a.data + b.data, req, (a, b), bwd if req else None)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_same_dtype(a, b, "sub")
    if a.shape != b.shape:
        raise ShapeError(f"sub: shape mismatch {a.shape} vs {b.shape}")
    req = _needs(a) or _needs(b)

    def bwd(g):
        if _needs(a):
            a.accumulate_grad(g)
        if _needs(b):
            b.accumulate_grad(-g)

    return Tensor(a.data - b.data, req, (a, b), bwd if req else None)


def neg(a: Tensor) -> Tensor:
    req = _needs(a)

    def bwd(g):
        a.accumulate_grad(-g)

    return Tensor(-a.data, req, (a,), bwd if req else None)


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product of same-shape tensors."""
    _check_same_dtype(a, b, "mul")
    if a.shape != b.shape:
        raise ShapeError(f"mul: shape mismatch {a.shape} vs {b.shape}")
    req = _needs(a) or _needs(b)

    def bwd(g):
        if _needs(a):
            a.accumulate_grad(g * b.data)
        if _needs(b):
            b.accumulate_grad(g * a.data)

    return Tensor(a.data * b.data, req, (a, b), bwd if req else None)


def scale(a: Tensor, c: float) -> Tensor:
    req = _needs(a)
    c = a.data.dtype.type(c)

    def bwd(g):
        a.accumulate_grad(g * c)

    return Tensor(a.data * c, req, (a,), bwd if req else None)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product over the 1-d/2-d cases the model uses."""
    _check_same_dtype(a, b, "matmul")
    if a.data.ndim not in (1, 2) or b.data.ndim not in (1, 2):
        raise ShapeError(f"matmul: unsupported ranks {a.shape} @ {b.shape}")
    if a.data.shape[-1] != b.data.shape[0]:
        raise ShapeError(f"matmul: shape mismatch {a.shape} @ {b.shape}")
    req = _needs(a) or _needs(b)

    def bwd(g):
        an, bn = a.data.ndim, b.data.ndim
        if an == 2 and bn == 2:
            if _needs(a):
                a.accumulate_grad(g @ b.data.T)
            if _needs(b):
                b.accumulate_grad(a.data.T @ g)
        elif an == 1 and bn == 2:
            if _needs(a):
                a.accumulate_grad(b.data @ g)
            if _needs(b):
                b.accumulate_grad(np.outer(a.data, g))
        elif an == 2 and bn == 1:
            if _needs(a):
                a.accumulate_grad(np.outer(g, b.data))
            if _needs(b):
                b.accumulate_grad(a.data.T @ g)
        else:  # 1-d @ 1-d -> scalar
            if _needs(a):
                a.accumulate_grad(g * b.data)
            if _needs(b):
                b.accumulate_grad(g * a.data)

    return Tensor(a.data @ b.data, req, (a, b), bwd if req else None)


def add_row(m: Tensor, v: Tensor) -> Tensor:
    """Add a row vector to every row of a matrix (bias broadcast)."""
    _check_same_dtype(m, v, "add_row")
    if m.data.ndim != 2 or v.data.ndim != 1 or m.shape[1] != v.shape[0]:
        raise ShapeError(f"add_row: shape mismatch {m.shape} vs {v.shape}")
    req = _needs(m) or _needs(v)

    def bwd(g):
        if _needs(m):
            m.accumulate_grad(g)
        if _needs(v):
            v.accumulate_grad(g.sum(axis=0))

    return Tensor(m.data + v.data, req, (m, v), bwd if req else None)


def broadcast_rows(v: Tensor, n_rows: int) -> Tensor:
    """Tile a vector into an (n_rows, dim) matrix; backward sums rows."""
    if v.data.ndim != 1:
        raise ShapeError(f"broadcast_rows: expected vector, got {v.shape}")
    req = _needs(v)

    def bwd(g):
        v.accumulate_grad(g.sum(axis=0))

    out = np.broadcast_to(v.data, (n_rows, v.shape[0])).copy()
    return Tensor(out, req, (v,), bwd if req else None)


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    parts = list(parts)
    if not parts:
        raise ShapeError("concat of zero tensors")
    for p in parts[1:]:
        _check_same_dtype(parts[0], p, "concat")
    ndim = parts[0].data.ndim
    if any(p.data.ndim != ndim for p in parts):
        raise ShapeError(f"concat: rank mismatch {[p.shape for p in parts]}")
    req = any(_needs(p) for p in parts)
    sizes = [p.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if _needs(p):
                p.accumulate_grad(g[lo:hi] if axis == 0 else g[:, lo:hi])

    return Tensor(np.concatenate([p.data for p in parts], axis=axis), req, tuple(parts), bwd if req else None)


def stack_rows(vectors: Sequence[Tensor]) -> Tensor:
    """Stack 1-d tensors into a matrix, one per row."""
    vectors = list(vectors)
    if not vectors:
        raise ShapeError("stack_rows of zero tensors")
    dim = vectors[0].shape[0]
    for v in vectors:
        if v.data.ndim != 1 or v.shape[0] != dim:
            raise ShapeError(f"stack_rows: inconsistent shapes {[v.shape for v in vectors]}")
    req = any(_needs(v) for v in vectors)

    def bwd(g):
        for i, v in enumerate(vectors):
            if _needs(v):
                v.accumulate_grad(g[i])

    return Tensor(np.stack([v.data for v in vectors]), req, tuple(vectors), bwd if req else None)


def slice_cols(m: Tensor, lo: int, hi: int) -> Tensor:
    if m.data.ndim != 2 or not (0 <= lo < hi <= m.shape[1]):
        raise ShapeError(f"slice_cols[{lo}:{hi}] of shape {m.shape}")
    req = _needs(m)

    def bwd(g):
        full = np.zeros_like(m.data)
        full[:, lo:hi] = g
        m.accumulate_grad(full)

    return Tensor(m.data[:, lo:hi].copy(), req, (m,), bwd if req else None)


def slice_vec(v: Tensor, lo: int, hi: int) -> Tensor:
    if v.data.ndim != 1 or not (0 <= lo < hi <= v.shape[0]):
        raise ShapeError(f"slice_vec[{lo}:{hi}] of shape {v.shape}")
    req = _needs(v)

    def bwd(g):
        full = np.zeros_like(v.data)
        full[lo:hi] = g
        v.accumulate_grad(full)

    return Tensor(v.data[lo:hi].copy(), req, (v,), bwd if req else None)


def row(m: Tensor, i: int) -> Tensor:
    """Extract row i of a matrix as a vector."""
    if m.data.ndim != 2 or not 0 <= i < m.shape[0]:
        raise ShapeError(f"row {i} of shape {m.shape}")
    req = _needs(m)

    def bwd(g):
        full = np.zeros_like(m.data)
        full[i] = g
        m.accumulate_grad(full)

    return Tensor(m.data[i].copy(), req, (m,), bwd if req else None)


def flatten(m: Tensor) -> Tensor:
    """Reshape to 1-d."""
    req = _needs(m)
    shape = m.data.shape

    def bwd(g):
        m.accumulate_grad(g.reshape(shape))

    return Tensor(m.data.reshape(-1).copy(), req, (m,), bwd if req else None)


def transpose(m: Tensor) -> Tensor:
    if m.data.ndim != 2:
        raise ShapeError(f"transpose: expected matrix, got {m.shape}")
    req = _needs(m)

    def bwd(g):
        m.accumulate_grad(g.T)

    return Tensor(m.data.T.copy(), req, (m,), bwd if req else None)


def ramp(a: Tensor) -> Tensor:
    """max(0, x); subgradient 0 at exactly 0."""
    req = _needs(a)
    out = np.maximum(a.data, 0)

    def bwd(g):
        a.accumulate_grad(g * (a.data > 0))

    return Tensor(out, req, (a,), bwd if req else None)


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    req = _needs(a)

    def bwd(g):
        a.accumulate_grad(g * out * (1.0 - out))

    return Tensor(out, req, (a,), bwd if req else None)


def softplus(a: Tensor) -> Tensor:
    """log(1 + exp(x)), computed in the overflow-safe form."""
    x = a.data
    out = np.maximum(x, 0) + np.log1p(np.exp(-np.abs(x)))
    req = _needs(a)

    def bwd(g):
        s = np.empty_like(x)
        pos = x >= 0
        s[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        s[~pos] = ex / (1.0 + ex)
        a.accumulate_grad(g * s)

    return Tensor(out, req, (a,), bwd if req else None)


def softmax_rows(a: Tensor, additive_mask: Optional[np.ndarray] = None) -> Tensor:
    """Row-wise softmax; an optional additive mask (0 / -inf) is applied
    to the logits first. Fully-masked rows are a caller error."""
    if a.data.ndim != 2:
        raise ShapeError(f"softmax_rows: expected matrix, got {a.shape}")
    logits = a.data if additive_mask is None else a.data + additive_mask.astype(a.data.dtype)
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=1, keepdims=True)
    req = _needs(a)

    def bwd(g):
        dot = (g * out).sum(axis=1, keepdims=True)
        a.accumulate_grad(out * (g - dot))

    return Tensor(out, req, (a,), bwd if req else None)


def layer_norm_rows(a: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize each row to zero mean / unit variance. Affine gain and
    bias are separate parameters applied by the caller."""
    if a.data.ndim != 2:
        raise ShapeError(f"layer_norm_rows: expected matrix, got {a.shape}")
    x = a.data
    mu = x.mean(axis=1, keepdims=True)
    var = x.var(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * inv
    req = _needs(a)

    def bwd(g):
        n = x.shape[1]
        gmean = g.mean(axis=1, keepdims=True)
        gx = (g * xhat).mean(axis=1, keepdims=True)
        a.accumulate_grad(inv * (g - gmean - xhat * gx))

    return Tensor(xhat, req, (a,), bwd if req else None)


def dropout(a: Tensor, p: float, training: bool, rng: Optional[np.random.Generator] = None) -> Tensor:
    """Inverted dropout: identity at inference, 1/(1-p)-scaled mask in
    training. The rng is explicit so runs are reproducible."""
    if not training or p <= 0.0:
        req = _needs(a)

        def bwd_id(g):
            a.accumulate_grad(g)

        return Tensor(a.data.copy(), req, (a,), bwd_id if req else None)
    if rng is None:
        raise ValueError("dropout in training mode requires an rng")
    if not 0.0 < p < 1.0:
        raise ValueError(f"dropout p must be in (0,1), got {p}")
    keep = (rng.random(a.shape) >= p).astype(a.data.dtype)
    factor = a.data.dtype.type(1.0 / (1.0 - p))
    mask = keep * factor
    req = _needs(a)

    def bwd(g):
        a.accumulate_grad(g * mask)

    return Tensor(a.data * mask, req, (a,), bwd if req else None)


def sum_all(a: Tensor) -> Tensor:
    req = _needs(a)

    def bwd(g):
        a.accumulate_grad(np.full_like(a.data, g))

    return Tensor(np.asarray(a.data.sum(), dtype=a.data.dtype), req, (a,), bwd if req else None)


def backward(loss: Tensor) -> None:
    """Populate grads of every reachable requires_grad tensor.

    The loss must be scalar. Calling backward twice on the same node is
    an error: the recorded closures have already consumed their inputs.
    """
    if loss.data.shape != ():
        raise ShapeError(f"backward requires a scalar loss, got shape {loss.shape}")
    if loss._done:
        raise RuntimeError("backward already ran on this graph; rebuild the graph first")
    loss._done = True

    # Iterative topological order (graphs can be deep on long windows).
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen and p.requires_grad:
                stack.append((p, False))

    loss.accumulate_grad(np.asarray(1.0, dtype=loss.data.dtype))
    for node in reversed(order):
        if node._backward_fn is not None and node.grad is not None:
            node._backward_fn(node.grad)
