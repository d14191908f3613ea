"""Reverse-mode automatic differentiation over 2-D numpy arrays.

Every value in a graph is a matrix. Scalars are (1, 1), row vectors (1, n).
Graphs are built implicitly by the op functions below and freed after
``backward``; nothing here is thread-aware or in-place except gradient
accumulation.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

_default_dtype = np.float64


class ShapeError(ValueError):
    pass


def set_default_dtype(dtype) -> None:
    global _default_dtype
    dtype = np.dtype(dtype)
    if dtype not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ValueError(f"unsupported dtype {dtype}")
    _default_dtype = dtype.type


def get_default_dtype():
    return _default_dtype


def _as_matrix(data) -> np.ndarray:
    arr = np.asarray(data, dtype=_default_dtype)
    if arr.ndim == 0:
        return arr.reshape(1, 1)
    if arr.ndim == 1:
        return arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ShapeError(f"tensors are 2-D, got shape {arr.shape}")
    return arr


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _as_matrix(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() on shape {self.data.shape}")
        return float(self.data[0, 0])

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def constant(data) -> Tensor:
    return Tensor(data, requires_grad=False)


def _node(data: np.ndarray, parents: tuple[Tensor, ...], backward_fn) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward_fn
    else:
        out.requires_grad = False
        out._parents = ()
        out._backward = None
    return out


def _accum(t: Tensor, g: np.ndarray) -> None:
    if t.requires_grad:
        if t.grad is None:
            t.grad = g.copy() if isinstance(g, np.ndarray) else np.asarray(g)
        else:
            t.grad += g


def backward(root: Tensor) -> None:
    """Backpropagate from a scalar root through its graph.

    Gradients accumulate into ``.grad`` of every reachable tensor with
    ``requires_grad``; leaves never touched by the graph keep ``grad=None``.
    """
    if root.data.size != 1:
        raise ShapeError("backward() needs a scalar root")
    if not root.requires_grad:
        raise ValueError("root does not require grad")
    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in seen or not node.requires_grad:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            stack.append((p, False))
    root.grad = np.ones_like(root.data)
    for node in reversed(topo):
        if node._backward is not None:
            node._backward(node.grad)


# ---------------------------------------------------------------------------
# ops


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul {a.data.shape} @ {b.data.shape}")
    out_data = a.data @ b.data

    def bw(g: np.ndarray) -> None:
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)

    return _node(out_data, (a, b), bw)


def transpose(a: Tensor) -> Tensor:
    def bw(g: np.ndarray) -> None:
        _accum(a, g.T)

    return _node(a.data.T.copy(), (a,), bw)


def add(a: Tensor, b: Tensor) -> Tensor:
    # same shape, or (n, d) + (1, d) bias broadcast
    if a.data.shape != b.data.shape and not (
        b.data.shape == (1, a.data.shape[1])
    ):
        raise ShapeError(f"add {a.data.shape} + {b.data.shape}")
    out_data = a.data + b.data

    def bw(g: np.ndarray) -> None:
        _accum(a, g)
        if b.data.shape == g.shape:
            _accum(b, g)
        else:
            _accum(b, g.sum(axis=0, keepdims=True))

    return _node(out_data, (a, b), bw)


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape and not (
        b.data.shape == (1, a.data.shape[1])
    ):
        raise ShapeError(f"sub {a.data.shape} - {b.data.shape}")
    out_data = a.data - b.data

    def bw(g: np.ndarray) -> None:
        _accum(a, g)
        if b.data.shape == g.shape:
            _accum(b, -g)
        else:
            _accum(b, -g.sum(axis=0, keepdims=True))

    return _node(out_data, (a, b), bw)


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ShapeError(f"mul {a.data.shape} * {b.data.shape}")
    out_data = a.data * b.data

    def bw(g: np.ndarray) -> None:
        _accum(a, g * b.data)
        _accum(b, g * a.data)

    return _node(out_data, (a, b), bw)


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)

    def bw(g: np.ndarray) -> None:
        _accum(a, g * c)

    return _node(a.data * c, (a,), bw)


def leaky_relu(a: Tensor, slope: float = 0.01) -> Tensor:
    pos = a.data > 0
    out_data = np.where(pos, a.data, a.data * slope)

    def bw(g: np.ndarray) -> None:
        _accum(a, g * np.where(pos, 1.0, slope))

    return _node(out_data, (a,), bw)


def exp(a: Tensor) -> Tensor:
    out_data = np.exp(a.data)

    def bw(g: np.ndarray) -> None:
        _accum(a, g * out_data)

    return _node(out_data, (a,), bw)


def log(a: Tensor) -> Tensor:
    if np.any(a.data <= 0):
        raise ValueError("log of non-positive input")
    out_data = np.log(a.data)

    def bw(g: np.ndarray) -> None:
        _accum(a, g / a.data)

    return _node(out_data, (a,), bw)


def softmax_rows(a: Tensor) -> Tensor:
    shifted = a.data - a.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=1, keepdims=True)

    def bw(g: np.ndarray) -> None:
        dot = (g * out_data).sum(axis=1, keepdims=True)
        _accum(a, out_data * (g - dot))

    return _node(out_data, (a,), bw)


def log_softmax_rows(a: Tensor) -> Tensor:
    shifted = a.data - a.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    out_data = shifted - lse
    soft = np.exp(out_data)

    def bw(g: np.ndarray) -> None:
        _accum(a, g - soft * g.sum(axis=1, keepdims=True))

    return _node(out_data, (a,), bw)


def l2_normalize_rows(a: Tensor, eps: float = 1e-12) -> Tensor:
    norms = np.sqrt((a.data * a.data).sum(axis=1, keepdims=True))
    denom = np.maximum(norms, eps)
    out_data = a.data / denom

    def bw(g: np.ndarray) -> None:
        guarded = norms < eps
        dot = (g * out_data).sum(axis=1, keepdims=True)
        da = (g - out_data * dot) / denom
        if guarded.any():
            da = np.where(guarded, g / eps, da)
        _accum(a, da)

    return _node(out_data, (a,), bw)


def rowwise_dot(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ShapeError(f"rowwise_dot {a.data.shape} . {b.data.shape}")
    out_data = (a.data * b.data).sum(axis=1, keepdims=True)

    def bw(g: np.ndarray) -> None:
        _accum(a, g * b.data)
        _accum(b, g * a.data)

    return _node(out_data, (a, b), bw)


def concat_cols(parts: Sequence[Tensor]) -> Tensor:
    parts = tuple(parts)
    rows = parts[0].data.shape[0]
    for p in parts:
        if p.data.shape[0] != rows:
            raise ShapeError("concat_cols row mismatch")
    out_data = np.concatenate([p.data for p in parts], axis=1)
    widths = [p.data.shape[1] for p in parts]

    def bw(g: np.ndarray) -> None:
        off = 0
        for p, w in zip(parts, widths):
            _accum(p, g[:, off:off + w])
            off += w

    return _node(out_data, parts, bw)


def concat_rows(parts: Sequence[Tensor]) -> Tensor:
    parts = tuple(parts)
    cols = parts[0].data.shape[1]
    for p in parts:
        if p.data.shape[1] != cols:
            raise ShapeError("concat_rows column mismatch")
    out_data = np.concatenate([p.data for p in parts], axis=0)
    heights = [p.data.shape[0] for p in parts]

    def bw(g: np.ndarray) -> None:
        off = 0
        for p, h in zip(parts, heights):
            _accum(p, g[off:off + h])
            off += h

    return _node(out_data, parts, bw)


def gather_rows(a: Tensor, indices) -> Tensor:
    idx = np.asarray(indices, dtype=np.intp)
    if idx.ndim != 1:
        raise ShapeError("gather_rows indices must be 1-D")
    out_data = a.data[idx]

    def bw(g: np.ndarray) -> None:
        if a.requires_grad:
            if a.grad is None:
                a.grad = np.zeros_like(a.data)
            # bincount scatter-add; much faster than np.add.at here
            n, d = a.data.shape
            flat = (idx[:, None] * d + np.arange(d)).ravel()
            acc = np.bincount(flat, weights=g.ravel(), minlength=n * d)
            a.grad += acc.reshape(n, d)

    return _node(out_data, (a,), bw)


def reshape(a: Tensor, rows: int, cols: int) -> Tensor:
    if rows * cols != a.data.size:
        raise ShapeError(f"reshape {a.data.shape} -> ({rows}, {cols})")
    orig = a.data.shape

    def bw(g: np.ndarray) -> None:
        _accum(a, g.reshape(orig))

    return _node(a.data.reshape(rows, cols), (a,), bw)


def sum_all(a: Tensor) -> Tensor:
    out_data = np.array([[a.data.sum()]], dtype=a.data.dtype)

    def bw(g: np.ndarray) -> None:
        _accum(a, np.full_like(a.data, g[0, 0]))

    return _node(out_data, (a,), bw)


def mean_all(a: Tensor) -> Tensor:
    n = a.data.size
    out_data = np.array([[a.data.sum() / n]], dtype=a.data.dtype)

    def bw(g: np.ndarray) -> None:
        _accum(a, np.full_like(a.data, g[0, 0] / n))

    return _node(out_data, (a,), bw)


def sum_squares(a: Tensor) -> Tensor:
    out_data = np.array([[(a.data * a.data).sum()]], dtype=a.data.dtype)

    def bw(g: np.ndarray) -> None:
        _accum(a, 2.0 * g[0, 0] * a.data)

    return _node(out_data, (a,), bw)


def stop_gradient(a: Tensor) -> Tensor:
    return Tensor(a.data, requires_grad=False)


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """x @ w + b with b of shape (1, out)."""
    if x.data.shape[1] != w.data.shape[0] or b.data.shape != (1, w.data.shape[1]):
        raise ShapeError(
            f"linear {x.data.shape} @ {w.data.shape} + {b.data.shape}")
    out_data = x.data @ w.data + b.data

    def bw(g: np.ndarray) -> None:
        _accum(x, g @ w.data.T)
        _accum(w, x.data.T @ g)
        _accum(b, g.sum(axis=0, keepdims=True))

    return _node(out_data, (x, w, b), bw)
