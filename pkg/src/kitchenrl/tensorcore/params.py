"""Named parameter collections, Adam, gradient clipping, checkpoint files."""
from __future__ import annotations

import struct
from typing import Iterator

import numpy as np

from .tensor import Tensor, get_default_dtype

CKPT_MAGIC = b"LOADCKPT"
CKPT_VERSION = 1


class ParamGroup:
    """Ordered name -> array mapping plus Adam moment state.

    ``leaves()`` hands out fresh graph leaves viewing the stored arrays, so
    a group can serve any number of sequentially built graphs. ``adam_step``
    mutates the arrays in place; graphs built before the update keep stale
    views and must not be reused.
    """

    def __init__(self):
        self._arrays: dict[str, np.ndarray] = {}
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}
        self._flat: np.ndarray | None = None
        self._flat_m: np.ndarray | None = None
        self._flat_v: np.ndarray | None = None
        self.step_count = 0

    def add(self, name: str, array) -> None:
        if name in self._arrays:
            raise KeyError(f"duplicate parameter {name!r}")
        if self._flat is not None:
            raise RuntimeError("cannot add parameters after pack()")
        arr = np.array(array, dtype=get_default_dtype())
        if arr.ndim == 1:
            arr = arr.reshape(1, -1)
        if arr.ndim != 2:
            raise ValueError(f"parameter {name!r} must be 1-D or 2-D")
        self._arrays[name] = arr
        self._m[name] = np.zeros_like(arr)
        self._v[name] = np.zeros_like(arr)

    def pack(self) -> None:
        """Re-store all parameters and moments as views of one flat buffer so
        the optimizer can update everything in a few whole-buffer passes."""
        if self._flat is not None:
            return
        dt = next(iter(self._arrays.values())).dtype
        total = sum(a.size for a in self._arrays.values())
        self._flat = np.empty(total, dtype=dt)
        self._flat_m = np.zeros(total, dtype=dt)
        self._flat_v = np.zeros(total, dtype=dt)
        off = 0
        for name, arr in self._arrays.items():
            n = arr.size
            self._flat[off:off + n] = arr.ravel()
            self._flat_m[off:off + n] = self._m[name].ravel()
            self._flat_v[off:off + n] = self._v[name].ravel()
            self._arrays[name] = self._flat[off:off + n].reshape(arr.shape)
            self._m[name] = self._flat_m[off:off + n].reshape(arr.shape)
            self._v[name] = self._flat_v[off:off + n].reshape(arr.shape)
            off += n

    def flat_grads(self, grads: dict[str, np.ndarray]) -> np.ndarray:
        return np.concatenate([grads[name].ravel() for name in self._arrays])

    def __getitem__(self, name: str) -> np.ndarray:
        return self._arrays[name]

    def __contains__(self, name: str) -> bool:
        return name in self._arrays

    def __len__(self) -> int:
        return len(self._arrays)

    def names(self) -> list[str]:
        return list(self._arrays)

    def items(self) -> Iterator[tuple[str, np.ndarray]]:
        return iter(self._arrays.items())

    def leaves(self) -> dict[str, Tensor]:
        out = {}
        for name, arr in self._arrays.items():
            t = Tensor.__new__(Tensor)
            t.data = arr
            t.grad = None
            t.requires_grad = True
            t._parents = ()
            t._backward = None
            out[name] = t
        return out

    def grads_from(self, leaves: dict[str, Tensor]) -> dict[str, np.ndarray]:
        """Collect gradients after backward(); unreachable leaves give zeros."""
        out = {}
        for name, arr in self._arrays.items():
            leaf = leaves[name]
            out[name] = leaf.grad if leaf.grad is not None else np.zeros_like(arr)
        return out

    def snapshot(self) -> "ParamGroup":
        other = ParamGroup()
        for name, arr in self._arrays.items():
            other._arrays[name] = arr.copy()
            other._m[name] = self._m[name].copy()
            other._v[name] = self._v[name].copy()
        other.step_count = self.step_count
        if self._flat is not None:
            other.pack()
        return other

    def soft_update_from(self, source: "ParamGroup", rate: float) -> None:
        """self <- (1 - rate) * self + rate * source, parameter arrays only."""
        if (self._flat is not None and source._flat is not None
                and list(self._arrays) == list(source._arrays)):
            self._flat *= 1.0 - rate
            self._flat += rate * source._flat
            return
        for name, arr in self._arrays.items():
            arr *= 1.0 - rate
            arr += rate * source._arrays[name]


def adam_step(group: ParamGroup, grads: dict[str, np.ndarray], lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
    missing = [n for n in group.names() if n not in grads]
    if missing:
        raise KeyError(f"gradients missing for {missing}")
    group.step_count += 1
    t = group.step_count
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    # update = lr*(m/bc1)/(sqrt(v/bc2)+eps), refactored to cut temporaries
    step = lr * np.sqrt(bc2) / bc1
    eps_hat = eps * np.sqrt(bc2)

    def update(arr, m, v, g):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        denom = np.sqrt(v)
        denom += eps_hat
        np.divide(m, denom, out=denom)
        denom *= step
        arr -= denom

    if group._flat is not None:
        update(group._flat, group._flat_m, group._flat_v,
               group.flat_grads(grads))
        return
    for name, arr in group._arrays.items():
        update(arr, group._m[name], group._v[name], grads[name])


def global_norm(grads: dict[str, np.ndarray]) -> float:
    total = 0.0
    for g in grads.values():
        r = g.ravel()
        total += float(np.dot(r, r))
    return float(np.sqrt(total))


def clip_global_norm(grads: dict[str, np.ndarray], max_norm: float
                     ) -> tuple[dict[str, np.ndarray], float]:
    """Scale all gradients by min(1, max_norm / ||g||). Returns (grads, scale)."""
    norm = global_norm(grads)
    if norm <= max_norm or norm == 0.0:
        return grads, 1.0
    s = max_norm / norm
    return {k: g * s for k, g in grads.items()}, s


def save_checkpoint(path, group: ParamGroup) -> None:
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC)
        fh.write(struct.pack("<I", CKPT_VERSION))
        for name, arr in group.items():
            nb = name.encode("utf-8")
            fh.write(struct.pack("<I", len(nb)))
            fh.write(nb)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(np.asarray(arr, dtype="<f8").tobytes(order="C"))


def load_checkpoint(path) -> ParamGroup:
    group = ParamGroup()
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:8] != CKPT_MAGIC:
        raise ValueError("bad checkpoint magic")
    (version,) = struct.unpack_from("<I", blob, 8)
    if version != CKPT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    off = 12
    while off < len(blob):
        (nlen,) = struct.unpack_from("<I", blob, off)
        off += 4
        name = blob[off:off + nlen].decode("utf-8")
        off += nlen
        (rank,) = struct.unpack_from("<I", blob, off)
        off += 4
        dims = struct.unpack_from(f"<{rank}I", blob, off)
        off += 4 * rank
        count = 1
        for d in dims:
            count *= d
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=off).reshape(dims)
        off += 8 * count
        group.add(name, arr)
    return group
