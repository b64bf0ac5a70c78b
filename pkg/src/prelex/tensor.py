"""Dense float64 tensors (rank 0-2) with taped reverse-mode gradients.

Every operation records a backward closure on the output node; calling
``backward()`` on a scalar result propagates gradients to every node with
``requires_grad``. Numerically hazardous functions (sigmoid, softmax,
cross-entropy) use overflow-safe formulations so finite inputs always give
finite outputs.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np


class NumericError(RuntimeError):
    """A computation produced a non-finite value."""


class Tensor:
    """A numpy float64 array plus gradient bookkeeping.

    Rank 0 is allowed only as the result of reductions (losses); data fed
    in from outside is rank 1 or 2.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim > 2:
            raise ValueError(f"tensors are rank 0-2, got shape {arr.shape}")
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self._parents: tuple = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError("item() requires a single-element tensor")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)

    def backward(self):
        """Reverse-mode pass from a scalar output."""
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar output")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        # iterative DFS: LSTM tapes get deep enough to overflow recursion
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            # every topo node is an ancestor of the loss, so a requires_grad
            # node has always received its gradient by the time it fires
            if node.requires_grad and node._backward is not None and node.grad is not None:
                node._backward()

    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __mul__(self, other: "Tensor") -> "Tensor":
        return mul(self, other)


def _node(data: np.ndarray, parents: Sequence[Tensor]) -> Tensor:
    needs_grad = False
    for p in parents:
        if p.requires_grad:
            needs_grad = True
            break
    out = Tensor.__new__(Tensor)
    out.data = np.asarray(data, dtype=np.float64)
    out.grad = None
    out.requires_grad = needs_grad
    out._parents = tuple(parents)
    out._backward = None
    return out


def _accum(t: Tensor, g) -> None:
    if t.requires_grad:
        if t.grad is None:
            t.grad = np.zeros_like(t.data)
        t.grad += g


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ValueError(f"add shape mismatch: {a.data.shape} vs {b.data.shape}")
    out = _node(a.data + b.data, (a, b))

    def backward():
        _accum(a, out.grad)
        _accum(b, out.grad)

    out._backward = backward
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product of same-shape tensors."""
    if a.data.shape != b.data.shape:
        raise ValueError(f"mul shape mismatch: {a.data.shape} vs {b.data.shape}")
    out = _node(a.data * b.data, (a, b))

    def backward():
        _accum(a, out.grad * b.data)
        _accum(b, out.grad * a.data)

    out._backward = backward
    return out


def scale(a: Tensor, s: float) -> Tensor:
    """Multiply by a plain (non-learned) scalar."""
    out = _node(a.data * s, (a,))

    def backward():
        _accum(a, out.grad * s)

    out._backward = backward
    return out


def add_scalar(x: Tensor, b: Tensor) -> Tensor:
    """Broadcast-add a single-element tensor to every entry of x."""
    if b.data.size != 1:
        raise ValueError("add_scalar needs a single-element bias tensor")
    out = _node(x.data + b.data.reshape(-1)[0], (x, b))

    def backward():
        _accum(x, out.grad)
        _accum(b, np.full_like(b.data, out.grad.sum()))

    out._backward = backward
    return out


def add_rows(m: Tensor, v: Tensor) -> Tensor:
    """Add a length-m vector to every row of an (n, m) matrix."""
    if m.data.ndim != 2 or v.data.ndim != 1 or m.data.shape[1] != v.data.shape[0]:
        raise ValueError(f"add_rows shape mismatch: {m.data.shape} vs {v.data.shape}")
    out = _node(m.data + v.data[None, :], (m, v))

    def backward():
        _accum(m, out.grad)
        _accum(v, out.grad.sum(axis=0))

    out._backward = backward
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.data.shape} @ {b.data.shape}")
    out = _node(a.data @ b.data, (a, b))

    def backward():
        if a.requires_grad:
            _accum(a, out.grad @ b.data.T)
        if b.requires_grad:
            _accum(b, a.data.T @ out.grad)

    out._backward = backward
    return out


def matvec(a: Tensor, x: Tensor) -> Tensor:
    if a.data.ndim != 2 or x.data.ndim != 1 or a.data.shape[1] != x.data.shape[0]:
        raise ValueError(f"matvec shape mismatch: {a.data.shape} @ {x.data.shape}")
    out = _node(a.data @ x.data, (a, x))

    def backward():
        _accum(a, np.outer(out.grad, x.data))
        _accum(x, a.data.T @ out.grad)

    out._backward = backward
    return out


def vecmat(x: Tensor, a: Tensor) -> Tensor:
    if x.data.ndim != 1 or a.data.ndim != 2 or x.data.shape[0] != a.data.shape[0]:
        raise ValueError(f"vecmat shape mismatch: {x.data.shape} @ {a.data.shape}")
    out = _node(x.data @ a.data, (x, a))

    def backward():
        _accum(x, a.data @ out.grad)
        _accum(a, np.outer(x.data, out.grad))

    out._backward = backward
    return out


def rowdot(m: Tensor, v: Tensor) -> Tensor:
    """Per-row dot product of an (n, l) matrix with a length-l vector.

    Semantically matvec, but the forward pass evaluates np.dot row by row,
    so a given row's score is bit-identical no matter which matrix it sits
    in. Used where scores must be reproducible per word.
    """
    if m.data.ndim != 2 or v.data.ndim != 1 or m.data.shape[1] != v.data.shape[0]:
        raise ValueError(f"rowdot shape mismatch: {m.data.shape} vs {v.data.shape}")
    z = np.empty(m.data.shape[0], dtype=np.float64)
    for i in range(m.data.shape[0]):
        z[i] = np.dot(m.data[i], v.data)
    out = _node(z, (m, v))

    def backward():
        _accum(m, np.outer(out.grad, v.data))
        _accum(v, m.data.T @ out.grad)

    out._backward = backward
    return out


def row(m: Tensor, i: int) -> Tensor:
    """Extract row i of a 2-D tensor as a 1-D tensor."""
    if m.data.ndim != 2:
        raise ValueError("row expects a 2-D input")
    if not 0 <= i < m.data.shape[0]:
        raise ValueError(f"row {i} out of range for {m.data.shape[0]} rows")
    out = _node(m.data[i].copy(), (m,))

    def backward():
        if m.requires_grad:
            if m.grad is None:
                m.grad = np.zeros_like(m.data)
            m.grad[i] += out.grad

    out._backward = backward
    return out


def scale_rows(m: Tensor, w: Tensor) -> Tensor:
    """Scale row i of an (n, l) matrix by w[i]."""
    if m.data.ndim != 2 or w.data.ndim != 1 or m.data.shape[0] != w.data.shape[0]:
        raise ValueError(f"scale_rows shape mismatch: {m.data.shape} vs {w.data.shape}")
    out = _node(m.data * w.data[:, None], (m, w))

    def backward():
        _accum(m, out.grad * w.data[:, None])
        _accum(w, (out.grad * m.data).sum(axis=1))

    out._backward = backward
    return out


def dot(x: Tensor, y: Tensor) -> Tensor:
    if x.data.ndim != 1 or y.data.ndim != 1 or x.data.shape != y.data.shape:
        raise ValueError(f"dot shape mismatch: {x.data.shape} vs {y.data.shape}")
    out = _node(np.dot(x.data, y.data), (x, y))

    def backward():
        _accum(x, out.grad * y.data)
        _accum(y, out.grad * x.data)

    out._backward = backward
    return out


_BELOW_ONE = np.nextafter(1.0, 0.0)
_ABOVE_ZERO = np.nextafter(0.0, 1.0)


def _sigmoid_stable(x: np.ndarray) -> np.ndarray:
    # exp of -|x| never overflows; clamp to the nearest representable
    # doubles inside (0, 1) so saturation never rounds out of the open
    # interval. sigmoid(0) stays exactly 0.5.
    e = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return np.clip(out, _ABOVE_ZERO, _BELOW_ONE)


def sigmoid(x: Tensor) -> Tensor:
    s = _sigmoid_stable(np.atleast_1d(x.data)).reshape(x.data.shape)
    out = _node(s, (x,))

    def backward():
        _accum(x, out.grad * s * (1.0 - s))

    out._backward = backward
    return out


def tanh(x: Tensor) -> Tensor:
    t = np.tanh(x.data)
    out = _node(t, (x,))

    def backward():
        _accum(x, out.grad * (1.0 - t * t))

    out._backward = backward
    return out


def relu(x: Tensor) -> Tensor:
    out = _node(np.maximum(x.data, 0.0), (x,))

    def backward():
        _accum(x, out.grad * (x.data > 0.0))

    out._backward = backward
    return out


def softmax(x: Tensor) -> Tensor:
    """Probability vector over a 1-D input, max-subtracted for safety."""
    if x.data.ndim != 1 or x.data.shape[0] == 0:
        raise ValueError("softmax requires a non-empty 1-D input")
    shifted = x.data - x.data.max()
    e = np.exp(shifted)
    p = e / e.sum()
    out = _node(p, (x,))

    def backward():
        g = out.grad
        _accum(x, p * (g - np.dot(p, g)))

    out._backward = backward
    return out


def masked_softmax(x: Tensor, keep: np.ndarray) -> Tensor:
    """Softmax restricted to positions where ``keep`` is True; rest get 0."""
    if x.data.ndim != 1 or x.data.shape[0] != len(keep):
        raise ValueError("masked_softmax needs a 1-D input matching the mask")
    keep = np.asarray(keep, dtype=bool)
    if not keep.any():
        raise RuntimeError("masked_softmax: every position is masked out")
    p = np.zeros_like(x.data)
    sub = x.data[keep]
    e = np.exp(sub - sub.max())
    p[keep] = e / e.sum()
    out = _node(p, (x,))

    def backward():
        g = out.grad
        inner = np.dot(p[keep], g[keep])
        gx = np.zeros_like(x.data)
        gx[keep] = p[keep] * (g[keep] - inner)
        _accum(x, gx)

    out._backward = backward
    return out


def concat(parts: Iterable[Tensor]) -> Tensor:
    parts = list(parts)
    if not parts:
        raise ValueError("concat of no tensors")
    for p in parts:
        if p.data.ndim != 1:
            raise ValueError("concat joins 1-D tensors only")
    out = _node(np.concatenate([p.data for p in parts]), parts)
    offsets = np.cumsum([0] + [p.data.shape[0] for p in parts])

    def backward():
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            _accum(p, out.grad[lo:hi])

    out._backward = backward
    return out


def stack_cols(cols: Sequence[Tensor]) -> Tensor:
    """Stack length-m vectors as the columns of an (m, n) matrix."""
    cols = list(cols)
    if not cols:
        raise ValueError("stack_cols of no tensors")
    m = cols[0].data.shape[0]
    for c in cols:
        if c.data.ndim != 1 or c.data.shape[0] != m:
            raise ValueError("stack_cols needs equal-length 1-D tensors")
    out = _node(np.stack([c.data for c in cols], axis=1), cols)

    def backward():
        for j, c in enumerate(cols):
            _accum(c, out.grad[:, j])

    out._backward = backward
    return out


def segment(x: Tensor, lo: int, hi: int) -> Tensor:
    """Contiguous slice [lo, hi) of a 1-D tensor."""
    if x.data.ndim != 1 or not 0 <= lo < hi <= x.data.shape[0]:
        raise ValueError(f"segment [{lo}, {hi}) invalid for shape {x.data.shape}")
    out = _node(x.data[lo:hi].copy(), (x,))

    def backward():
        if x.requires_grad:
            if x.grad is None:
                x.grad = np.zeros_like(x.data)
            x.grad[lo:hi] += out.grad

    out._backward = backward
    return out


def concat_rows(mats: Sequence[Tensor]) -> Tensor:
    """Stack 2-D tensors vertically."""
    mats = list(mats)
    if not mats:
        raise ValueError("concat_rows of no tensors")
    cols = mats[0].data.shape[1] if mats[0].data.ndim == 2 else -1
    for m in mats:
        if m.data.ndim != 2 or m.data.shape[1] != cols:
            raise ValueError("concat_rows needs 2-D tensors with equal column counts")
    out = _node(np.concatenate([m.data for m in mats], axis=0), mats)
    offsets = np.cumsum([0] + [m.data.shape[0] for m in mats])

    def backward():
        for m, lo, hi in zip(mats, offsets[:-1], offsets[1:]):
            _accum(m, out.grad[lo:hi])

    out._backward = backward
    return out


def col_slice(m: Tensor, lo: int, hi: int) -> Tensor:
    """Contiguous column range [lo, hi) of a 2-D tensor."""
    if m.data.ndim != 2 or not 0 <= lo < hi <= m.data.shape[1]:
        raise ValueError(f"col_slice [{lo}, {hi}) invalid for shape {m.data.shape}")
    out = _node(m.data[:, lo:hi].copy(), (m,))

    def backward():
        if m.requires_grad:
            if m.grad is None:
                m.grad = np.zeros_like(m.data)
            m.grad[:, lo:hi] += out.grad

    out._backward = backward
    return out


def transpose(m: Tensor) -> Tensor:
    if m.data.ndim != 2:
        raise ValueError("transpose expects a 2-D input")
    out = _node(m.data.T.copy(), (m,))

    def backward():
        _accum(m, out.grad.T)

    out._backward = backward
    return out


def windows(u: Tensor, h: int) -> Tensor:
    """Row-concatenated sliding windows: (n, l) -> (n-h+1, h*l)."""
    if u.data.ndim != 2:
        raise ValueError("windows expects a 2-D input")
    n, l = u.data.shape
    if h < 1 or h > n:
        raise ValueError(f"window size {h} invalid for {n} rows")
    w = np.empty((n - h + 1, h * l), dtype=np.float64)
    for j in range(h):
        w[:, j * l:(j + 1) * l] = u.data[j:j + n - h + 1]
    out = _node(w, (u,))

    def backward():
        if not u.requires_grad:
            return
        gu = np.zeros_like(u.data)
        for j in range(h):
            gu[j:j + n - h + 1] += out.grad[:, j * l:(j + 1) * l]
        _accum(u, gu)

    out._backward = backward
    return out


def pad_rows(u: Tensor, total: int) -> Tensor:
    """Right-pad a (n, l) matrix with zero rows up to ``total`` rows."""
    if u.data.ndim != 2:
        raise ValueError("pad_rows expects a 2-D input")
    n, l = u.data.shape
    if total < n:
        raise ValueError(f"cannot pad {n} rows down to {total}")
    if total == n:
        return u
    padded = np.zeros((total, l), dtype=np.float64)
    padded[:n] = u.data
    out = _node(padded, (u,))

    def backward():
        _accum(u, out.grad[:n])

    out._backward = backward
    return out


def colmax(m: Tensor) -> Tensor:
    """Per-column maximum; gradient flows to the first argmax of each column."""
    if m.data.ndim != 2 or m.data.shape[0] == 0:
        raise ValueError("colmax expects a non-empty 2-D input")
    idx = m.data.argmax(axis=0)  # np.argmax returns the first maximum
    out = _node(m.data[idx, np.arange(m.data.shape[1])], (m,))

    def backward():
        gm = np.zeros_like(m.data)
        gm[idx, np.arange(m.data.shape[1])] = out.grad
        _accum(m, gm)

    out._backward = backward
    return out


def vec_max(x: Tensor) -> Tensor:
    """Maximum of a 1-D tensor; gradient goes to the first argmax only."""
    if x.data.ndim != 1 or x.data.shape[0] == 0:
        raise ValueError("vec_max expects a non-empty 1-D input")
    i = int(x.data.argmax())
    out = _node(np.float64(x.data[i]), (x,))

    def backward():
        gx = np.zeros_like(x.data)
        gx[i] = out.grad
        _accum(x, gx)

    out._backward = backward
    return out


def tsum(x: Tensor) -> Tensor:
    out = _node(np.float64(x.data.sum()), (x,))

    def backward():
        _accum(x, np.full_like(x.data, out.grad))

    out._backward = backward
    return out


def mean(x: Tensor) -> Tensor:
    if x.data.size == 0:
        raise ValueError("mean of an empty tensor")
    return scale(tsum(x), 1.0 / x.data.size)


def sumsq(x: Tensor) -> Tensor:
    """Sum of squared entries."""
    out = _node(np.float64((x.data * x.data).sum()), (x,))

    def backward():
        _accum(x, 2.0 * out.grad * x.data)

    out._backward = backward
    return out


def cross_entropy(logits: Tensor, label: int) -> Tensor:
    """Negative log softmax probability of ``label``, computed in log space."""
    if logits.data.ndim != 1:
        raise ValueError("cross_entropy expects 1-D logits")
    c = logits.data.shape[0]
    if not 0 <= label < c:
        raise ValueError(f"label {label} out of range for {c} classes")
    m = logits.data.max()
    lse = m + np.log(np.exp(logits.data - m).sum())
    out = _node(np.float64(lse - logits.data[label]), (logits,))

    def backward():
        p = np.exp(logits.data - lse)
        p[label] -= 1.0
        _accum(logits, out.grad * p)

    out._backward = backward
    return out
