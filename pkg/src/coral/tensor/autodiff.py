"""Reverse-mode automatic differentiation on dense numpy arrays.

Covers exactly the layers the two agents need: dense algebra, tanh/sigmoid,
layer norm, softmax/log-softmax, multi-head self-attention (fused op with a
hand-derived backward), plus the reductions and clipping the losses use.

Gradients are accumulated by walking the tape in reverse topological order.
A module-level ``no_grad`` switch turns tape construction off for rollout
forward passes, where only values are needed.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np

from ..errors import NonFiniteValue, ShapeMismatch

_grad_enabled = True
_debug_checks = False


def set_debug_checks(enabled: bool) -> None:
    """Toggle per-op finiteness checking (on in tests, off in hot loops)."""
    global _debug_checks
    _debug_checks = bool(enabled)


@contextlib.contextmanager
def no_grad():
    """Disable tape construction inside the context (inference fast path)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    """A dense array plus an optional gradient buffer and backward closure."""

    __slots__ = ("data", "grad", "requires_grad", "_backward", "_parents")

    def __init__(self, data: np.ndarray, requires_grad: bool = False):
        self.data = data
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad and _grad_enabled
        self._backward: Callable[[np.ndarray], None] | None = None
        self._parents: tuple[Tensor, ...] = ()

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def item(self) -> float:
        return float(self.data)

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = g.copy() if isinstance(g, np.ndarray) else np.asarray(g)
        else:
            self.grad += g

    def backward(self) -> None:
        """Backpropagate from this scalar through the recorded tape."""
        if self.data.size != 1:
            raise ShapeMismatch("backward() requires a scalar output")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # Operator sugar; all arithmetic goes through the module-level ops.
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, mul(other, -1.0) if isinstance(other, Tensor) else -other)

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, grad={self.requires_grad})"


def tensor(data, requires_grad: bool = False, dtype=None) -> Tensor:
    arr = np.asarray(data, dtype=dtype)
    if not isinstance(arr, np.ndarray) or arr.dtype.kind != "f":
        arr = arr.astype(np.float32 if dtype is None else dtype)
    return Tensor(arr, requires_grad=requires_grad)


def _check_finite(arr: np.ndarray, opname: str) -> None:
    if _debug_checks and not np.all(np.isfinite(arr)):
        raise NonFiniteValue(f"non-finite value produced by {opname}")


def _make(data: np.ndarray, parents: Sequence[Tensor], backward, opname: str) -> Tensor:
    _check_finite(data, opname)
    needs = _grad_enabled and any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=needs)
    if needs:
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum gradient over axes that numpy broadcasting expanded."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _coerce(x, like: Tensor) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=like.data.dtype))


# ---------------------------------------------------------------------------
# Elementwise and linear algebra primitives
# ---------------------------------------------------------------------------


def add(a: Tensor, b) -> Tensor:
    b = _coerce(b, a)
    out = a.data + b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g, b.data.shape))

    return _make(out, (a, b), backward, "add")


def mul(a: Tensor, b) -> Tensor:
    b = _coerce(b, a)
    out = a.data * b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g * a.data, b.data.shape))

    return _make(out, (a, b), backward, "mul")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """``a @ b`` for 2-D ``b``; ``a`` may be 2-D or 3-D (leading batch dims)."""
    if b.data.ndim != 2:
        raise ShapeMismatch(f"matmul rhs must be 2-D, got {b.data.shape}")
    if a.data.shape[-1] != b.data.shape[0]:
        raise ShapeMismatch(f"matmul shapes {a.data.shape} x {b.data.shape}")
    a2 = a.data.reshape(-1, a.data.shape[-1])
    out = (a2 @ b.data).reshape(*a.data.shape[:-1], b.data.shape[1])

    def backward(g):
        g2 = g.reshape(-1, g.shape[-1])
        if a.requires_grad:
            a.accumulate_grad((g2 @ b.data.T).reshape(a.data.shape))
        if b.requires_grad:
            b.accumulate_grad(a2.T @ g2)

    return _make(out, (a, b), backward, "matmul")


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(g * (1.0 - out * out))

    return _make(out, (x,), backward, "tanh")


def sigmoid(x: Tensor) -> Tensor:
    out = np.empty_like(x.data)
    pos = x.data >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x.data[pos]))
    ex = np.exp(x.data[~pos])
    out[~pos] = ex / (1.0 + ex)

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(g * out * (1.0 - out))

    return _make(out, (x,), backward, "sigmoid")


def log(x: Tensor) -> Tensor:
    out = np.log(x.data)

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(g / x.data)

    return _make(out, (x,), backward, "log")


def square(x: Tensor) -> Tensor:
    out = x.data * x.data

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(g * 2.0 * x.data)

    return _make(out, (x,), backward, "square")


def exp(x: Tensor) -> Tensor:
    out = np.exp(x.data)

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(g * out)

    return _make(out, (x,), backward, "exp")


def clip(x: Tensor, lo: float, hi: float) -> Tensor:
    out = np.clip(x.data, lo, hi)
    inside = (x.data > lo) & (x.data < hi)

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(g * inside)

    return _make(out, (x,), backward, "clip")


def minimum(a: Tensor, b: Tensor) -> Tensor:
    take_a = a.data <= b.data
    out = np.where(take_a, a.data, b.data)

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g * take_a, a.data.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g * ~take_a, b.data.shape))

    return _make(out, (a, b), backward, "minimum")


def maximum(a: Tensor, b: Tensor) -> Tensor:
    take_a = a.data >= b.data
    out = np.where(take_a, a.data, b.data)

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g * take_a, a.data.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g * ~take_a, b.data.shape))

    return _make(out, (a, b), backward, "maximum")


def sum_(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if x.requires_grad:
            if axis is None:
                x.accumulate_grad(np.broadcast_to(g, x.data.shape).copy())
            else:
                ge = g if keepdims else np.expand_dims(g, axis)
                x.accumulate_grad(np.broadcast_to(ge, x.data.shape).copy())

    return _make(np.asarray(out), (x,), backward, "sum")


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    n = x.data.size if axis is None else x.data.shape[axis]
    return mul(sum_(x, axis=axis, keepdims=keepdims), 1.0 / n)


def concat(parts: Iterable[Tensor], axis: int = -1) -> Tensor:
    parts = list(parts)
    out = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        pieces = np.split(g, splits, axis=axis)
        for p, gp in zip(parts, pieces):
            if p.requires_grad:
                p.accumulate_grad(gp)

    return _make(out, tuple(parts), backward, "concat")


def select_last(x: Tensor) -> Tensor:
    """Take the last row along the sequence axis: (B, L, D) -> (B, D)."""
    out = x.data[:, -1, :].copy()

    def backward(g):
        if x.requires_grad:
            gx = np.zeros_like(x.data)
            gx[:, -1, :] = g
            x.accumulate_grad(gx)

    return _make(out, (x,), backward, "select_last")


def stack_rows(x: Tensor, batch: int, length: int) -> Tensor:
    """Reshape (batch*length, D) -> (batch, length, D)."""
    out = x.data.reshape(batch, length, -1)

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(g.reshape(x.data.shape))

    return _make(out, (x,), backward, "stack_rows")


def gather_rows(x: Tensor, idx: np.ndarray) -> Tensor:
    """Pick one column per row: (B, A), idx (B,) -> (B,)."""
    rows = np.arange(x.data.shape[0])
    out = x.data[rows, idx]

    def backward(g):
        if x.requires_grad:
            gx = np.zeros_like(x.data)
            gx[rows, idx] = g
            x.accumulate_grad(gx)

    return _make(out, (x,), backward, "gather_rows")


# ---------------------------------------------------------------------------
# Fused normalization / attention ops (hand-derived backwards)
# ---------------------------------------------------------------------------


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        if x.requires_grad:
            dot = (g * out).sum(axis=axis, keepdims=True)
            x.accumulate_grad(out * (g - dot))

    return _make(out, (x,), backward, "softmax")


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - lse
    p = np.exp(out)

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(g - p * g.sum(axis=axis, keepdims=True))

    return _make(out, (x,), backward, "log_softmax")


def layer_norm(x: Tensor, gain: Tensor, shift: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then scale+shift."""
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gain.data + shift.data

    def backward(g):
        if gain.requires_grad:
            gain.accumulate_grad((g * xhat).reshape(-1, x.data.shape[-1]).sum(axis=0))
        if shift.requires_grad:
            shift.accumulate_grad(g.reshape(-1, x.data.shape[-1]).sum(axis=0))
        if x.requires_grad:
            dxhat = g * gain.data
            m1 = dxhat.mean(axis=-1, keepdims=True)
            m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
            x.accumulate_grad(inv * (dxhat - m1 - xhat * m2))

    return _make(out, (x, gain, shift), backward, "layer_norm")


def multi_head_self_attention(
    x: Tensor,
    num_heads: int,
    wq: Tensor,
    bq: Tensor,
    wk: Tensor,
    bk: Tensor,
    wv: Tensor,
    bv: Tensor,
    wo: Tensor,
    bo: Tensor,
) -> Tensor:
    """Full (non-causal) multi-head self-attention over (B, L, D).

    Every token attends to every other; output is the projected mix plus
    bias, shape (B, L, D). Forward and backward are fused for speed.
    """
    B, L, D = x.data.shape
    if D % num_heads:
        raise ShapeMismatch(f"heads {num_heads} must divide model dim {D}")
    hd = D // num_heads
    scale = 1.0 / np.sqrt(hd)

    x2 = x.data.reshape(B * L, D)
    q = (x2 @ wq.data + bq.data).reshape(B, L, num_heads, hd).transpose(0, 2, 1, 3)
    k = (x2 @ wk.data + bk.data).reshape(B, L, num_heads, hd).transpose(0, 2, 1, 3)
    v = (x2 @ wv.data + bv.data).reshape(B, L, num_heads, hd).transpose(0, 2, 1, 3)
    scores = (q @ k.transpose(0, 1, 3, 2)) * scale
    scores -= scores.max(axis=-1, keepdims=True)
    p = np.exp(scores)
    p /= p.sum(axis=-1, keepdims=True)
    mixed = (p @ v).transpose(0, 2, 1, 3).reshape(B * L, D)
    out = (mixed @ wo.data + bo.data).reshape(B, L, D)

    def backward(g):
        g2 = g.reshape(B * L, D)
        if wo.requires_grad:
            wo.accumulate_grad(mixed.T @ g2)
        if bo.requires_grad:
            bo.accumulate_grad(g2.sum(axis=0))
        dmixed = (g2 @ wo.data.T).reshape(B, L, num_heads, hd).transpose(0, 2, 1, 3)
        dp = dmixed @ v.transpose(0, 1, 3, 2)
        dv = p.transpose(0, 1, 3, 2) @ dmixed
        ds = p * (dp - (dp * p).sum(axis=-1, keepdims=True))
        dq = (ds @ k) * scale
        dk = (ds.transpose(0, 1, 3, 2) @ q) * scale
        dq2 = dq.transpose(0, 2, 1, 3).reshape(B * L, D)
        dk2 = dk.transpose(0, 2, 1, 3).reshape(B * L, D)
        dv2 = dv.transpose(0, 2, 1, 3).reshape(B * L, D)
        for w, b, dproj in ((wq, bq, dq2), (wk, bk, dk2), (wv, bv, dv2)):
            if w.requires_grad:
                w.accumulate_grad(x2.T @ dproj)
            if b.requires_grad:
                b.accumulate_grad(dproj.sum(axis=0))
        if x.requires_grad:
            dx = dq2 @ wq.data.T + dk2 @ wk.data.T + dv2 @ wv.data.T
            x.accumulate_grad(dx.reshape(B, L, D))

    return _make(out, (x, wq, bq, wk, bk, wv, bv, wo, bo), backward, "mhsa")
