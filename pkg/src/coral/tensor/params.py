"""Named parameter collections, initialization, and the Adam optimizer."""

from __future__ import annotations

import numpy as np

from ..errors import NonFiniteValue, ShapeMismatch
from .autodiff import Tensor


def orthogonal(shape: tuple[int, int], gain: float, rng: np.random.Generator, dtype=np.float32) -> np.ndarray:
    """Orthogonal initialization (rows or columns orthonormal, scaled by gain)."""
    rows, cols = shape
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q *= np.sign(np.diag(r))  # make the decomposition unique
    if rows < cols:
        q = q.T
    return (gain * q[:rows, :cols]).astype(dtype)


class ParamStore:
    """Ordered map name -> parameter tensor, plus Adam moments per parameter.

    One store holds everything trainable for a single agent. The step counter
    increments once per adam_step call and feeds bias correction.
    """

    def __init__(self, dtype=np.float32):
        self.dtype = np.dtype(dtype)
        self._tensors: dict[str, Tensor] = {}
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.step_count = 0

    def add(self, name: str, array: np.ndarray) -> Tensor:
        if name in self._tensors:
            raise ValueError(f"duplicate parameter {name!r}")
        t = Tensor(np.ascontiguousarray(array, dtype=self.dtype), requires_grad=True)
        self._tensors[name] = t
        self.m[name] = np.zeros_like(t.data)
        self.v[name] = np.zeros_like(t.data)
        return t

    def add_dense(self, name: str, fan_in: int, fan_out: int, gain: float, rng: np.random.Generator) -> None:
        """Add `{name}.w` (orthogonal, gain-scaled) and `{name}.b` (zeros)."""
        self.add(f"{name}.w", orthogonal((fan_in, fan_out), gain, rng, self.dtype))
        self.add(f"{name}.b", np.zeros(fan_out, dtype=self.dtype))

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def names(self) -> list[str]:
        return list(self._tensors)

    def items(self):
        return self._tensors.items()

    def n_params(self) -> int:
        return sum(t.data.size for t in self._tensors.values())

    def zero_grad(self) -> None:
        for t in self._tensors.values():
            t.grad = None

    def grads(self) -> dict[str, np.ndarray]:
        """Collected gradients; parameters not touched by the loss get zeros."""
        return {
            name: (t.grad if t.grad is not None else np.zeros_like(t.data))
            for name, t in self._tensors.items()
        }

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: t.data for name, t in self._tensors.items()}

    def constants(self) -> dict[str, Tensor]:
        """Gradient-free views of every parameter (for frozen-weight forwards)."""
        return {name: Tensor(t.data) for name, t in self._tensors.items()}

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for name, arr in arrays.items():
            t = self._tensors[name]
            if t.data.shape != arr.shape:
                raise ShapeMismatch(f"{name}: expected {t.data.shape}, got {arr.shape}")
            t.data = np.ascontiguousarray(arr, dtype=self.dtype)

    def as_float64(self) -> "ParamStore":
        """Copy of the store in float64 (gradient-check mode)."""
        out = ParamStore(dtype=np.float64)
        for name, t in self._tensors.items():
            out.add(name, t.data.astype(np.float64))
        return out


def clip_global_norm(grads: dict[str, np.ndarray], max_norm: float = 0.5) -> tuple[dict[str, np.ndarray], float]:
    """Rescale the whole gradient set if its joint L2 norm exceeds max_norm.

    Idempotent; all-zero gradients pass through untouched. Returns the
    (possibly scaled) gradients and the pre-clip norm.
    """
    sq = 0.0
    for g in grads.values():
        sq += float(np.dot(g.ravel(), g.ravel()))
    norm = float(np.sqrt(sq))
    if norm > max_norm and norm > 0.0:
        scale = max_norm / norm
        for name in grads:
            grads[name] = grads[name] * scale
    return grads, norm


def adam_step(
    store: ParamStore,
    grads: dict[str, np.ndarray],
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> ParamStore:
    """One bias-corrected Adam update, in place. Raises on non-finite input."""
    store.step_count += 1
    t = store.step_count
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    for name, param in store._tensors.items():
        g = grads[name]
        if g.shape != param.data.shape:
            raise ShapeMismatch(f"{name}: grad {g.shape} vs param {param.data.shape}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteValue(f"non-finite gradient for {name}")
        m = store.m[name]
        v = store.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        param.data = param.data - lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
    return store


def lr_schedule(update_index: int, total_updates: int, base_lr: float = 2.5e-4) -> float:
    """Linear decay from base_lr to base_lr/total_updates over the run."""
    if not 0 <= update_index < total_updates:
        raise ValueError(f"update_index {update_index} outside [0, {total_updates})")
    return base_lr * (1.0 - update_index / total_updates)
