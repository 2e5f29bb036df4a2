"""Tape-based reverse-mode autodiff over float64 numpy arrays.

A :class:`Tape` records one op per forward call; ``Tape.backward`` replays
the records in exact reverse order, accumulating gradients on the input
tensors.  Passing ``tape=None`` to any op runs the same forward math without
recording (inference mode).  A tape is single-owner: don't share one across
threads, but independent tapes are safe concurrently.

All arrays are float64.  Set ``SHEETSUGGEST_DEBUG_NUMERICS=1`` (or call
:func:`set_debug_numerics`) to assert every op output is finite.
"""

from __future__ import annotations

import os
from typing import Callable, Sequence

import numpy as np

_DEBUG_NUMERICS = os.environ.get("SHEETSUGGEST_DEBUG_NUMERICS", "") == "1"


def set_debug_numerics(enabled: bool) -> None:
    global _DEBUG_NUMERICS
    _DEBUG_NUMERICS = enabled


class TapeError(Exception):
    pass


class Tensor:
    """An array plus an accumulated gradient."""

    __slots__ = ("data", "grad", "name")

    def __init__(self, data, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.data.shape})"


class Tape:
    """Ordered op records; gradients flow through them back to front."""

    def __init__(self) -> None:
        self._records: list[tuple[Tensor, Callable[[np.ndarray], None]]] = []

    def __len__(self) -> int:
        return len(self._records)

    def record(self, out: Tensor, backward: Callable[[np.ndarray], None]) -> None:
        self._records.append((out, backward))

    def backward(self, loss: Tensor) -> None:
        """Seed d(loss)/d(loss) = 1 and push gradients back along the tape."""
        if not self._records:
            raise TapeError("backward called before any forward op was recorded")
        if loss.data.size != 1:
            raise TapeError(f"loss must be scalar, got shape {loss.data.shape}")
        loss.accumulate(np.ones_like(loss.data))
        for out, backward in reversed(self._records):
            if out.grad is not None:
                backward(out.grad)


def _finish(tape: Tape | None, out: Tensor, backward: Callable[[np.ndarray], None]) -> Tensor:
    if _DEBUG_NUMERICS and not np.all(np.isfinite(out.data)):
        raise FloatingPointError("non-finite values in op output")
    if tape is not None:
        tape.record(out, backward)
    return out


def _reduce_to(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Undo broadcasting: sum gradient down to the original operand shape."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------------------
# Arithmetic
# ---------------------------------------------------------------------------


def add(tape: Tape | None, a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data + b.data)

    def backward(g: np.ndarray) -> None:
        a.accumulate(_reduce_to(g, a.data.shape))
        b.accumulate(_reduce_to(g, b.data.shape))

    return _finish(tape, out, backward)


def sub(tape: Tape | None, a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data - b.data)

    def backward(g: np.ndarray) -> None:
        a.accumulate(_reduce_to(g, a.data.shape))
        b.accumulate(_reduce_to(-g, b.data.shape))

    return _finish(tape, out, backward)


def mul(tape: Tape | None, a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data * b.data)

    def backward(g: np.ndarray) -> None:
        a.accumulate(_reduce_to(g * b.data, a.data.shape))
        b.accumulate(_reduce_to(g * a.data, b.data.shape))

    return _finish(tape, out, backward)


def scale(tape: Tape | None, a: Tensor, k: float) -> Tensor:
    out = Tensor(a.data * k)

    def backward(g: np.ndarray) -> None:
        a.accumulate(g * k)

    return _finish(tape, out, backward)


def matmul(tape: Tape | None, a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise TapeError("matmul operands must have at least 2 dimensions")
    out = Tensor(np.matmul(a.data, b.data))

    def backward(g: np.ndarray) -> None:
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        a.accumulate(_reduce_to(ga, a.data.shape))
        b.accumulate(_reduce_to(gb, b.data.shape))

    return _finish(tape, out, backward)


# ---------------------------------------------------------------------------
# Shape ops
# ---------------------------------------------------------------------------


def concat(tape: Tape | None, tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis))
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g: np.ndarray) -> None:
        for t, piece in zip(tensors, np.split(g, splits, axis=axis)):
            t.accumulate(piece)

    return _finish(tape, out, backward)


def slice_t(tape: Tape | None, x: Tensor, key) -> Tensor:
    """Basic indexing only (ints/slices); gradient scatters back."""
    out = Tensor(x.data[key])

    def backward(g: np.ndarray) -> None:
        full = np.zeros_like(x.data)
        full[key] += g
        x.accumulate(full)

    return _finish(tape, out, backward)


def reshape(tape: Tape | None, x: Tensor, shape: tuple[int, ...]) -> Tensor:
    out = Tensor(x.data.reshape(shape))

    def backward(g: np.ndarray) -> None:
        x.accumulate(g.reshape(x.data.shape))

    return _finish(tape, out, backward)


def transpose(tape: Tape | None, x: Tensor, axes: tuple[int, ...]) -> Tensor:
    out = Tensor(np.transpose(x.data, axes))
    inverse = tuple(np.argsort(axes))

    def backward(g: np.ndarray) -> None:
        x.accumulate(np.transpose(g, inverse))

    return _finish(tape, out, backward)


def embedding_lookup(tape: Tape | None, table: Tensor, ids: np.ndarray) -> Tensor:
    ids = np.asarray(ids, dtype=np.int64)
    out = Tensor(table.data[ids])

    def backward(g: np.ndarray) -> None:
        if table.grad is None:
            table.grad = np.zeros_like(table.data)
        np.add.at(table.grad, ids, g)

    return _finish(tape, out, backward)


# ---------------------------------------------------------------------------
# Nonlinearities
# ---------------------------------------------------------------------------


def sigmoid(tape: Tape | None, x: Tensor) -> Tensor:
    y = 1.0 / (1.0 + np.exp(-x.data))
    out = Tensor(y)

    def backward(g: np.ndarray) -> None:
        x.accumulate(g * y * (1.0 - y))

    return _finish(tape, out, backward)


def tanh(tape: Tape | None, x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    out = Tensor(y)

    def backward(g: np.ndarray) -> None:
        x.accumulate(g * (1.0 - y * y))

    return _finish(tape, out, backward)


def relu(tape: Tape | None, x: Tensor) -> Tensor:
    y = np.maximum(x.data, 0.0)
    out = Tensor(y)

    def backward(g: np.ndarray) -> None:
        x.accumulate(g * (x.data > 0.0))

    return _finish(tape, out, backward)


_GELU_C = np.sqrt(2.0 / np.pi)


def gelu(tape: Tape | None, x: Tensor) -> Tensor:
    """Smooth tanh-form gelu; preferred where finite differences meet it."""
    u = _GELU_C * (x.data + 0.044715 * x.data**3)
    t = np.tanh(u)
    out = Tensor(0.5 * x.data * (1.0 + t))

    def backward(g: np.ndarray) -> None:
        du = _GELU_C * (1.0 + 3 * 0.044715 * x.data**2)
        local = 0.5 * (1.0 + t) + 0.5 * x.data * (1.0 - t * t) * du
        x.accumulate(g * local)

    return _finish(tape, out, backward)


def dropout(tape: Tape | None, x: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout; identity at rate 0 (and always at inference)."""
    if rate <= 0.0:
        return x
    if not 0.0 < rate < 1.0:
        raise TapeError(f"dropout rate must be in [0, 1), got {rate}")
    keep = (rng.random(x.data.shape) >= rate) / (1.0 - rate)
    out = Tensor(x.data * keep)

    def backward(g: np.ndarray) -> None:
        x.accumulate(g * keep)

    return _finish(tape, out, backward)


# ---------------------------------------------------------------------------
# Normalization / attention / loss
# ---------------------------------------------------------------------------


def layer_norm(tape: Tape | None, x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    mean = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mean) * inv
    out = Tensor(xhat * gamma.data + beta.data)

    def backward(g: np.ndarray) -> None:
        gy = g * gamma.data
        gamma.accumulate(_reduce_to(g * xhat, gamma.data.shape))
        beta.accumulate(_reduce_to(g, beta.data.shape))
        m1 = gy.mean(axis=-1, keepdims=True)
        m2 = (gy * xhat).mean(axis=-1, keepdims=True)
        x.accumulate((gy - m1 - xhat * m2) * inv)

    return _finish(tape, out, backward)


def masked_softmax(tape: Tape | None, x: Tensor, mask: np.ndarray | None, axis: int = -1) -> Tensor:
    """Softmax with hard zeros at masked positions.

    Rows with no valid entry come out all-zero (and pass no gradient), so an
    empty attention bank yields a zero context vector rather than NaN.
    """
    if mask is None:
        m = np.ones(x.data.shape, dtype=bool)
    else:
        m = np.broadcast_to(np.asarray(mask, dtype=bool), x.data.shape)
    neg = np.where(m, x.data, -np.inf)
    xmax = neg.max(axis=axis, keepdims=True)
    xmax = np.where(np.isfinite(xmax), xmax, 0.0)
    e = np.exp(np.where(m, x.data - xmax, -np.inf))
    e = np.where(m, e, 0.0)
    s = e.sum(axis=axis, keepdims=True)
    w = e / np.where(s == 0.0, 1.0, s)
    out = Tensor(w)

    def backward(g: np.ndarray) -> None:
        inner = (g * w).sum(axis=axis, keepdims=True)
        x.accumulate(w * (g - inner))

    return _finish(tape, out, backward)


def softmax(tape: Tape | None, x: Tensor, axis: int = -1) -> Tensor:
    return masked_softmax(tape, x, None, axis=axis)


def scaled_dot_attention(
    tape: Tape | None, q: Tensor, k: Tensor, v: Tensor, key_mask: np.ndarray | None
) -> Tensor:
    """softmax(q k^T / sqrt(d)) v with optional key masking.

    ``key_mask`` has one bool per key position and broadcasts over queries.
    """
    d = q.data.shape[-1]
    scores = scale(tape, matmul(tape, q, transpose(tape, k, _swap_last(k))), 1.0 / np.sqrt(d))
    mask = None if key_mask is None else np.asarray(key_mask, dtype=bool)[..., None, :]
    weights = masked_softmax(tape, scores, mask, axis=-1)
    return matmul(tape, weights, v)


def _swap_last(t: Tensor) -> tuple[int, ...]:
    axes = list(range(t.data.ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return tuple(axes)


def cross_entropy(
    tape: Tape | None, logits: Tensor, targets: np.ndarray, reduction: str = "mean"
) -> Tensor:
    """Cross entropy from raw logits [T, V] against int targets [T].

    d(loss)/d(logits) is (softmax - onehot), scaled by the reduction.
    """
    t = np.asarray(targets, dtype=np.int64)
    if logits.data.ndim != 2 or t.ndim != 1 or t.shape[0] != logits.data.shape[0]:
        raise TapeError("cross_entropy expects [T, V] logits and [T] targets")
    zmax = logits.data.max(axis=-1, keepdims=True)
    lse = zmax[:, 0] + np.log(np.exp(logits.data - zmax).sum(axis=-1))
    picked = logits.data[np.arange(t.shape[0]), t]
    losses = lse - picked
    if reduction == "mean":
        value, denom = losses.mean(), t.shape[0]
    elif reduction == "sum":
        value, denom = losses.sum(), 1
    else:
        raise TapeError(f"unknown reduction {reduction!r}")
    out = Tensor(value)

    def backward(g: np.ndarray) -> None:
        p = np.exp(logits.data - zmax)
        p /= p.sum(axis=-1, keepdims=True)
        p[np.arange(t.shape[0]), t] -= 1.0
        logits.accumulate(g * p / denom)

    return _finish(tape, out, backward)


# ---------------------------------------------------------------------------
# Convolutions over a full window axis
# ---------------------------------------------------------------------------


def conv_1xL(tape: Tape | None, x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Full-extent kernel over positions: [R, L, H] x [L, H, C] -> [R, 1, C]."""
    out = Tensor(np.einsum("rlh,lhc->rc", x.data, w.data)[:, None, :] + b.data)

    def backward(g: np.ndarray) -> None:
        g2 = g.sum(axis=1) if g.shape[1] == 1 else g[:, 0, :]
        x.accumulate(np.einsum("rc,lhc->rlh", g2, w.data))
        w.accumulate(np.einsum("rlh,rc->lhc", x.data, g2))
        b.accumulate(_reduce_to(g, b.data.shape))

    return _finish(tape, out, backward)


def conv_Kx1(tape: Tape | None, x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Full-extent kernel over rows: [R, L, H] x [R, H, C] -> [1, L, C]."""
    out = Tensor(np.einsum("rlh,rhc->lc", x.data, w.data)[None, :, :] + b.data)

    def backward(g: np.ndarray) -> None:
        g2 = g.sum(axis=0) if g.shape[0] == 1 else g[0]
        x.accumulate(np.einsum("lc,rhc->rlh", g2, w.data))
        w.accumulate(np.einsum("rlh,lc->rhc", x.data, g2))
        b.accumulate(_reduce_to(g, b.data.shape))

    return _finish(tape, out, backward)


# ---------------------------------------------------------------------------
# Recurrent cell
# ---------------------------------------------------------------------------


def lstm_step(
    tape: Tape | None, x: Tensor, h: Tensor, c: Tensor, w: Tensor, b: Tensor
) -> tuple[Tensor, Tensor]:
    """One LSTM step. x [1, E], h/c [1, H], w [E+H, 4H], b [4H] -> (h', c').

    Composed from primitive ops, so its backward needs no separate formula.
    """
    hidden = h.data.shape[-1]
    z = add(tape, matmul(tape, concat(tape, [x, h], axis=-1), w), b)
    i = sigmoid(tape, slice_t(tape, z, (slice(None), slice(0, hidden))))
    f = sigmoid(tape, slice_t(tape, z, (slice(None), slice(hidden, 2 * hidden))))
    g = tanh(tape, slice_t(tape, z, (slice(None), slice(2 * hidden, 3 * hidden))))
    o = sigmoid(tape, slice_t(tape, z, (slice(None), slice(3 * hidden, 4 * hidden))))
    c_next = add(tape, mul(tape, f, c), mul(tape, i, g))
    h_next = mul(tape, o, tanh(tape, c_next))
    return h_next, c_next
