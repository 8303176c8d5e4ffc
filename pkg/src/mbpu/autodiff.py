"""Dense float64 tensors with tape-based reverse-mode differentiation.

A :class:`Tape` records every operation whose inputs live on it.  Tensors
without a tape are plain constants and operations on them are not recorded,
so the same model code runs with or without gradient tracking.

There is no implicit broadcasting.  Elementwise binary ops require equal
shapes; use :func:`broadcast` to tile along a new axis.

Subgradient conventions: ``relu'(0) = 0``, ``abs'(0) = 0``, ``norm'(0) = 0``
and ``max`` routes the gradient to the first argmax.  Non-smooth ops also
record which branch they took; :meth:`Tape.signature` hashes those records
and :func:`finite_diff_check` uses it to skip coordinates near a kink.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np


class ShapeError(ValueError):
    pass


class TapeError(RuntimeError):
    pass


class Tensor:
    __slots__ = ("data", "tape", "slot")
    __array_priority__ = 1000

    def __init__(self, data, tape: "Tape | None" = None, slot: int | None = None):
        arr = np.array(data, dtype=np.float64) if not isinstance(data, np.ndarray) else data
        if arr.dtype != np.float64:
            arr = arr.astype(np.float64)
        self.data = arr
        self.tape = tape
        self.slot = slot

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else _bad_item(self.shape)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        tag = "" if self.tape is None else f", slot={self.slot}"
        return f"Tensor(shape={self.shape}{tag})"

    def __add__(self, other):
        return add(self, _lift(other, self))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, _lift(other, self))

    def __rsub__(self, other):
        return sub(_lift(other, self), self)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, other)
        return mul(self, _lift(other, self))

    def __rmul__(self, other):
        return self.__mul__(other)

    def __truediv__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, 1.0 / other)
        return div(self, _lift(other, self))

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    @property
    def T(self):
        return transpose(self)


def _bad_item(shape):
    raise ShapeError(f"item() needs a single-element tensor, got shape {shape}")


def _lift(x, like):
    if isinstance(x, Tensor):
        return x
    if isinstance(x, (int, float)):
        return Tensor(np.full(like.shape, float(x)))
    return Tensor(x)


def tensor(data) -> Tensor:
    return Tensor(np.asarray(data, dtype=np.float64))


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else tensor(x)


# ---------------------------------------------------------------------------
# tape


@dataclass
class _Node:
    op: "Op"
    inputs: list  # per input: slot index or None for a constant
    consts: list  # constant arrays for inputs that are off-tape
    out: int
    attrs: dict
    ctx: Any


@dataclass
class Tape:
    """Append-only record of operations on tensors living on this tape."""

    values: list = field(default_factory=list)
    nodes: list = field(default_factory=list)
    leaves: list = field(default_factory=list)
    branches: list = field(default_factory=list)

    def variable(self, data) -> Tensor:
        arr = np.array(data, dtype=np.float64)
        slot = len(self.values)
        self.values.append(arr)
        self.leaves.append(slot)
        return Tensor(arr, self, slot)

    def watch(self, t: Tensor) -> Tensor:
        return self.variable(t.data if isinstance(t, Tensor) else t)

    def _record(self, op, tensors, attrs, out, ctx) -> Tensor:
        slot = len(self.values)
        self.values.append(out)
        ins = [t.slot if t.tape is self else None for t in tensors]
        consts = [None if t.tape is self else t.data for t in tensors]
        self.nodes.append(_Node(op, ins, consts, slot, attrs, ctx))
        br = op.branch(ctx, out)
        if br is not None:
            self.branches.append((op.name, np.ascontiguousarray(br)))
        return Tensor(out, self, slot)

    def _check_output(self, output):
        if not isinstance(output, Tensor) or output.tape is not self:
            raise TapeError("output is not recorded on this tape")
        if output.size != 1:
            raise ShapeError(f"backward needs a scalar output, got shape {output.shape}")

    def _backprop(self, output: Tensor) -> list:
        self._check_output(output)
        grads: list = [None] * len(self.values)
        grads[output.slot] = np.ones_like(self.values[output.slot])
        for node in reversed(self.nodes):
            g = grads[node.out]
            if g is None:
                continue
            xs = [self.values[s] if s is not None else c for s, c in zip(node.inputs, node.consts)]
            gin = node.op.backward(g, node.ctx, *xs, **node.attrs)
            for s, gi in zip(node.inputs, gin):
                if s is None or gi is None:
                    continue
                if grads[s] is None:
                    grads[s] = np.array(gi, dtype=np.float64)
                else:
                    grads[s] = grads[s] + gi
        return grads

    def backward(self, output: Tensor) -> dict:
        """Gradient of a scalar output for every leaf slot (zero if unreachable)."""
        grads = self._backprop(output)
        return {
            s: grads[s] if grads[s] is not None else np.zeros_like(self.values[s])
            for s in self.leaves
        }

    def gradient(self, output: Tensor, wrt: Sequence[Tensor]) -> list:
        grads = self._backprop(output)
        out = []
        for t in wrt:
            if t.tape is not self:
                raise TapeError("gradient requested for a tensor not on this tape")
            g = grads[t.slot]
            out.append(g if g is not None else np.zeros_like(t.data))
        return out

    def replay(self, overrides: dict | None = None) -> list:
        """Recompute every recorded value from the leaves (optionally replaced)."""
        vals = list(self.values)
        for s, v in (overrides or {}).items():
            vals[s] = np.array(v, dtype=np.float64)
        for node in self.nodes:
            xs = [vals[s] if s is not None else c for s, c in zip(node.inputs, node.consts)]
            vals[node.out], _ = node.op.forward(*xs, **node.attrs)
        return vals

    def signature(self) -> str:
        """Digest of every branch decision taken by non-smooth ops."""
        h = hashlib.sha1()
        for name, br in self.branches:
            h.update(name.encode())
            h.update(str(br.shape).encode())
            h.update(br.tobytes())
        return h.hexdigest()


def backward(tape: Tape, output: Tensor) -> dict:
    return tape.backward(output)


class Op:
    """An operation: ``forward(*arrays) -> (out, ctx)`` and its vector-Jacobian product."""

    name = "op"

    @staticmethod
    def forward(*xs, **attrs):
        raise NotImplementedError

    @staticmethod
    def backward(g, ctx, *xs, **attrs):
        raise NotImplementedError

    @staticmethod
    def branch(ctx, out):
        return None

    @classmethod
    def apply(cls, *tensors, **attrs) -> Tensor:
        tensors = [as_tensor(t) for t in tensors]
        tape = None
        for t in tensors:
            if t.tape is not None:
                if tape is not None and t.tape is not tape:
                    raise TapeError("inputs are recorded on different tapes")
                tape = t.tape
        out, ctx = cls.forward(*[t.data for t in tensors], **attrs)
        if tape is None:
            return Tensor(out)
        return tape._record(cls, tensors, attrs, out, ctx)


def _same_shape(name, a, b):
    if a.shape != b.shape:
        raise ShapeError(f"{name}: shape mismatch {a.shape} vs {b.shape}")


def _axis(axis, ndim, name):
    if axis is None:
        return None
    ax = axis + ndim if axis < 0 else axis
    if not 0 <= ax < ndim:
        raise ShapeError(f"{name}: axis {axis} out of range for {ndim}-d tensor")
    return ax


# ---------------------------------------------------------------------------
# elementwise binary


class Add(Op):
    name = "add"

    @staticmethod
    def forward(a, b):
        _same_shape("add", a, b)
        return a + b, None

    @staticmethod
    def backward(g, ctx, a, b):
        return g, g


class Sub(Op):
    name = "sub"

    @staticmethod
    def forward(a, b):
        _same_shape("sub", a, b)
        return a - b, None

    @staticmethod
    def backward(g, ctx, a, b):
        return g, -g


class Mul(Op):
    name = "mul"

    @staticmethod
    def forward(a, b):
        _same_shape("mul", a, b)
        return a * b, None

    @staticmethod
    def backward(g, ctx, a, b):
        return g * b, g * a


class Div(Op):
    name = "div"

    @staticmethod
    def forward(a, b):
        _same_shape("div", a, b)
        return a / b, None

    @staticmethod
    def backward(g, ctx, a, b):
        gb = g / b
        return gb, -gb * a / b


class Scale(Op):
    name = "scale"

    @staticmethod
    def forward(a, s):
        return a * s, None

    @staticmethod
    def backward(g, ctx, a, s):
        return (g * s,)


class AddScalar(Op):
    name = "add_scalar"

    @staticmethod
    def forward(a, s):
        return a + s, None

    @staticmethod
    def backward(g, ctx, a, s):
        return (g,)


def add(a, b) -> Tensor:
    return Add.apply(a, b)


def sub(a, b) -> Tensor:
    return Sub.apply(a, b)


def mul(a, b) -> Tensor:
    return Mul.apply(a, b)


def div(a, b) -> Tensor:
    return Div.apply(a, b)


def scale(a, s: float) -> Tensor:
    return Scale.apply(a, s=float(s))


def add_scalar(a, s: float) -> Tensor:
    return AddScalar.apply(a, s=float(s))


# ---------------------------------------------------------------------------
# elementwise unary


class Relu(Op):
    name = "relu"

    @staticmethod
    def forward(x):
        mask = x > 0
        return np.where(mask, x, 0.0), mask

    @staticmethod
    def backward(g, mask, x):
        return (g * mask,)

    @staticmethod
    def branch(mask, out):
        return mask


class Silu(Op):
    name = "silu"

    @staticmethod
    def forward(x):
        s = _sigmoid(x)
        return x * s, s

    @staticmethod
    def backward(g, s, x):
        return (g * (s * (1.0 + x * (1.0 - s))),)


class Softplus(Op):
    name = "softplus"

    @staticmethod
    def forward(x):
        return np.logaddexp(0.0, x), None

    @staticmethod
    def backward(g, ctx, x):
        return (g * _sigmoid(x),)


class Exp(Op):
    name = "exp"

    @staticmethod
    def forward(x):
        y = np.exp(x)
        return y, y

    @staticmethod
    def backward(g, y, x):
        return (g * y,)


class Square(Op):
    name = "square"

    @staticmethod
    def forward(x):
        return x * x, None

    @staticmethod
    def backward(g, ctx, x):
        return (2.0 * g * x,)


class Abs(Op):
    name = "abs"

    @staticmethod
    def forward(x):
        sign = np.sign(x)
        return np.abs(x), sign

    @staticmethod
    def backward(g, sign, x):
        return (g * sign,)

    @staticmethod
    def branch(sign, out):
        return sign.astype(np.int8)


class Reciprocal(Op):
    name = "reciprocal"

    @staticmethod
    def forward(x):
        y = 1.0 / x
        return y, y

    @staticmethod
    def backward(g, y, x):
        return (-g * y * y,)


class Sqrt(Op):
    name = "sqrt"

    @staticmethod
    def forward(x):
        if np.any(x <= 0):
            raise ValueError("sqrt: input must be strictly positive; use norm() for lengths")
        y = np.sqrt(x)
        return y, y

    @staticmethod
    def backward(g, y, x):
        return (0.5 * g / y,)


class ClampMin(Op):
    name = "clamp_min"

    @staticmethod
    def forward(x, lo):
        mask = x > lo
        return np.where(mask, x, lo), mask

    @staticmethod
    def backward(g, mask, x, lo):
        return (g * mask,)

    @staticmethod
    def branch(mask, out):
        return mask


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def relu(x) -> Tensor:
    return Relu.apply(x)


def silu(x) -> Tensor:
    return Silu.apply(x)


def softplus(x) -> Tensor:
    return Softplus.apply(x)


def exp(x) -> Tensor:
    return Exp.apply(x)


def square(x) -> Tensor:
    return Square.apply(x)


def absolute(x) -> Tensor:
    return Abs.apply(x)


def reciprocal(x) -> Tensor:
    return Reciprocal.apply(x)


def sqrt(x) -> Tensor:
    return Sqrt.apply(x)


def clamp_min(x, lo: float) -> Tensor:
    return ClampMin.apply(x, lo=float(lo))


# ---------------------------------------------------------------------------
# linear algebra and shape


class Matmul(Op):
    name = "matmul"

    @staticmethod
    def forward(a, b):
        if b.ndim != 2 or a.ndim < 2 or a.shape[-1] != b.shape[0]:
            raise ShapeError(f"matmul: shape mismatch {a.shape} vs {b.shape}")
        return a @ b, None

    @staticmethod
    def backward(g, ctx, a, b):
        ga = g @ b.T
        gb = a.reshape(-1, a.shape[-1]).T @ g.reshape(-1, g.shape[-1])
        return ga, gb


class Transpose(Op):
    name = "transpose"

    @staticmethod
    def forward(a, axes):
        if axes is not None and sorted(axes) != list(range(a.ndim)):
            raise ShapeError(f"transpose: bad axes {axes} for shape {a.shape}")
        return np.ascontiguousarray(np.transpose(a, axes)), None

    @staticmethod
    def backward(g, ctx, a, axes):
        inv = None if axes is None else np.argsort(axes)
        return (np.transpose(g, inv),)


class Reshape(Op):
    name = "reshape"

    @staticmethod
    def forward(a, shape):
        try:
            return a.reshape(shape), None
        except ValueError:
            raise ShapeError(f"reshape: cannot reshape {a.shape} to {shape}") from None

    @staticmethod
    def backward(g, ctx, a, shape):
        return (g.reshape(a.shape),)


class Concat(Op):
    name = "concat"

    @staticmethod
    def forward(*xs, axis):
        ax = _axis(axis, xs[0].ndim, "concat")
        for x in xs[1:]:
            if x.ndim != xs[0].ndim or any(
                x.shape[i] != xs[0].shape[i] for i in range(x.ndim) if i != ax
            ):
                raise ShapeError(f"concat: shape mismatch {xs[0].shape} vs {x.shape} on axis {axis}")
        return np.concatenate(xs, axis=ax), ax

    @staticmethod
    def backward(g, ax, *xs, axis):
        cuts = np.cumsum([x.shape[ax] for x in xs])[:-1]
        return tuple(np.split(g, cuts, axis=ax))


class Slice(Op):
    name = "slice"

    @staticmethod
    def forward(a, key):
        return np.ascontiguousarray(a[key]), None

    @staticmethod
    def backward(g, ctx, a, key):
        out = np.zeros_like(a)
        out[key] = g
        return (out,)


class Gather(Op):
    """Rows of ``a`` (axis 0) picked by an integer index array of any shape."""

    name = "gather"

    @staticmethod
    def forward(a, index):
        idx = np.asarray(index)
        if idx.size and (idx.min() < 0 or idx.max() >= a.shape[0]):
            raise IndexError(f"gather: index out of range for {a.shape[0]} rows")
        return a[idx], None

    @staticmethod
    def backward(g, ctx, a, index):
        out = np.zeros_like(a)
        np.add.at(out, np.asarray(index).reshape(-1), g.reshape((-1,) + a.shape[1:]))
        return (out,)


class Broadcast(Op):
    name = "broadcast"

    @staticmethod
    def forward(a, axis, n):
        ax = _axis(axis, a.ndim + 1, "broadcast")
        out = np.repeat(np.expand_dims(a, ax), n, axis=ax)
        return out, ax

    @staticmethod
    def backward(g, ax, a, axis, n):
        return (g.sum(axis=ax),)


def matmul(a, b) -> Tensor:
    return Matmul.apply(a, b)


def transpose(a, axes=None) -> Tensor:
    return Transpose.apply(a, axes=None if axes is None else tuple(axes))


def reshape(a, shape) -> Tensor:
    return Reshape.apply(a, shape=tuple(shape))


def concat(xs: Sequence, axis: int = -1) -> Tensor:
    return Concat.apply(*xs, axis=axis)


def slice_(a, key) -> Tensor:
    return Slice.apply(a, key=key)


def gather(a, index) -> Tensor:
    return Gather.apply(a, index=np.asarray(index, dtype=np.int64))


def broadcast(a, axis: int, n: int) -> Tensor:
    """Insert a new axis at ``axis`` and repeat ``a`` ``n`` times along it."""
    return Broadcast.apply(a, axis=axis, n=int(n))


# ---------------------------------------------------------------------------
# reductions


class Sum(Op):
    name = "sum"

    @staticmethod
    def forward(a, axis):
        ax = _axis(axis, a.ndim, "sum")
        return np.asarray(a.sum(axis=ax)), ax

    @staticmethod
    def backward(g, ax, a, axis):
        if ax is None:
            return (np.full(a.shape, float(g)),)
        return (np.broadcast_to(np.expand_dims(g, ax), a.shape).copy(),)


class Mean(Op):
    name = "mean"

    @staticmethod
    def forward(a, axis):
        ax = _axis(axis, a.ndim, "mean")
        n = a.size if ax is None else a.shape[ax]
        return np.asarray(a.mean(axis=ax)), (ax, n)

    @staticmethod
    def backward(g, ctx, a, axis):
        ax, n = ctx
        if ax is None:
            return (np.full(a.shape, float(g) / n),)
        return (np.broadcast_to(np.expand_dims(g / n, ax), a.shape).copy(),)


class Max(Op):
    name = "max"

    @staticmethod
    def forward(a, axis):
        ax = _axis(axis, a.ndim, "max")
        if ax is None:
            i = np.asarray(np.argmax(a))
            return np.asarray(a.reshape(-1)[i]), (ax, i)
        i = np.argmax(a, axis=ax)
        return np.take_along_axis(a, np.expand_dims(i, ax), ax).squeeze(ax), (ax, i)

    @staticmethod
    def backward(g, ctx, a, axis):
        ax, i = ctx
        out = np.zeros_like(a)
        if ax is None:
            out.reshape(-1)[int(i)] = float(g)
        else:
            np.put_along_axis(out, np.expand_dims(i, ax), np.expand_dims(g, ax), ax)
        return (out,)

    @staticmethod
    def branch(ctx, out):
        return ctx[1]


class Norm(Op):
    """Euclidean length along ``axis``; zero vectors get a zero subgradient."""

    name = "norm"

    @staticmethod
    def forward(a, axis):
        ax = _axis(axis, a.ndim, "norm")
        n = np.sqrt((a * a).sum(axis=ax))
        return n, ax

    @staticmethod
    def backward(g, ax, a, axis):
        n = np.sqrt((a * a).sum(axis=ax, keepdims=True))
        safe = np.where(n > 0, n, 1.0)
        return (np.where(n > 0, a / safe, 0.0) * np.expand_dims(g, ax),)


def sum_(a, axis: int | None = None) -> Tensor:
    return Sum.apply(a, axis=axis)


def mean(a, axis: int | None = None) -> Tensor:
    return Mean.apply(a, axis=axis)


def max_(a, axis: int | None = None) -> Tensor:
    return Max.apply(a, axis=axis)


def norm(a, axis: int = -1) -> Tensor:
    return Norm.apply(a, axis=axis)


# ---------------------------------------------------------------------------
# layers


class LayerNorm(Op):
    """Normalize over the last axis, then apply per-channel gain and bias."""

    name = "layer_norm"

    @staticmethod
    def forward(x, gain, bias, eps):
        c = x.shape[-1]
        if gain.shape != (c,) or bias.shape != (c,):
            raise ShapeError(f"layer_norm: gain/bias {gain.shape}/{bias.shape} vs input {x.shape}")
        mu = x.mean(axis=-1, keepdims=True)
        xc = x - mu
        inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
        xhat = xc * inv
        return xhat * gain + bias, (xhat, inv)

    @staticmethod
    def backward(g, ctx, x, gain, bias, eps):
        xhat, inv = ctx
        lead = tuple(range(g.ndim - 1))
        ggain = (g * xhat).sum(axis=lead)
        gbias = g.sum(axis=lead)
        gx_hat = g * gain
        gx = inv * (
            gx_hat
            - gx_hat.mean(axis=-1, keepdims=True)
            - xhat * (gx_hat * xhat).mean(axis=-1, keepdims=True)
        )
        return gx, ggain, gbias


class DepthwiseConv1d(Op):
    """Per-channel 1D convolution along axis 0 of an ``(n, c)`` input, "same" zero padding.

    ``y[t, c] = sum_j w[c, j] * x[t + j - left, c]`` with ``left = (K - 1) // 2``.
    """

    name = "dwconv1d"

    @staticmethod
    def forward(x, w):
        n, c = x.shape
        if w.ndim != 2 or w.shape[0] != c:
            raise ShapeError(f"dwconv1d: kernel {w.shape} vs input {x.shape}")
        k = w.shape[1]
        left = (k - 1) // 2
        xp = np.zeros((n + k - 1, c))
        xp[left : left + n] = x
        y = np.zeros_like(x)
        for j in range(k):
            y += xp[j : j + n] * w[:, j]
        return y, left

    @staticmethod
    def backward(g, left, x, w):
        n, c = x.shape
        k = w.shape[1]
        xp = np.zeros((n + k - 1, c))
        xp[left : left + n] = x
        gxp = np.zeros_like(xp)
        gw = np.empty_like(w)
        for j in range(k):
            gw[:, j] = (g * xp[j : j + n]).sum(axis=0)
            gxp[j : j + n] += g * w[:, j]
        return gxp[left : left + n], gw


def layer_norm(x, gain, bias, eps: float = 1e-5) -> Tensor:
    return LayerNorm.apply(x, gain, bias, eps=float(eps))


def dwconv1d(x, w) -> Tensor:
    return DepthwiseConv1d.apply(x, w)


def bias_add(x, bias) -> Tensor:
    """Add a per-channel (last axis) bias, tiled explicitly over leading axes."""
    x = as_tensor(x)
    b = bias
    for ax in range(x.ndim - 1):
        b = broadcast(b, ax, x.shape[ax])
    return add(x, b)


def linear(x, weight, bias=None) -> Tensor:
    """``x @ weight + bias`` for ``x`` of shape ``(..., in)``."""
    y = matmul(x, weight)
    return y if bias is None else bias_add(y, bias)


# ---------------------------------------------------------------------------
# gradient checking


def finite_diff_check(
    f: Callable[[Tensor], Tensor],
    x,
    h: float = 1e-6,
    coords: Sequence[int] | None = None,
    kink_radius: float = 10.0,
    return_skipped: bool = False,
):
    """Max relative error between the taped gradient of ``f`` and central differences.

    Error per coordinate is ``|analytic - fd| / max(1e-8, |fd|)``.  A coordinate
    is skipped when moving it by ``kink_radius * h`` in either direction flips
    any branch decision of a non-smooth op (ReLU, max, abs, truncation).
    """
    x0 = np.array(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
    tape = Tape()
    xv = tape.variable(x0)
    out = f(xv)
    if not np.all(np.isfinite(out.data)):
        raise FloatingPointError("function value is not finite at x")
    (grad,) = tape.gradient(out, [xv])
    sig0 = tape.signature()

    flat = x0.reshape(-1)
    idx = range(flat.size) if coords is None else coords
    worst = 0.0
    skipped = []
    for i in idx:
        if _near_kink(f, x0, i, kink_radius * h, sig0):
            skipped.append(i)
            continue
        fp = _eval(f, x0, i, h)
        fm = _eval(f, x0, i, -h)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise FloatingPointError(f"non-finite evaluation at coordinate {i}")
        fd = (fp - fm) / (2 * h)
        err = abs(grad.reshape(-1)[i] - fd) / max(1e-8, abs(fd))
        worst = max(worst, err)
    return (worst, skipped) if return_skipped else worst


def _eval(f, x0, i, step):
    xs = x0.copy()
    xs.reshape(-1)[i] += step
    return float(f(Tensor(xs)).data)


def _near_kink(f, x0, i, radius, sig0):
    for step in (radius, -radius):
        xs = x0.copy()
        xs.reshape(-1)[i] += step
        t = Tape()
        f(t.variable(xs))
        if t.signature() != sig0:
            return True
    return False
