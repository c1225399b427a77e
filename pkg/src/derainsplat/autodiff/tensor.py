"""Dense float64 tensors with reverse-mode automatic differentiation.

Every op records its inputs and a gradient closure; ``Tensor.backward``
replays the closures in exact reverse execution order (ops carry a
monotonically increasing id).  Values are always float64 and shapes are
strict: binary ops accept equal shapes or a scalar, nothing in between —
use :func:`expand` when a broadcast is intended.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy import special as _special

_op_counter = itertools.count()

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_grad_fn", "_id",
                 "_backward_done")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = ()
        self._grad_fn = None
        self._id = next(_op_counter)
        self._backward_done = False

    # -- introspection -------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"

    # -- grad plumbing ---------------------------------------------------

    def zero_grad(self):
        self.grad = None

    def accumulate_grad(self, g: np.ndarray):
        if not self.requires_grad and self._grad_fn is None:
            return
        if self.grad is None:
            # copy: producers may hand the same buffer to several parents
            self.grad = np.array(g, dtype=np.float64)
        else:
            self.grad += g

    def backward(self, grad=None):
        """Run reverse-mode accumulation from this tensor.

        The recorded op sequence is single-use: a second backward from the
        same root is rejected.
        """
        if self._backward_done:
            raise RuntimeError("backward was already run from this tensor; "
                               "the recorded op sequence is single-use")
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without an explicit gradient "
                                 "requires a scalar tensor")
            grad = np.ones_like(self.data)
        else:
            grad = np.asarray(grad, dtype=np.float64)
            if grad.shape != self.data.shape:
                raise ValueError(f"seed gradient shape {grad.shape} != tensor "
                                 f"shape {self.data.shape}")
        self._backward_done = True

        nodes = []
        seen = set()
        stack = [self]
        while stack:
            node = stack.pop()
            if id(node) in seen:
                continue
            seen.add(id(node))
            nodes.append(node)
            stack.extend(node._parents)

        self.accumulate_grad(grad)
        # Descending creation id == exact reverse execution order; parents
        # always predate the ops that consume them.
        nodes.sort(key=lambda n: n._id, reverse=True)
        for node in nodes:
            if node._grad_fn is not None and node.grad is not None:
                node._grad_fn(node.grad)

    # -- operators -------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, n):
        return power(self, n)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return take(self, idx)

    # method conveniences
    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes if axes else None)


def astensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents, grad_fn) -> Tensor:
    """Create an op output; the graph edge is dropped when no parent needs it."""
    out = Tensor(data)
    if any(p.requires_grad or p._grad_fn is not None for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._grad_fn = grad_fn
    return out


def _check_same_shape(a: Tensor, b: Tensor, opname: str):
    if a.data.shape != b.data.shape and a.data.ndim != 0 and b.data.ndim != 0:
        raise ValueError(f"{opname}: shape mismatch {a.data.shape} vs "
                         f"{b.data.shape} (only scalar broadcasting is "
                         "supported; use expand() for anything else)")


def _reduce_to(g: np.ndarray, shape) -> np.ndarray:
    """Sum a gradient down to ``shape`` (scalar or identical shape only)."""
    if g.shape == tuple(shape):
        return g
    return np.sum(g).reshape(shape) if len(shape) == 0 else g.sum().reshape(shape)


# -- arithmetic ------------------------------------------------------------

def add(a, b):
    a, b = astensor(a), astensor(b)
    _check_same_shape(a, b, "add")
    data = a.data + b.data

    def grad_fn(g):
        a.accumulate_grad(_reduce_to(g, a.data.shape))
        b.accumulate_grad(_reduce_to(g, b.data.shape))

    return _make(data, (a, b), grad_fn)


def sub(a, b):
    a, b = astensor(a), astensor(b)
    _check_same_shape(a, b, "sub")
    data = a.data - b.data

    def grad_fn(g):
        a.accumulate_grad(_reduce_to(g, a.data.shape))
        b.accumulate_grad(_reduce_to(-g, b.data.shape))

    return _make(data, (a, b), grad_fn)


def mul(a, b):
    a, b = astensor(a), astensor(b)
    _check_same_shape(a, b, "mul")
    data = a.data * b.data

    def grad_fn(g):
        a.accumulate_grad(_reduce_to(g * b.data, a.data.shape))
        b.accumulate_grad(_reduce_to(g * a.data, b.data.shape))

    return _make(data, (a, b), grad_fn)


def div(a, b):
    a, b = astensor(a), astensor(b)
    _check_same_shape(a, b, "div")
    if np.any(b.data == 0.0):
        raise ValueError("div: zero denominator")
    data = a.data / b.data

    def grad_fn(g):
        a.accumulate_grad(_reduce_to(g / b.data, a.data.shape))
        b.accumulate_grad(_reduce_to(-g * data / b.data, b.data.shape))

    return _make(data, (a, b), grad_fn)


def neg(a):
    a = astensor(a)

    def grad_fn(g):
        a.accumulate_grad(-g)

    return _make(-a.data, (a,), grad_fn)


def power(a, n):
    a = astensor(a)
    if not isinstance(n, (int, float)):
        raise TypeError("power: exponent must be a Python scalar")
    if n != int(n) and np.any(a.data < 0):
        raise ValueError("power: negative base with non-integer exponent")
    data = a.data ** n

    def grad_fn(g):
        a.accumulate_grad(g * n * a.data ** (n - 1))

    return _make(data, (a,), grad_fn)


def texp(a):
    a = astensor(a)
    data = np.exp(a.data)

    def grad_fn(g):
        a.accumulate_grad(g * data)

    return _make(data, (a,), grad_fn)


def tlog(a):
    a = astensor(a)
    if np.any(a.data <= 0.0):
        raise ValueError("log: input must be strictly positive")

    def grad_fn(g):
        a.accumulate_grad(g / a.data)

    return _make(np.log(a.data), (a,), grad_fn)


def tsqrt(a):
    a = astensor(a)
    if np.any(a.data < 0.0):
        raise ValueError("sqrt: negative input")
    data = np.sqrt(a.data)

    def grad_fn(g):
        a.accumulate_grad(g * 0.5 / np.maximum(data, 1e-300))

    return _make(data, (a,), grad_fn)


def tabs(a):
    a = astensor(a)

    def grad_fn(g):
        a.accumulate_grad(g * np.sign(a.data))

    return _make(np.abs(a.data), (a,), grad_fn)


def tsin(a):
    a = astensor(a)

    def grad_fn(g):
        a.accumulate_grad(g * np.cos(a.data))

    return _make(np.sin(a.data), (a,), grad_fn)


def tcos(a):
    a = astensor(a)

    def grad_fn(g):
        a.accumulate_grad(-g * np.sin(a.data))

    return _make(np.cos(a.data), (a,), grad_fn)


def clamp(a, lo, hi):
    a = astensor(a)
    data = np.clip(a.data, lo, hi)
    passthrough = (a.data >= lo) & (a.data <= hi)

    def grad_fn(g):
        a.accumulate_grad(g * passthrough)

    return _make(data, (a,), grad_fn)


# -- activations ------------------------------------------------------------

def sigmoid(a):
    a = astensor(a)
    x = a.data
    data = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                    np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))

    def grad_fn(g):
        a.accumulate_grad(g * data * (1.0 - data))

    return _make(data, (a,), grad_fn)


def relu(a):
    a = astensor(a)

    def grad_fn(g):
        a.accumulate_grad(g * (a.data > 0))

    return _make(np.maximum(a.data, 0.0), (a,), grad_fn)


def gelu(a):
    """Exact (erf-based) GELU."""
    a = astensor(a)
    x = a.data
    cdf = 0.5 * (1.0 + _special.erf(x * _INV_SQRT2))
    data = x * cdf

    def grad_fn(g):
        pdf = _INV_SQRT2PI * np.exp(-0.5 * x * x)
        a.accumulate_grad(g * (cdf + x * pdf))

    return _make(data, (a,), grad_fn)


def softmax(a, axis=-1):
    a = astensor(a)
    data = a.data - np.max(a.data, axis=axis, keepdims=True)
    np.exp(data, out=data)
    data /= np.sum(data, axis=axis, keepdims=True)

    def grad_fn(g):
        dot = np.einsum("...i,...i->...", g, data)[..., None] \
            if axis in (-1, a.data.ndim - 1) \
            else np.sum(g * data, axis=axis, keepdims=True)
        a.accumulate_grad(data * (g - dot))

    return _make(data, (a,), grad_fn)


# -- reductions --------------------------------------------------------------

def tsum(a, axis=None, keepdims=False):
    a = astensor(a)
    data = np.sum(a.data, axis=axis, keepdims=keepdims)

    def grad_fn(g):
        if axis is None:
            gg = g.reshape((1,) * a.data.ndim)
        elif keepdims:
            gg = g
        else:
            gg = np.expand_dims(g, axis)
        a.accumulate_grad(np.broadcast_to(gg, a.data.shape).copy())

    return _make(np.asarray(data), (a,), grad_fn)


def tmean(a, axis=None, keepdims=False):
    a = astensor(a)
    if axis is None:
        count = a.data.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        count = 1
        for ax in axes:
            count *= a.data.shape[ax]
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def l1(a):
    """Sum of absolute values."""
    return tsum(tabs(a))


def l2(a):
    """Euclidean norm."""
    return tsqrt(tsum(mul(a, a)))


# -- shape ops ---------------------------------------------------------------

def reshape(a, shape):
    a = astensor(a)
    old = a.data.shape

    def grad_fn(g):
        a.accumulate_grad(g.reshape(old))

    return _make(a.data.reshape(shape), (a,), grad_fn)


def transpose(a, axes=None):
    a = astensor(a)
    if axes is None:
        axes = tuple(reversed(range(a.data.ndim)))
    inv = np.argsort(axes)

    def grad_fn(g):
        a.accumulate_grad(g.transpose(inv))

    return _make(a.data.transpose(axes).copy(), (a,), grad_fn)


def expand(a, shape):
    """Explicit broadcast of size-1 (or missing leading) axes to ``shape``."""
    a = astensor(a)
    shape = tuple(shape)
    data = np.broadcast_to(a.data, shape).copy()
    src = a.data.shape
    lead = len(shape) - len(src)
    if lead < 0:
        raise ValueError(f"expand: cannot expand {src} to smaller rank {shape}")
    reduce_axes = tuple(range(lead)) + tuple(
        lead + i for i, s in enumerate(src) if s == 1 and shape[lead + i] != 1)

    def grad_fn(g):
        gg = g.sum(axis=reduce_axes, keepdims=True) if reduce_axes else g
        a.accumulate_grad(gg.reshape(src))

    return _make(data, (a,), grad_fn)


def take(a, idx):
    """Basic slicing or integer-array gather; scatter-add on backward."""
    a = astensor(a)
    data = a.data[idx]
    if not isinstance(data, np.ndarray):
        data = np.asarray(data)

    def grad_fn(g):
        buf = np.zeros_like(a.data)
        np.add.at(buf, idx, g)
        a.accumulate_grad(buf)

    return _make(data.copy(), (a,), grad_fn)


def concat(tensors, axis=0):
    tensors = [astensor(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def grad_fn(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(lo, hi)
            t.accumulate_grad(g[tuple(sl)])

    return _make(data, tuple(tensors), grad_fn)


def stack(tensors, axis=0):
    tensors = [astensor(t) for t in tensors]
    data = np.stack([t.data for t in tensors], axis=axis)

    def grad_fn(g):
        for i, t in enumerate(tensors):
            t.accumulate_grad(np.take(g, i, axis=axis))

    return _make(data, tuple(tensors), grad_fn)


# -- linear algebra ----------------------------------------------------------

def matmul(a, b):
    a, b = astensor(a), astensor(b)
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise ValueError("matmul: both operands must be at least 2-D")
    if a.data.ndim != b.data.ndim or a.data.shape[:-2] != b.data.shape[:-2]:
        raise ValueError(f"matmul: batch dims must match exactly, got "
                         f"{a.data.shape} @ {b.data.shape}")
    data = a.data @ b.data

    def grad_fn(g):
        a.accumulate_grad(g @ b.data.swapaxes(-1, -2))
        b.accumulate_grad(a.data.swapaxes(-1, -2) @ g)

    return _make(data, (a, b), grad_fn)


# -- normalization -----------------------------------------------------------

def layer_norm(x, gamma, beta, eps=1e-5):
    """Normalize over the last axis and apply a per-element affine."""
    x, gamma, beta = astensor(x), astensor(gamma), astensor(beta)
    n = x.data.shape[-1]
    if gamma.data.shape != (n,) or beta.data.shape != (n,):
        raise ValueError(f"layer_norm: affine params must have shape ({n},)")
    mu = x.data.mean(axis=-1, keepdims=True)
    var = ((x.data - mu) ** 2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    data = xhat * gamma.data + beta.data

    def grad_fn(g):
        gxhat = g * gamma.data
        m1 = gxhat.mean(axis=-1, keepdims=True)
        m2 = (gxhat * xhat).mean(axis=-1, keepdims=True)
        x.accumulate_grad((gxhat - m1 - xhat * m2) * inv)
        lead = tuple(range(g.ndim - 1))
        gamma.accumulate_grad((g * xhat).sum(axis=lead))
        beta.accumulate_grad(g.sum(axis=lead))

    return _make(data, (x, gamma, beta), grad_fn)


def global_avg_pool(x):
    """(C,H,W) -> (C,1,1) spatial mean."""
    x = astensor(x)
    if x.data.ndim != 3:
        raise ValueError("global_avg_pool expects (C,H,W)")
    return tmean(x, axis=(1, 2), keepdims=True)
