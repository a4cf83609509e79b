"""Dense float64 tensors with tape-based reverse-mode autodiff and Adam.

Every forward operation that touches a tensor requiring gradients records
itself on the implicit tape (parent links plus a backward closure), so one
forward pass defines the graph and :func:`backward` replays it in reverse
topological order. Only the operations the denoising network needs exist
here: broadcast arithmetic, matmul, the 3x3 convolution (dispatched to the
compiled or numpy kernel backend), row softmax, reductions, and
:func:`from_linear_op` for linear operators with hand-written adjoints.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ContractError, DimensionError

_GRAD_ENABLED = True


@contextmanager
def no_grad():
    """Disable tape recording inside the context (used by finite differencing)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False):
        self.data = np.ascontiguousarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # -- operator sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, _lift(other))

    def __radd__(self, other):
        return add(_lift(other), self)

    def __sub__(self, other):
        return sub(self, _lift(other))

    def __rsub__(self, other):
        return sub(_lift(other), self)

    def __mul__(self, other):
        return mul(self, _lift(other))

    def __rmul__(self, other):
        return mul(_lift(other), self)

    def __truediv__(self, other):
        return div(self, _lift(other))

    def __neg__(self):
        return mul(self, _lift(-1.0))

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def backward(self):
        backward(self)

    def item(self):
        return float(self.data.reshape(-1)[0])


def _lift(x):
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _accum(t, g):
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64, copy=True)
    else:
        t.grad = t.grad + g


def _node(value, parents, backward_fn):
    out = Tensor(value)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def _unbroadcast(g, shape):
    """Sum a broadcast gradient back down to the original operand shape."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# -- elementwise ---------------------------------------------------------

def add(a, b):
    def back(g):
        _accum(a, _unbroadcast(g, a.shape))
        _accum(b, _unbroadcast(g, b.shape))

    return _node(a.data + b.data, (a, b), back)


def sub(a, b):
    def back(g):
        _accum(a, _unbroadcast(g, a.shape))
        _accum(b, _unbroadcast(-g, b.shape))

    return _node(a.data - b.data, (a, b), back)


def mul(a, b):
    def back(g):
        _accum(a, _unbroadcast(g * b.data, a.shape))
        _accum(b, _unbroadcast(g * a.data, b.shape))

    return _node(a.data * b.data, (a, b), back)


def div(a, b):
    def back(g):
        _accum(a, _unbroadcast(g / b.data, a.shape))
        _accum(b, _unbroadcast(-g * a.data / (b.data * b.data), b.shape))

    return _node(a.data / b.data, (a, b), back)


def power(a, p):
    """Elementwise a**p for a scalar exponent p."""
    if isinstance(p, Tensor):
        raise ContractError("power supports scalar exponents only")

    def back(g):
        _accum(a, g * p * a.data ** (p - 1))

    return _node(a.data**p, (a,), back)


def sqrt(a):
    val = np.sqrt(a.data)

    def back(g):
        _accum(a, g * (0.5 / val))

    return _node(val, (a,), back)


def absolute(a):
    def back(g):
        _accum(a, g * np.sign(a.data))

    return _node(np.abs(a.data), (a,), back)


def leaky_relu(a, slope=0.2):
    pos = a.data > 0

    def back(g):
        _accum(a, g * np.where(pos, 1.0, slope))

    return _node(np.where(pos, a.data, slope * a.data), (a,), back)


# -- linear algebra ------------------------------------------------------

def matmul(a, b):
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise DimensionError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul inner extents disagree: {a.shape} x {b.shape}")

    def back(g):
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)

    return _node(a.data @ b.data, (a, b), back)


def transpose(a):
    if a.data.ndim != 2:
        raise DimensionError(f"transpose expects a 2-D tensor, got {a.shape}")

    def back(g):
        _accum(a, g.T)

    return _node(a.data.T, (a,), back)


def reshape(a, shape):
    old = a.shape

    def back(g):
        _accum(a, g.reshape(old))

    return _node(a.data.reshape(shape), (a,), back)


def tsum(a, axis=None, keepdims=False):
    def back(g):
        if axis is None:
            _accum(a, np.broadcast_to(g, a.shape))
            return
        if not keepdims:
            g = np.expand_dims(g, axis)
        _accum(a, np.broadcast_to(g, a.shape))

    return _node(a.data.sum(axis=axis, keepdims=keepdims), (a,), back)


def tmean(a, axis=None, keepdims=False):
    if axis is None:
        count = a.size
    else:
        ax = axis if isinstance(axis, tuple) else (axis,)
        count = 1
        for i in ax:
            count *= a.shape[i]
    return tsum(a, axis=axis, keepdims=keepdims) * (1.0 / count)


def softmax_rows(a):
    """Row-wise softmax of a 2-D tensor, stabilized by row-max subtraction."""
    if a.data.ndim != 2:
        raise DimensionError(f"softmax_rows expects a 2-D tensor, got {a.shape}")
    shifted = a.data - a.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=1, keepdims=True)

    def back(g):
        _accum(a, s * (g - (g * s).sum(axis=1, keepdims=True)))

    return _node(s, (a,), back)


def conv2d(x, k):
    """3x3 same-padding cross-correlation; input (cin,h,w), kernel (cout,cin,3,3)."""
    val = kernels.conv2d_forward(x.data, k.data)

    def back(g):
        if x.requires_grad:
            _accum(x, kernels.conv2d_grad_input(g, k.data))
        if k.requires_grad:
            _accum(k, kernels.conv2d_grad_kernel(x.data, g))

    return _node(val, (x, k), back)


def from_linear_op(value, inputs, grad_fns):
    """Record a custom node whose adjoints are supplied by ``grad_fns``.

    ``grad_fns[i]`` maps the output cotangent to the cotangent of
    ``inputs[i]``; used for Fourier-domain operators whose adjoint is
    cheaper to write by hand than to compose from primitives.
    """

    def back(g):
        for t, fn in zip(inputs, grad_fns):
            if t.requires_grad:
                _accum(t, fn(g))

    return _node(value, tuple(inputs), back)


# -- backward pass -------------------------------------------------------

def backward(loss, params=None):
    """Accumulate gradients of a scalar loss into every reachable tensor.

    Parameters listed in ``params`` that do not participate in the graph
    get an explicit zero gradient.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")

    topo = []
    visited = set()
    stack = [(loss, iter(loss._parents))]
    visited.add(id(loss))
    while stack:
        node, it = stack[-1]
        advanced = False
        for parent in it:
            if id(parent) not in visited and parent._backward is not None:
                visited.add(id(parent))
                stack.append((parent, iter(parent._parents)))
                advanced = True
                break
        if not advanced:
            topo.append(node)
            stack.pop()

    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)

    if params is not None:
        for p in params:
            if p.grad is None:
                p.grad = np.zeros_like(p.data)


def zero_grads(params):
    for p in params:
        p.grad = None


# -- optimizer -----------------------------------------------------------

@dataclass
class AdamState:
    """First/second-moment accumulators plus the step counter."""

    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0

    @classmethod
    def for_params(cls, params):
        return cls(
            m={name: np.zeros_like(p.data) for name, p in params.items()},
            v={name: np.zeros_like(p.data) for name, p in params.items()},
        )


def adam_step(params, grads, state, lr=0.002, betas=(0.9, 0.999), eps=1e-8):
    """One bias-corrected Adam update, in place on ``params``.

    ``params`` maps names to Tensors and ``grads`` maps the same names to
    arrays; the update is deterministic given identical inputs and state.
    """
    b1, b2 = betas
    state.step += 1
    t = state.step
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.data.shape:
            raise DimensionError(f"gradient shape {g.shape} != parameter shape {p.data.shape} for {name}")
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p.data -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return params, state


# -- gradient verification ------------------------------------------------

def finite_diff_check(f, params, eps=1e-5):
    """Compare autodiff gradients of ``f()`` against central differences.

    ``f`` recomputes the scalar loss from the current parameter values on
    every call. Returns the worst relative error
    ``|g_ad - g_fd| / max(|g_ad|, |g_fd|, 1e-8)`` over all coordinates.
    """
    zero_grads(params)
    loss = f()
    backward(loss, params)
    analytic = [p.grad.copy() for p in params]

    worst = 0.0
    with no_grad():
        for p, ga in zip(params, analytic):
            flat = p.data.reshape(-1)
            gflat = ga.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + eps
                fp = f().item()
                flat[i] = orig - eps
                fm = f().item()
                flat[i] = orig
                gfd = (fp - fm) / (2.0 * eps)
                err = abs(gflat[i] - gfd) / max(abs(gflat[i]), abs(gfd), 1e-8)
                if err > worst:
                    worst = err
    return worst
