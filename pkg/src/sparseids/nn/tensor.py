"""A small reverse-mode autodiff tensor over numpy float64 arrays.

Only the operations the SparseIDS networks and losses need are provided.
Each op records its parents and a closure mapping the output gradient to
parent gradients; :meth:`Tensor.backward` walks the graph in reverse
topological order and accumulates into leaf ``.grad`` arrays.
"""

from contextlib import contextmanager

import numpy as np

from .. import kernels

_GRAD_ENABLED = True


@contextmanager
def no_grad():
    """Disable graph recording inside the block."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def is_grad_enabled():
    return _GRAD_ENABLED


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None
        self.name = name

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"

    @property
    def shape(self):
        return self.data.shape

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data)

    def detach(self):
        """Same values, cut from the graph (contributes no gradient)."""
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    # arithmetic sugar
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

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def sum(self, axis=None):
        return tsum(self, axis)

    def backward(self):
        """Accumulate d(self)/d(leaf) into every reachable leaf's ``.grad``."""
        if self.data.size != 1:
            raise ValueError("backward() needs a scalar tensor")
        if self._backward is None:
            raise RuntimeError(
                "backward() called on a tensor without a recorded forward computation"
            )
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        grads = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for p, pg in zip(node._parents, node._backward(g)):
                if pg is None or not p.requires_grad:
                    continue
                key = id(p)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data, parents, backward):
    out = Tensor(data)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
    return out


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _result(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _result(
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
    )


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _result(
        a.data * b.data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    q = a.data / b.data
    return _result(
        q,
        (a, b),
        lambda g: (_unbroadcast(g / b.data, a.shape), _unbroadcast(-g * q / b.data, b.shape)),
    )


def square(a):
    return _result(a.data * a.data, (a,), lambda g: (2.0 * g * a.data,))


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _result(a.data @ b.data, (a, b), lambda g: (g @ b.data.T, a.data.T @ g))


def linear(x, w, b):
    """``x @ w + b`` for x (B, D), w (D, K), b (K,)."""
    return _result(
        x.data @ w.data + b.data,
        (x, w, b),
        lambda g: (g @ w.data.T, x.data.T @ g, g.sum(axis=0)),
    )


def tsum(a, axis=None):
    shape = a.shape

    def back(g):
        if axis is None:
            return (np.broadcast_to(g, shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

    return _result(a.data.sum(axis=axis), (a,), back)


def mean(a):
    n = a.data.size
    return _result(a.data.mean(), (a,), lambda g: (np.full(a.shape, g / n),))


def exp(a):
    e = np.exp(a.data)
    return _result(e, (a,), lambda g: (g * e,))


def log(a):
    return _result(np.log(a.data), (a,), lambda g: (g / a.data,))


def sigmoid_array(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def sigmoid(a):
    s = sigmoid_array(a.data)
    return _result(s, (a,), lambda g: (g * s * (1.0 - s),))


def tanh(a):
    t = np.tanh(a.data)
    return _result(t, (a,), lambda g: (g * (1.0 - t * t),))


def softplus_array(x):
    return np.logaddexp(0.0, x)


def softplus(a):
    return _result(
        softplus_array(a.data), (a,), lambda g: (g * sigmoid_array(a.data),)
    )


def log_softmax(a):
    """Log-softmax over the last axis."""
    z = a.data - a.data.max(axis=-1, keepdims=True)
    out = z - np.log(np.exp(z).sum(axis=-1, keepdims=True))
    p = np.exp(out)
    return _result(
        out, (a,), lambda g: (g - p * g.sum(axis=-1, keepdims=True),)
    )


def take_last(a, index):
    """Pick ``a[..., index[...]]`` along the last axis."""
    index = np.asarray(index, dtype=np.int64)
    out = np.take_along_axis(a.data, index[..., None], axis=-1)[..., 0]

    def back(g):
        full = np.zeros(a.shape)
        np.put_along_axis(full, index[..., None], g[..., None], axis=-1)
        return (full,)

    return _result(out, (a,), back)


def getitem(a, idx):
    def back(g):
        full = np.zeros(a.shape)
        full[idx] = g
        return (full,)

    return _result(a.data[idx], (a,), back)


def stack(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    data = np.stack([t.data for t in tensors], axis=axis)

    def back(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))

    return _result(data, tuple(tensors), back)


def lstm_cell(x, hc, wx, wh, b):
    """One gated-memory-cell step.

    ``hc`` packs the previous hidden and cell vectors as (B, 2H); the result
    packs the new ones the same way. Gate order in the weights is
    input, forget, candidate, output.
    """
    H = wh.shape[0]
    h_prev = hc.data[:, :H]
    c_prev = hc.data[:, H:]
    z = x.data @ wx.data + h_prev @ wh.data + b.data
    acts, out, tanh_c = kernels.lstm_forward(z, c_prev)

    def back(g):
        dz, dc_prev = kernels.lstm_backward(acts, c_prev, tanh_c, g)
        dhc = np.empty_like(hc.data)
        dhc[:, :H] = dz @ wh.data.T
        dhc[:, H:] = dc_prev
        return (dz @ wx.data.T, dhc, x.data.T @ dz, h_prev.T @ dz, dz.sum(axis=0))

    return _result(out, (x, hc, wx, wh, b), back)
