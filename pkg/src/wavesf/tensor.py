"""Dense tensors with reverse-mode automatic differentiation.

A :class:`Tensor` wraps a row-major numpy array (float32 for training,
float64 for gradient checking) plus an optional gradient slot. Operations
record a computation graph; ``backward()`` on a scalar loss replays it in
reverse topological order exactly once and accumulates (sums) gradients into
the ``grad`` slot of every reachable leaf that requires one. The record is
consumed by the replay.
"""

import numpy as np

_FLOAT_DTYPES = (np.float32, np.float64)
DEFAULT_DTYPE = np.float32

_grad_enabled = True
_finite_checks = False


def set_finite_checks(enabled):
    """Toggle NaN/Inf detection on every op output (off by default: it costs a pass)."""
    global _finite_checks
    _finite_checks = bool(enabled)


class no_grad:
    """Context manager that suspends graph recording (evaluation passes)."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


def _as_array(data, dtype=None):
    arr = np.asarray(data, dtype=dtype)
    if arr.dtype not in _FLOAT_DTYPES:
        arr = arr.astype(DEFAULT_DTYPE)
    return arr


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad=False, dtype=None):
        self.data = _as_array(data, dtype)
        if _finite_checks and not np.all(np.isfinite(self.data)):
            raise ValueError("non-finite values in tensor data")
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = None
        self._backward_fn = None

    # -- introspection ----------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype.name}{flag})"

    def item(self):
        return float(self.data.reshape(-1)[0])

    def detach(self):
        """A view of the same data outside the graph."""
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self):
        self.grad = None

    # -- graph machinery ---------------------------------------------------
    def backward(self):
        """Reverse sweep from a scalar; sums gradients into reachable leaf slots."""
        if self.data.size != 1:
            raise ValueError(f"backward requires a scalar tensor, got shape {self.data.shape}")
        topo = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, emitted = stack.pop()
            if emitted:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            if node._parents is not None:
                for p in node._parents:
                    if p.requires_grad and id(p) not in seen:
                        stack.append((p, False))

        flowing = {id(self): np.ones_like(self.data)}
        for node in reversed(topo):
            g = flowing.pop(id(node), None)
            if g is None:
                continue
            if node._backward_fn is None:
                node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward_fn(g)):
                if pg is None or not parent.requires_grad:
                    continue
                acc = flowing.get(id(parent))
                flowing[id(parent)] = pg if acc is None else acc + pg
            node._parents = None
            node._backward_fn = None

    # -- arithmetic --------------------------------------------------------
    def __add__(self, other):
        if isinstance(other, Tensor):
            xs, ys = self.data.shape, other.data.shape
            return from_op(
                self.data + other.data,
                (self, other),
                lambda g: (_unbroadcast(g, xs), _unbroadcast(g, ys)),
            )
        shape = self.data.shape
        return from_op(self.data + other, (self,), lambda g: (_unbroadcast(g, shape),))

    __radd__ = __add__

    def __neg__(self):
        return from_op(-self.data, (self,), lambda g: (-g,))

    def __sub__(self, other):
        if isinstance(other, Tensor):
            xs, ys = self.data.shape, other.data.shape
            return from_op(
                self.data - other.data,
                (self, other),
                lambda g: (_unbroadcast(g, xs), _unbroadcast(-g, ys)),
            )
        shape = self.data.shape
        return from_op(self.data - other, (self,), lambda g: (_unbroadcast(g, shape),))

    def __rsub__(self, other):
        shape = self.data.shape
        return from_op(other - self.data, (self,), lambda g: (_unbroadcast(-g, shape),))

    def __mul__(self, other):
        if isinstance(other, Tensor):
            xd, yd = self.data, other.data
            return from_op(
                xd * yd,
                (self, other),
                lambda g: (_unbroadcast(g * yd, xd.shape), _unbroadcast(g * xd, yd.shape)),
            )
        shape = self.data.shape
        return from_op(self.data * other, (self,), lambda g: (_unbroadcast(g * other, shape),))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            xd, yd = self.data, other.data
            return from_op(
                xd / yd,
                (self, other),
                lambda g: (
                    _unbroadcast(g / yd, xd.shape),
                    _unbroadcast(-g * xd / (yd * yd), yd.shape),
                ),
            )
        return self * (1.0 / other)

    def __pow__(self, p):
        xd = self.data
        return from_op(xd**p, (self,), lambda g: (g * p * xd ** (p - 1),))

    # -- reductions / reshaping ---------------------------------------------
    def sum(self, axis=None, keepdims=False):
        shape = self.data.shape
        out = self.data.sum(axis=axis, keepdims=keepdims)

        def bw(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape).copy(),)

        return from_op(out, (self,), bw)

    def mean(self, axis=None, keepdims=False):
        count = self.data.size if axis is None else np.prod(
            [self.data.shape[a] for a in np.atleast_1d(axis)]
        )
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        old = self.data.shape
        return from_op(self.data.reshape(shape), (self,), lambda g: (g.reshape(old),))


class Parameter(Tensor):
    """A trainable leaf tensor with a slash-separated placement path."""

    __slots__ = ("name",)

    def __init__(self, data, name="", dtype=None):
        super().__init__(data, requires_grad=True, dtype=dtype)
        self.name = name


def from_op(data, parents, backward_fn):
    """Wrap an op result, recording the graph edge when gradients are live."""
    req = _grad_enabled and any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=req)
    if req:
        out._parents = tuple(parents)
        out._backward_fn = backward_fn
    return out


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` (reverses numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def concat(tensors, axis):
    """Differentiable concatenation along ``axis``."""
    datas = [t.data for t in tensors]
    sizes = [d.shape[axis] for d in datas]
    splits = np.cumsum(sizes)[:-1]

    def bw(g):
        return tuple(np.ascontiguousarray(p) for p in np.split(g, splits, axis=axis))

    return from_op(np.concatenate(datas, axis=axis), tuple(tensors), bw)
