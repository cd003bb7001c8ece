"""Minimal reverse-mode automatic differentiation over numpy arrays.

A :class:`Tensor` wraps an ndarray and records a closure-based backward
graph only while some input requires gradients, so inference runs free of
graph overhead.  Ops cover what the networks and losses in this package
need: broadcast arithmetic, matmul, reductions, stable sigmoid/softplus,
slicing/concatenation, and the depthwise-convolution kernels from
:mod:`semsep.kernels`.  Gradient correctness is pinned by the
finite-difference checks in the test suite.
"""

from __future__ import annotations

import math

import numpy as np

from semsep import kernels

LN10 = math.log(10.0)


def _unbroadcast(grad, shape):
    """Reduce `grad` back to `shape` by summing the broadcast axes."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """An ndarray plus an optional gradient and backward closure."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False):
        if isinstance(data, Tensor):
            data = data.data
        self.data = np.asarray(data, dtype=np.result_type(data, np.float32))
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def item(self):
        return float(self.data)

    def detach(self):
        return Tensor(self.data)

    def accumulate_grad(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += _unbroadcast(np.asarray(g), self.data.shape)

    def zero_grad(self):
        self.grad = None

    def backward(self):
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar loss")
        order = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- graph construction helper -------------------------------------

    @staticmethod
    def _make(data, parents, backward):
        out = Tensor(data)
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
        return out

    # -- arithmetic ------------------------------------------------------

    def __add__(self, other):
        other = as_tensor(other, self.dtype)

        def backward(g):
            if self.requires_grad:
                self.accumulate_grad(g)
            if other.requires_grad:
                other.accumulate_grad(g)

        return Tensor._make(self.data + other.data, (self, other), backward)

    __radd__ = __add__

    def __neg__(self):
        def backward(g):
            self.accumulate_grad(-g)

        return Tensor._make(-self.data, (self,), backward)

    def __sub__(self, other):
        return self + (-as_tensor(other, self.dtype))

    def __rsub__(self, other):
        return as_tensor(other, self.dtype) + (-self)

    def __mul__(self, other):
        other = as_tensor(other, self.dtype)

        def backward(g):
            if self.requires_grad:
                self.accumulate_grad(g * other.data)
            if other.requires_grad:
                other.accumulate_grad(g * self.data)

        return Tensor._make(self.data * other.data, (self, other), backward)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_tensor(other, self.dtype)

        def backward(g):
            if self.requires_grad:
                self.accumulate_grad(g / other.data)
            if other.requires_grad:
                other.accumulate_grad(-g * self.data / (other.data * other.data))

        return Tensor._make(self.data / other.data, (self, other), backward)

    def __rtruediv__(self, other):
        return as_tensor(other, self.dtype) / self

    def __pow__(self, exponent):
        if not isinstance(exponent, (int, float)):
            raise TypeError("only scalar exponents are supported")

        def backward(g):
            self.accumulate_grad(g * exponent * self.data ** (exponent - 1))

        return Tensor._make(self.data ** exponent, (self,), backward)

    def __matmul__(self, other):
        other = as_tensor(other, self.dtype)

        def backward(g):
            if self.requires_grad:
                self.accumulate_grad(g @ other.data.T)
            if other.requires_grad:
                other.accumulate_grad(self.data.T @ g)

        return Tensor._make(self.data @ other.data, (self, other), backward)

    # -- shape ops -------------------------------------------------------

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        old = self.data.shape

        def backward(g):
            self.accumulate_grad(g.reshape(old))

        return Tensor._make(self.data.reshape(shape), (self,), backward)

    def transpose(self, *axes):
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        inverse = np.argsort(axes)

        def backward(g):
            self.accumulate_grad(g.transpose(inverse))

        return Tensor._make(self.data.transpose(axes), (self,), backward)

    @property
    def T(self):
        return self.transpose()

    def __getitem__(self, key):
        def backward(g):
            full = np.zeros_like(self.data)
            np.add.at(full, key, g)
            self.accumulate_grad(full)

        return Tensor._make(self.data[key], (self,), backward)

    # -- reductions ------------------------------------------------------

    def sum(self, axis=None, keepdims=False):
        def backward(g):
            if axis is None:
                self.accumulate_grad(np.broadcast_to(g, self.data.shape))
            else:
                gg = g if keepdims else np.expand_dims(g, axis)
                self.accumulate_grad(np.broadcast_to(gg, self.data.shape))

        return Tensor._make(self.data.sum(axis=axis, keepdims=keepdims),
                            (self,), backward)

    def mean(self, axis=None, keepdims=False):
        count = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)


def as_tensor(value, dtype=None):
    if isinstance(value, Tensor):
        return value
    arr = np.asarray(value, dtype=dtype if dtype is not None else np.float64)
    return Tensor(arr)


# -- elementwise functions ----------------------------------------------


def relu(x):
    mask = x.data > 0

    def backward(g):
        x.accumulate_grad(g * mask)

    return Tensor._make(np.where(mask, x.data, 0.0), (x,), backward)


def exp(x):
    out_data = np.exp(x.data)

    def backward(g):
        x.accumulate_grad(g * out_data)

    return Tensor._make(out_data, (x,), backward)


def log(x):
    def backward(g):
        x.accumulate_grad(g / x.data)

    return Tensor._make(np.log(x.data), (x,), backward)


def log10(x):
    return log(x) * (1.0 / LN10)


def sqrt(x):
    out_data = np.sqrt(x.data)

    def backward(g):
        x.accumulate_grad(g * 0.5 / out_data)

    return Tensor._make(out_data, (x,), backward)


def stable_sigmoid(x):
    """sigma(x) for ndarrays, stable at both tails."""
    z = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))


def stable_softplus(x):
    """log(1 + e^x) for ndarrays without overflow."""
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def sigmoid(x):
    out_data = stable_sigmoid(x.data)

    def backward(g):
        x.accumulate_grad(g * out_data * (1.0 - out_data))

    return Tensor._make(out_data, (x,), backward)


def softplus(x):
    def backward(g):
        x.accumulate_grad(g * stable_sigmoid(x.data))

    return Tensor._make(stable_softplus(x.data), (x,), backward)


def maximum(a, b):
    a = as_tensor(a)
    b = as_tensor(b, a.dtype)
    choose_a = a.data >= b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(np.where(choose_a, g, 0.0))
        if b.requires_grad:
            b.accumulate_grad(np.where(choose_a, 0.0, g))

    return Tensor._make(np.maximum(a.data, b.data), (a, b), backward)


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        for t, piece in zip(tensors, np.split(g, splits, axis=axis)):
            if t.requires_grad:
                t.accumulate_grad(piece)

    return Tensor._make(np.concatenate([t.data for t in tensors], axis=axis),
                        tensors, backward)


def stack(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]

    def backward(g):
        for i, t in enumerate(tensors):
            if t.requires_grad:
                t.accumulate_grad(np.take(g, i, axis=axis))

    return Tensor._make(np.stack([t.data for t in tensors], axis=axis),
                        tensors, backward)


# -- convolution ops (kernel-backed) --------------------------------------


def depthwise_conv2d(x, w, stride=1):
    """Per-channel 3x3 convolution, NCHW input, same padding."""
    xd = np.ascontiguousarray(x.data)
    wd = np.ascontiguousarray(w.data)
    out_data = kernels.depthwise_conv2d_fwd(xd, wd, stride)

    def backward(g):
        gx, gw = kernels.depthwise_conv2d_bwd(xd, wd, np.ascontiguousarray(g), stride)
        if x.requires_grad:
            x.accumulate_grad(gx)
        if w.requires_grad:
            w.accumulate_grad(gw)

    return Tensor._make(out_data, (x, w), backward)


def dilated_conv1d(x, w, dilation=1):
    """Per-channel 3-tap convolution over time-major (T, C) input."""
    xd = np.ascontiguousarray(x.data)
    wd = np.ascontiguousarray(w.data)
    out_data = kernels.dilated_conv1d_fwd(xd, wd, dilation)

    def backward(g):
        gx, gw = kernels.dilated_conv1d_bwd(xd, wd, np.ascontiguousarray(g), dilation)
        if x.requires_grad:
            x.accumulate_grad(gx)
        if w.requires_grad:
            w.accumulate_grad(gw)

    return Tensor._make(out_data, (x, w), backward)


# -- optimizer -------------------------------------------------------------


class Adam:
    """Adam over a fixed list of parameter tensors, deterministic order."""

    def __init__(self, params, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self._m = [np.zeros_like(p.data) for p in self.params]
        self._v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self):
        self.step_count += 1
        b1, b2 = self.beta1, self.beta2
        correction1 = 1.0 - b1 ** self.step_count
        correction2 = 1.0 - b2 ** self.step_count
        for p, m, v in zip(self.params, self._m, self._v):
            if p.grad is None:
                continue
            g = p.grad
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            m_hat = m / correction1
            v_hat = v / correction2
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def finite_difference_check(loss_fn, params, num_samples=100, step=1e-5, seed=0):
    """Max relative error between analytic and central-difference gradients.

    `loss_fn` rebuilds the scalar loss from scratch on each call;
    `params` are the tensors to probe.  `num_samples` coordinates are
    sampled across all parameters (every parameter gets at least one).
    Evaluate in float64 for meaningful results.
    """
    loss = loss_fn()
    for p in params:
        p.zero_grad()
    loss.backward()
    grads = [np.array(p.grad if p.grad is not None else np.zeros_like(p.data))
             for p in params]

    rng = np.random.default_rng(seed)
    coords = []
    for i, p in enumerate(params):
        coords.append((i, tuple(int(rng.integers(0, s)) for s in p.data.shape)
                       if p.data.ndim else ()))
    while len(coords) < num_samples:
        i = int(rng.integers(0, len(params)))
        p = params[i]
        coords.append((i, tuple(int(rng.integers(0, s)) for s in p.data.shape)
                       if p.data.ndim else ()))

    max_rel = 0.0
    for i, idx in coords[:max(num_samples, len(params))]:
        p = params[i]
        original = p.data[idx] if idx else float(p.data)
        analytic = grads[i][idx] if idx else float(grads[i])

        def poke(value):
            if idx:
                p.data[idx] = value
            else:
                p.data[...] = value
            out = loss_fn().item()
            if idx:
                p.data[idx] = original
            else:
                p.data[...] = original
            return out

        numeric = (poke(original + step) - poke(original - step)) / (2 * step)
        denom = max(abs(analytic), abs(numeric), 1e-8)
        max_rel = max(max_rel, abs(analytic - numeric) / denom)
    return max_rel
