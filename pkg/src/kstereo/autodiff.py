"""Array-valued reverse-mode differentiation.

A :class:`Tape` records primitive operations on numpy arrays. Every node
stores its parents and a closure returning the adjoint contribution to each
parent, so a backward pass is a single reverse sweep over the node list.

The module-level primitives (:func:`dot`, :func:`norm2`, :func:`kernel`, ...)
accept plain arrays as well as :class:`Var` objects. With no ``Var`` among the
inputs they simply compute with numpy, which lets the geometry code be written
once and used both for plain evaluation and for differentiation.
"""

import numpy as np

from . import kappa as _kappa
from .errors import DomainError

FD_FLOOR = 1e-6


def _unbroadcast(grad, shape):
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tape:
    """Append-only record of primitive operations."""

    def __init__(self):
        self._parents = []
        self._backward = []

    def __len__(self):
        return len(self._parents)

    def lift(self, value):
        """Register ``value`` as a leaf and return its :class:`Var`."""
        return self._record(np.array(value, dtype=np.result_type(value, np.float64)), (), None)

    var = lift

    def _record(self, value, parents, backward):
        index = len(self._parents)
        self._parents.append(tuple(p.index for p in parents))
        self._backward.append(backward)
        return Var(self, index, value)

    def backward(self, loss):
        """Propagate adjoints from a scalar ``loss`` back to every leaf."""
        if loss.tape is not self:
            raise ValueError("loss belongs to a different tape")
        if np.size(loss.value) != 1:
            raise ValueError("backward needs a scalar loss")
        adjoints = [None] * (loss.index + 1)
        adjoints[loss.index] = np.ones_like(loss.value)
        leaves = {}
        for i in range(loss.index, -1, -1):
            g = adjoints[i]
            fn = self._backward[i]
            if fn is None:
                leaves[i] = g
                continue
            if g is None:
                continue
            for parent, contribution in zip(self._parents[i], fn(g)):
                if contribution is None:
                    continue
                if adjoints[parent] is None:
                    adjoints[parent] = contribution
                else:
                    adjoints[parent] = adjoints[parent] + contribution
        return GradientMap(leaves)


class GradientMap(dict):
    """Leaf index -> adjoint. Also indexable by the leaf :class:`Var`."""

    def __getitem__(self, key):
        if isinstance(key, Var):
            value = self.get(key.index)
            return np.zeros_like(key.value) if value is None else value
        return super().__getitem__(key)


class Var:
    __slots__ = ("tape", "index", "value")
    __array_ufunc__ = None

    def __init__(self, tape, index, value):
        self.tape = tape
        self.index = index
        self.value = value

    def __repr__(self):
        return f"Var(index={self.index}, value={self.value!r})"

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return subtract(self, other)

    def __rsub__(self, other):
        return subtract(other, self)

    def __mul__(self, other):
        return multiply(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return divide(self, other)

    def __rtruediv__(self, other):
        return divide(other, self)

    def __neg__(self):
        return negative(self)

    def __pow__(self, exponent):
        if exponent != 2:
            raise NotImplementedError("only squaring is supported")
        return multiply(self, self)


def value_of(x):
    return x.value if isinstance(x, Var) else x


def _tape_of(*args):
    for a in args:
        if isinstance(a, Var):
            return a.tape
    return None


def _binary(a, b, value, da, db):
    """Record a broadcasting binary op; ``da``/``db`` map adjoint -> full-shape partial."""
    tape = _tape_of(a, b)
    if tape is None:
        return value
    parents, rules = [], []
    for operand, rule in ((a, da), (b, db)):
        if isinstance(operand, Var):
            parents.append(operand)
            rules.append((rule, operand.value.shape))

    def backward(g):
        return [_unbroadcast(rule(g), shape) for rule, shape in rules]

    return tape._record(value, parents, backward)


def custom(value, operands, rules):
    """Record an op with hand-written partials.

    ``rules[i](g)`` maps the output adjoint to the (possibly broadcast)
    adjoint of ``operands[i]``; plain-array operands are skipped.
    """
    tape = _tape_of(*operands)
    if tape is None:
        return value
    parents, pairs = [], []
    for operand, rule in zip(operands, rules):
        if isinstance(operand, Var):
            parents.append(operand)
            pairs.append((rule, operand.value.shape))

    def backward(g):
        return [_unbroadcast(rule(g), shape) for rule, shape in pairs]

    return tape._record(value, parents, backward)


def _unary(x, value, rule):
    if not isinstance(x, Var):
        return value
    return x.tape._record(value, (x,), lambda g: (rule(g),))


def add(a, b):
    return _binary(a, b, value_of(a) + value_of(b), lambda g: g, lambda g: g)


def subtract(a, b):
    return _binary(a, b, value_of(a) - value_of(b), lambda g: g, lambda g: -g)


def negative(x):
    return _unary(x, -value_of(x), lambda g: -g)


def multiply(a, b):
    av, bv = value_of(a), value_of(b)
    return _binary(a, b, av * bv, lambda g: g * bv, lambda g: g * av)


def reciprocal(x):
    r = 1.0 / value_of(x)
    return _unary(x, r, lambda g: -g * r * r)


def divide(a, b):
    av, bv = value_of(a), value_of(b)
    r = 1.0 / bv
    out = av * r
    return _binary(a, b, out, lambda g: g * r, lambda g: -g * out * r)


def dot(a, b):
    """Inner product over the last axis, keeping it as a length-1 axis."""
    av, bv = value_of(a), value_of(b)
    return _binary(a, b, np.sum(av * bv, axis=-1, keepdims=True),
                   lambda g: g * bv, lambda g: g * av)


def norm2(x):
    """Euclidean norm over the last axis (kept). The adjoint at 0 is taken as 0."""
    xv = value_of(x)
    n = np.sqrt(np.sum(xv * xv, axis=-1, keepdims=True))
    if not isinstance(x, Var):
        return n
    safe = np.where(n > 0, n, 1.0)
    return _unary(x, n, lambda g: g * np.where(n > 0, xv / safe, 0.0))


def sqrt(x):
    r = np.sqrt(value_of(x))
    if not isinstance(x, Var):
        return r
    safe = np.where(r > 0, r, np.inf)
    return _unary(x, r, lambda g: g * 0.5 / safe)


def absolute(x):
    xv = value_of(x)
    return _unary(x, np.abs(xv), lambda g: g * np.sign(xv))


def clamp_min(x, lower):
    """``max(x, lower)``; the adjoint passes only where ``x > lower``."""
    xv = value_of(x)
    return _unary(x, np.maximum(xv, lower), lambda g: g * (xv > lower))


def squeeze(x):
    """Drop a trailing length-1 axis."""
    xv = value_of(x)
    return _unary(x, xv[..., 0], lambda g: g[..., None])


def total(x):
    xv = value_of(x)
    return _unary(x, np.sum(xv), lambda g: np.broadcast_to(g, xv.shape).copy())


def mean(x):
    xv = value_of(x)
    n = xv.size
    return _unary(x, np.mean(xv), lambda g: np.full(xv.shape, g / n, dtype=xv.dtype))


def take(x, index):
    """Gather rows ``x[index]`` of a 2-D array."""
    xv = value_of(x)
    index = np.asarray(index)
    out = xv[index]
    if not isinstance(x, Var):
        return out
    rows = xv.shape[0]

    def backward(g):
        g = g.reshape(-1, xv.shape[1])
        flat = index.reshape(-1)
        cols = [np.bincount(flat, weights=g[:, c], minlength=rows)
                for c in range(xv.shape[1])]
        return (np.stack(cols, axis=1).astype(xv.dtype, copy=False),)

    return x.tape._record(out, (x,), backward)


def kernel(fn, x, kappa):
    """Apply a curvature kernel elementwise; differentiable in ``x`` and ``kappa``."""
    xv, kv = value_of(x), value_of(kappa)
    tape = _tape_of(x, kappa)
    if tape is None:
        return _kappa.KERNELS[_kappa.Kernel(fn)](xv, kv)
    ev = _kappa.eval_with_partials(fn, xv, kv)
    parents, rules = [], []
    if isinstance(x, Var):
        parents.append(x)
        rules.append(lambda g: g * ev.d_dx)
    if isinstance(kappa, Var):
        parents.append(kappa)
        kshape = kappa.value.shape
        rules.append(lambda g: np.sum(g * ev.d_dkappa).reshape(kshape))
    return tape._record(ev.value, parents, lambda g: [r(g) for r in rules])


def tan_k(x, kappa):
    return kernel("tan_k", x, kappa)


def arctan_k(x, kappa):
    return kernel("arctan_k", x, kappa)


def sin_k(x, kappa):
    return kernel("sin_k", x, kappa)


def arcsin_k(x, kappa):
    return kernel("arcsin_k", x, kappa)


def gradients(f, values):
    """Evaluate ``f`` on fresh leaves and return ``(value, [adjoint per leaf])``."""
    tape = Tape()
    leaves = [tape.lift(v) for v in values]
    out = f(*leaves)
    grads = tape.backward(out)
    return float(np.asarray(out.value)), [grads[v] for v in leaves]


def finite_diff_check(f, values, h=None, extended=True, retries=3, floor=FD_FLOOR):
    """Worst relative error between reverse-mode and central-difference gradients.

    Parameters
    ----------
    f : callable
        ``f(*leaves) -> scalar``. It is called once with :class:`Var` leaves
        for the backward pass and repeatedly with plain arrays for the
        differences, so it must be built from this module's primitives.
    values : sequence of array_like
        Leaf values (coordinates, curvatures, ...).
    h : float, optional
        Base step. Defaults to ``1e-6 * max(1, |value|)`` per coordinate.
    extended : bool
        Evaluate the differences in ``longdouble`` to suppress rounding noise.
    retries : int
        How many times a step is shrunk by 10x after a domain error.
    floor : float
        Smallest denominator of the relative error. Partials below it are
        compared absolutely, since ``longdouble`` rounding of ``f`` divided by
        ``h`` leaves ~1e-13 of noise in every difference quotient.

    Returns
    -------
    float
        ``max |g - fd| / max(|fd|, floor)`` over every coordinate.
    """
    values = [np.array(v, dtype=np.float64) for v in values]
    _, grads = gradients(f, values)
    dtype = np.longdouble if extended else np.float64
    base = [v.astype(dtype) for v in values]
    worst = 0.0
    for leaf, (v, g) in enumerate(zip(base, grads)):
        for j in np.ndindex(v.shape):
            step = (1e-6 if h is None else h) * max(1.0, abs(float(v[j])))
            for attempt in range(retries + 1):
                try:
                    fd = _central(f, base, leaf, j, step)
                    break
                except DomainError:
                    if attempt == retries:
                        raise
                    step /= 10.0
            err = abs(float(g[j]) - fd) / max(abs(fd), floor)
            worst = max(worst, err)
    return worst


def _central(f, base, leaf, j, step):
    def at(delta):
        args = list(base)
        shifted = base[leaf].copy()
        shifted[j] += delta
        args[leaf] = shifted
        return np.asarray(f(*args)).astype(base[leaf].dtype)

    return float((at(step) - at(-step)) / (2 * step))
