r"""Curvature-parametric scalar kernels.

Every kernel has the shape ``f(x, k) = G(x * sqrt|k|) / sqrt|k|`` where ``G``
is ``tan``/``tanh``, ``sin``/``sinh`` or one of their inverses, chosen by the
sign of ``k``. At ``k == 0`` the expression is undefined and its derivative
in ``k`` cancels catastrophically for small ``|k|``, so inside
``|k| <= SWITCH_THRESHOLD`` each kernel is replaced by its degree-11 Taylor
polynomial in ``k``. The polynomial is the same on both sides of zero, which
makes value and ``d/dk`` continuous through flat space.

All kernels are vectorised over ``x``; ``k`` is a scalar. They preserve the
floating dtype of their inputs (``float64`` by default, ``longdouble`` when
asked) so the finite-difference harness can evaluate them in extended
precision.
"""

import enum
import functools
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from .errors import DomainError, PoleError

SWITCH_THRESHOLD = 1e-5
POLE_TOLERANCE = 1e-12

# coefficients c_j of x * sum_j c_j (k x^2)^j
_TAYLOR = {
    "tan_k": [Fraction(1), Fraction(1, 3), Fraction(2, 15), Fraction(17, 315),
              Fraction(62, 2835), Fraction(1382, 155925)],
    "arctan_k": [Fraction((-1) ** j, 2 * j + 1) for j in range(6)],
    "sin_k": [Fraction(1), Fraction(-1, 6), Fraction(1, 120), Fraction(-1, 5040),
              Fraction(1, 362880), Fraction(-1, 39916800)],
    # all coefficients positive: k^-1/2 asin(x sqrt k) = x + k x^3/6 + ...
    "arcsin_k": [Fraction(1), Fraction(1, 6), Fraction(3, 40), Fraction(5, 112),
                 Fraction(35, 1152), Fraction(63, 2816)],
}


class Kernel(str, enum.Enum):
    TAN_K = "tan_k"
    ARCTAN_K = "arctan_k"
    SIN_K = "sin_k"
    ARCSIN_K = "arcsin_k"


class Branch(enum.Enum):
    POSITIVE = "positive"
    TAYLOR_ZERO = "taylor_zero"
    NEGATIVE = "negative"


def branch(kappa, threshold=SWITCH_THRESHOLD):
    """Which evaluation branch a curvature value falls into."""
    if abs(kappa) <= threshold:
        return Branch.TAYLOR_ZERO
    return Branch.POSITIVE if kappa > 0 else Branch.NEGATIVE


class ScalarEval(NamedTuple):
    value: np.ndarray
    d_dx: np.ndarray
    d_dkappa: np.ndarray


def _prepare(x, kappa):
    x = np.asarray(x)
    dtype = np.result_type(x.dtype, np.asarray(kappa).dtype, np.float64)
    return x.astype(dtype, copy=False), dtype.type(kappa)


@functools.lru_cache(maxsize=None)
def _coefficients(name, dtype):
    t = np.dtype(dtype).type
    return tuple(t(c.numerator) / t(c.denominator) for c in _TAYLOR[name])


def _taylor(name, x, kappa):
    coeffs = _coefficients(name, x.dtype)
    z = kappa * x * x
    p = np.zeros_like(x)
    dp_dz = np.zeros_like(x)
    for c in reversed(coeffs):
        dp_dz = dp_dz * z + p
        p = p * z + c
    # f = x p(z), z = k x^2
    value = x * p
    d_dx = p + 2.0 * z * dp_dz
    d_dkappa = x * x * x * dp_dz
    return value, d_dx, d_dkappa


def _check_tan_pole(y):
    t = y - np.pi / 2
    gap = np.abs(t - np.pi * np.round(t / np.pi))
    if np.any(gap < POLE_TOLERANCE):
        raise PoleError("tan_k argument within %g of a pole" % POLE_TOLERANCE)


def _analytic(name, x, kappa):
    """Return ``G(y)`` and ``G'(y)`` at ``y = x sqrt|k|`` plus ``sqrt|k|``."""
    s = np.sqrt(np.abs(kappa))
    y = x * s
    positive = kappa > 0
    if name == "tan_k":
        if positive:
            _check_tan_pole(y)
            g = np.tan(y)
            dg = 1.0 + g * g
        else:
            g = np.tanh(y)
            dg = 1.0 - g * g
    elif name == "sin_k":
        if positive:
            g, dg = np.sin(y), np.cos(y)
        else:
            g, dg = np.sinh(y), np.cosh(y)
    elif name == "arctan_k":
        if positive:
            g = np.arctan(y)
            dg = 1.0 / (1.0 + y * y)
        else:
            if np.any(np.abs(y) >= 1.0):
                raise DomainError("arctan_k needs |x| sqrt(-k) < 1")
            g = np.arctanh(y)
            dg = 1.0 / (1.0 - y * y)
    elif name == "arcsin_k":
        if positive:
            ay = np.abs(y)
            if np.any(ay > 1.0 + 4 * np.finfo(y.dtype).eps):
                raise DomainError("arcsin_k needs |x| sqrt(k) <= 1")
            y = np.clip(y, -1.0, 1.0)
            g = np.arcsin(y)
            with np.errstate(divide="ignore"):
                dg = 1.0 / np.sqrt(1.0 - y * y)
        else:
            g = np.arcsinh(y)
            dg = 1.0 / np.sqrt(1.0 + y * y)
    else:
        raise ValueError(f"unknown kernel {name!r}")
    return g, dg, s, y


def eval_with_partials(fn, x, kappa, threshold=SWITCH_THRESHOLD):
    """Evaluate a kernel together with its partials in ``x`` and ``kappa``.

    Parameters
    ----------
    fn : Kernel or str
        One of ``tan_k``, ``arctan_k``, ``sin_k``, ``arcsin_k``.
    x : array_like
        Arguments; the kernel is applied elementwise.
    kappa : float
        Curvature.

    Returns
    -------
    ScalarEval
        ``value``, ``d_dx`` and ``d_dkappa`` with the shape of ``x``.
    """
    name = Kernel(fn).value
    x, kappa = _prepare(x, kappa)
    if abs(kappa) <= threshold:
        return ScalarEval(*_taylor(name, x, kappa))
    g, dg, s, y = _analytic(name, x, kappa)
    value = g / s
    sign = 1.0 if kappa > 0 else -1.0
    d_dkappa = sign * (y * dg - g) / (2.0 * s * s * s)
    return ScalarEval(value, dg, d_dkappa)


def _value(name, x, kappa, threshold):
    x, kappa = _prepare(x, kappa)
    if abs(kappa) <= threshold:
        return _taylor(name, x, kappa)[0]
    g, _, s, _ = _analytic(name, x, kappa)
    return g / s


def tan_k(x, kappa, threshold=SWITCH_THRESHOLD):
    """``tan`` for ``k > 0``, ``tanh`` for ``k < 0``, rescaled by ``|k|^-1/2``."""
    return _value("tan_k", x, kappa, threshold)


def arctan_k(x, kappa, threshold=SWITCH_THRESHOLD):
    return _value("arctan_k", x, kappa, threshold)


def sin_k(x, kappa, threshold=SWITCH_THRESHOLD):
    return _value("sin_k", x, kappa, threshold)


def arcsin_k(x, kappa, threshold=SWITCH_THRESHOLD):
    return _value("arcsin_k", x, kappa, threshold)


KERNELS = {
    Kernel.TAN_K: tan_k,
    Kernel.ARCTAN_K: arctan_k,
    Kernel.SIN_K: sin_k,
    Kernel.ARCSIN_K: arcsin_k,
}
