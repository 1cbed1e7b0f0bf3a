r"""Gyrovector operations of the :math:`\kappa`-stereographic model.

Points and tangent vectors are plain arrays whose last axis holds the
coordinates; leading axes batch independent evaluations. The curvature is a
scalar. Every function is written with the primitives of
:mod:`kstereo.autodiff`, so the same code evaluates numpy arrays directly and
records a differentiable graph when any argument is a :class:`~kstereo.autodiff.Var`.

For ``k < 0`` the model is the open ball of radius ``1/sqrt(-k)``; for
``k >= 0`` it is all of ``R^n``. At ``k = 0`` every operation reduces to its
Euclidean counterpart (with the conventional factor 2 in the metric).
"""

from dataclasses import dataclass, field
from typing import List, NamedTuple

import numpy as np

from . import autodiff as ad
from . import kappa as _kappa
from .autodiff import value_of
from .errors import DomainError, PoleError, SingularityError

BOUNDARY_EPS = 1e-5
MIN_NORM = 1e-15
SINGULAR_TOL = 1e-15


@dataclass
class Curvature:
    """A learnable sectional curvature with its gradient slot."""

    value: float = 0.0
    grad: float = 0.0
    frozen: bool = False

    def __post_init__(self):
        self.value = float(self.value)
        if not np.isfinite(self.value):
            raise ValueError("curvature must be finite")


class Hyperplane(NamedTuple):
    """Geodesic hyperplane through ``base`` orthogonal to ``normal``."""

    normal: np.ndarray
    base: np.ndarray


def _k(kappa):
    return float(value_of(kappa))


def radius(kappa):
    """Ball radius ``1/sqrt(-k)`` for negative curvature, ``inf`` otherwise."""
    k = _k(kappa)
    return 1.0 / np.sqrt(-k) if k < 0 else np.inf


def check_domain(x, kappa):
    k = _k(kappa)
    if k < 0:
        n = np.linalg.norm(value_of(x), axis=-1)
        if np.any(n >= radius(k)):
            raise DomainError("point outside the ball of radius %g" % radius(k))


def _lambda(x, kappa):
    return 2.0 / (1.0 + kappa * ad.dot(x, x))


def conformal_factor(x, kappa):
    """Metric scale ``2 / (1 + k |x|^2)`` at ``x``."""
    check_domain(x, kappa)
    return ad.squeeze(_lambda(x, kappa))


def _snap_inside(r, kappa, margin=0.0):
    # rounding may land a Mobius sum on the ball boundary; pull it back in
    k = _k(kappa)
    if k >= 0:
        return r
    rv = value_of(r)
    n = np.linalg.norm(rv, axis=-1, keepdims=True)
    limit = (1.0 - margin) * radius(k)
    if not np.any(n >= limit):
        return r
    scale = np.where(n >= limit, (1.0 - BOUNDARY_EPS) * radius(k) / np.where(n > 0, n, 1.0), 1.0)
    return r * scale


def mobius_add(x, y, kappa):
    r"""Gyrovector sum :math:`x \oplus_\kappa y`."""
    xy = ad.dot(x, y)
    x2 = ad.dot(x, x)
    y2 = ad.dot(y, y)
    num = (1.0 - 2.0 * kappa * xy - kappa * y2) * x + (1.0 + kappa * x2) * y
    den = 1.0 - 2.0 * kappa * xy + kappa * kappa * x2 * y2
    if np.any(np.abs(value_of(den)) < SINGULAR_TOL):
        raise SingularityError("Mobius addition denominator vanished")
    return _snap_inside(num / den, kappa)


def gyration(u, v, w, kappa):
    r"""Gyrator :math:`\mathrm{gyr}[u, v]w = -(u \oplus v) \oplus (u \oplus (v \oplus w))`.

    Evaluated through its expansion, which is linear in ``w``, so ``w`` may be
    any tangent vector (it need not lie in the ball).
    """
    if not isinstance(kappa, ad.Var) and kappa == 0:
        return w
    uv = ad.dot(u, v)
    uw = ad.dot(u, w)
    vw = ad.dot(v, w)
    u2 = ad.dot(u, u)
    v2 = ad.dot(v, v)
    k2 = kappa * kappa
    a = -k2 * uw * v2 - kappa * vw + 2.0 * k2 * uv * vw
    b = -k2 * vw * u2 + kappa * uw
    den = 1.0 - 2.0 * kappa * uv + k2 * u2 * v2
    if np.any(np.abs(value_of(den)) < SINGULAR_TOL):
        raise SingularityError("gyration denominator vanished")
    return w + 2.0 * (a * u + b * v) / den


def _check_exp_pole(t, kappa):
    k = _k(kappa)
    if k > 0 and np.any(value_of(t) * np.sqrt(k) >= np.pi / 2 - 1e-12):
        raise PoleError("exponential map runs past the antipode (|arg| sqrt k >= pi/2)")


def exp_map(x, u, kappa):
    """Endpoint of the unit-time geodesic from ``x`` with initial velocity ``u``."""
    un = ad.clamp_min(ad.norm2(u), MIN_NORM)
    t = _lambda(x, kappa) * un / 2.0
    _check_exp_pole(t, kappa)
    return mobius_add(x, ad.tan_k(t, kappa) * u / un, kappa)


def exp_map_origin(u, kappa):
    """Exponential map at the origin, ``tan_k(|u|) u / |u|``."""
    un = ad.clamp_min(ad.norm2(u), MIN_NORM)
    _check_exp_pole(un, kappa)
    # saturated tanh would otherwise put the point on the boundary
    return _snap_inside(ad.tan_k(un, kappa) * u / un, kappa, margin=BOUNDARY_EPS)


def parallel_transport(x, y, v, kappa):
    """Carry tangent vector ``v`` at ``x`` to ``y`` along the geodesic."""
    scale = _lambda(x, kappa) / _lambda(y, kappa)
    return gyration(y, -x, v, kappa) * scale


def _distance(x, y, kappa):
    # |(-x) + y|^2 = |x - y|^2 / (1 + 2k<x,y> + k^2 |x|^2 |y|^2), fused into one node
    xv, yv = value_of(x), value_of(y)
    k = np.asarray(value_of(kappa))
    diff = xv - yv
    n2 = np.sum(diff * diff, axis=-1, keepdims=True)
    xy = np.sum(xv * yv, axis=-1, keepdims=True)
    x2 = np.sum(xv * xv, axis=-1, keepdims=True)
    y2 = np.sum(yv * yv, axis=-1, keepdims=True)
    q = 1.0 + 2.0 * k * xy + k * k * x2 * y2
    if np.any(np.abs(q) < SINGULAR_TOL):
        raise SingularityError("Mobius addition denominator vanished")
    u = np.sqrt(n2 / q)
    live = u > 0
    d_limit = 0.0
    if _k(k) < 0:
        # rounding can push |(-x) + y| onto the boundary; pin it just inside,
        # where it then follows the radius as k moves
        outside = u >= radius(k)
        if np.any(outside):
            live = live & ~outside
            u = np.where(outside, (1.0 - BOUNDARY_EPS) * radius(k), u)
            d_limit = np.where(outside, 0.5 * (1.0 - BOUNDARY_EPS) * (-k) ** -1.5, 0.0)
    ev = _kappa.eval_with_partials("arctan_k", u, k)
    value = 2.0 * ev.value
    if not (isinstance(x, ad.Var) or isinstance(y, ad.Var) or isinstance(kappa, ad.Var)):
        return value
    # d value / d n2 and d value / d q
    c_n = np.where(live, ev.d_dx / np.where(live, u * q, 1.0), 0.0)
    c_q = -c_n * n2 / q
    kshape = np.shape(value_of(kappa))
    return ad.custom(value, (x, y, kappa), (
        lambda g: g * (2.0 * c_n * diff + 2.0 * c_q * k * (yv + k * y2 * xv)),
        lambda g: g * (-2.0 * c_n * diff + 2.0 * c_q * k * (xv + k * x2 * yv)),
        lambda g: np.sum(g * (2.0 * (ev.d_dkappa + ev.d_dx * d_limit)
                                   + 2.0 * c_q * (xy + k * x2 * y2))).reshape(kshape),
    ))


def distance(x, y, kappa):
    """Geodesic distance ``2 arctan_k |(-x) + y|``."""
    return ad.squeeze(_distance(x, y, kappa))


def gromov_product(x, y, r, kappa):
    """``(d(x,r)^2 + d(y,r)^2 - d(x,y)^2) / 2``."""
    dxr = distance(x, r, kappa)
    dyr = distance(y, r, kappa)
    dxy = distance(x, y, kappa)
    return (dxr * dxr + dyr * dyr - dxy * dxy) / 2.0


def hyperplane_distance(x, hyperplane, kappa, signed=False):
    """Distance from ``x`` to a geodesic hyperplane.

    With ``signed=True`` the sign tells which side of the plane (relative to
    ``normal``) the point is on; the magnitude is unchanged.
    """
    a, p = hyperplane
    z = mobius_add(-p, x, kappa)
    inner = ad.dot(z, a)
    if not signed:
        inner = ad.absolute(inner)
    den = (1.0 + kappa * ad.dot(z, z)) * ad.norm2(a)
    return ad.squeeze(ad.arcsin_k(2.0 * inner / den, kappa))


def project_to_domain(x, kappa, eps=BOUNDARY_EPS):
    """Rescale points that sit at or beyond ``(1 - eps)`` of the ball radius."""
    x = np.asarray(x)
    k = _k(kappa)
    if k >= 0:
        return x
    limit = (1.0 - eps) * radius(k)
    n = np.linalg.norm(x, axis=-1, keepdims=True)
    if not np.any(n >= limit):
        return x
    return np.where(n >= limit, x * (limit / np.where(n > 0, n, 1.0)), x)


@dataclass
class Factor:
    """One ``n``-dimensional stereographic component with its own curvature."""

    dim: int
    curvature: Curvature = field(default_factory=Curvature)

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ValueError("factor dimension must be >= 1")
        self.dim = int(self.dim)

    @property
    def kappa(self):
        return self.curvature.value

    def distance(self, x, y):
        return distance(x, y, self.kappa)

    def mobius_add(self, x, y):
        return mobius_add(x, y, self.kappa)

    def exp_map(self, x, u):
        return exp_map(x, u, self.kappa)

    def exp_map_origin(self, u):
        return exp_map_origin(u, self.kappa)

    def parallel_transport(self, x, y, v):
        return parallel_transport(x, y, v, self.kappa)

    def project(self, x):
        return project_to_domain(x, self.kappa)


@dataclass
class ProductManifold:
    """Ordered product of stereographic factors combined with an l2 metric."""

    factors: List[Factor]

    def __post_init__(self):
        if not self.factors:
            raise ValueError("a product manifold needs at least one factor")

    @property
    def ambient_dim(self):
        return sum(f.dim for f in self.factors)

    @property
    def kappas(self):
        return [f.kappa for f in self.factors]

    def split(self, coords):
        """Split concatenated coordinates into per-factor blocks."""
        coords = np.asarray(coords)
        bounds = np.cumsum([f.dim for f in self.factors])[:-1]
        return np.split(coords, bounds, axis=-1)

    def distance(self, x, y):
        """l2 combination of per-factor distances for concatenated coordinates."""
        return product_distance(self.split(x), self.split(y), self.kappas)


def product_distance(xs, ys, kappas):
    """``sqrt(sum_i d_i(x_i, y_i)^2)`` over factors."""
    if not (len(xs) == len(ys) == len(kappas)):
        raise ValueError("factor structure mismatch")
    sq = None
    for x, y, k in zip(xs, ys, kappas):
        d = distance(x, y, k)
        sq = d * d if sq is None else sq + d * d
    return ad.sqrt(sq)
