"""Numerical self-verification suites.

Each suite draws random configurations, measures the worst violation of an
identity and compares it with a fixed tolerance. Suites accept an ``ops``
namespace (defaulting to :mod:`kstereo.stereographic`) so that deliberately
broken implementations can be fed through the same checks.
"""

import time
from dataclasses import dataclass
from types import SimpleNamespace

import numpy as np

from . import autodiff as ad
from . import kappa as K
from . import stereographic as st
from .embedding import d_avg_loss, all_pairs

GRAD_KAPPAS = (-1.0, -0.1, -1e-7, 0.0, 1e-7, 0.1, 1.0)
AXIOM_KAPPAS = (-1.0, -0.1, 0.1, 1.0)

GRAD_TOL = 1e-5
AXIOM_TOL = 1e-8
CONTINUITY_TOL = 1e-9
GEOMETRY_TOL = 1e-8
REDUCTION_ULPS = 4


@dataclass
class SuiteResult:
    name: str
    passed: bool
    worst: float
    tolerance: float
    samples: int
    seconds: float

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return (f"{status}  {self.name:<12} worst={self.worst:.3e}  tol={self.tolerance:.0e}  "
                f"samples={self.samples}  {self.seconds:.2f}s")


def _ops(ops):
    return st if ops is None else ops


def _ball_points(rng, n, dim, kappa, frac=0.9):
    """Uniform-in-radius points with norm below ``frac`` of the natural scale ``1/sqrt|k|``."""
    scale = frac / np.sqrt(abs(kappa)) if kappa != 0 else frac
    d = rng.normal(size=(n, dim))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return d * (scale * rng.uniform(0, 1, size=(n, 1)))


# ---------------------------------------------------------------- gradients

def _weighted(out, w):
    return ad.total(out * w)


def _grad_cases(ops):
    """``name -> builder(rng, kappa) -> (f, leaf values)``; the curvature is always a leaf."""

    def pt(rng, k, n=1, dim=3, frac=0.6):
        scale = min(1.0, 1.0 / np.sqrt(abs(k))) if k != 0 else 1.0
        return _ball_points(rng, n, dim, 1.0, frac * scale)

    def vec_w(rng, dim=3):
        return rng.normal(size=(1, dim))

    def mobius(rng, k):
        w = vec_w(rng)
        return (lambda x, y, kk: _weighted(ops.mobius_add(x, y, kk), w),
                [pt(rng, k), pt(rng, k), k])

    def gyration(rng, k):
        w = vec_w(rng)
        return (lambda u, v, z, kk: _weighted(ops.gyration(u, v, z, kk), w),
                [pt(rng, k), pt(rng, k), rng.normal(size=(1, 3)), k])

    def exp_map(rng, k):
        w = vec_w(rng)
        return (lambda x, u, kk: _weighted(ops.exp_map(x, u, kk), w),
                [pt(rng, k), pt(rng, k, frac=0.3), k])

    def exp_origin(rng, k):
        w = vec_w(rng)
        return (lambda u, kk: _weighted(ops.exp_map_origin(u, kk), w),
                [pt(rng, k, frac=0.5), k])

    def transport(rng, k):
        w = vec_w(rng)
        return (lambda x, y, v, kk: _weighted(ops.parallel_transport(x, y, v, kk), w),
                [pt(rng, k), pt(rng, k), rng.normal(size=(1, 3)), k])

    def distance(rng, k):
        return (lambda x, y, kk: ad.total(ops.distance(x, y, kk)),
                [pt(rng, k), pt(rng, k), k])

    def gromov(rng, k):
        return (lambda x, y, r, kk: ad.total(ops.gromov_product(x, y, r, kk)),
                [pt(rng, k), pt(rng, k), pt(rng, k), k])

    def hyperplane(rng, k, signed=False):
        return (lambda x, a, p, kk: ad.total(ops.hyperplane_distance(x, st.Hyperplane(a, p), kk, signed)),
                [pt(rng, k, frac=0.4), rng.normal(size=(1, 3)), pt(rng, k, frac=0.4), k])

    def conformal(rng, k):
        return (lambda x, kk: ad.total(ops.conformal_factor(x, kk)), [pt(rng, k), k])

    def product(rng, k):
        k2 = float(rng.choice(GRAD_KAPPAS))
        return (lambda x1, y1, x2, y2, ka, kb: ad.total(
                    st.product_distance([x1, x2], [y1, y2], [ka, kb])),
                [pt(rng, k, dim=2), pt(rng, k, dim=2), pt(rng, k2), pt(rng, k2), k, k2])

    def davg(rng, k):
        # 5-node path: hop distances 1..4
        idx = np.arange(5)
        dist = np.abs(idx[:, None] - idx[None, :]).astype(float)
        pairs = all_pairs(5)
        return (lambda p, kk: d_avg_loss([p], [kk], dist, pairs),
                [pt(rng, k, n=5, dim=2), k])

    def scalar(name):
        def build(rng, k):
            x = rng.uniform(-0.9, 0.9, size=4)
            return (lambda xx, kk: ad.total(ad.kernel(name, xx, kk)), [x, k])
        return build

    cases = {
        "mobius_add": mobius, "gyration": gyration, "exp_map": exp_map,
        "exp_map_origin": exp_origin, "transport": transport, "distance": distance,
        "gromov": gromov, "hyperplane": hyperplane,
        "hyperplane_signed": lambda rng, k: hyperplane(rng, k, True),
        "conformal": conformal, "product_dist": product, "d_avg": davg,
    }
    for name in K.Kernel:
        cases[name.value] = scalar(name.value)
    return cases


def check_gradients(samples=1000, seed=0, ops=None):
    """Reverse-mode vs central differences over ``samples`` random configurations.

    Configurations cycle through every operation and every curvature in
    ``GRAD_KAPPAS``; the curvature is always differentiated as well.
    """
    ops = _ops(ops)
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    cases = list(_grad_cases(ops).items())
    worst = 0.0
    for i in range(samples):
        _, build = cases[i % len(cases)]
        k = GRAD_KAPPAS[(i // len(cases)) % len(GRAD_KAPPAS)]
        f, values = build(rng, k)
        worst = max(worst, ad.finite_diff_check(f, values))
    # the first-order curvature term of tan_k at k = 0 is x^3 / 3
    x = np.linspace(-2, 2, 41)
    _, (_, dk) = ad.gradients(lambda xx, kk: ad.total(ad.tan_k(xx, kk)), [x, 0.0])
    worst = max(worst, abs(float(dk) - float(np.sum(x ** 3) / 3)) / max(1.0, float(np.sum(np.abs(x) ** 3) / 3)))
    return SuiteResult("gradients", worst <= GRAD_TOL, worst, GRAD_TOL, samples,
                       time.perf_counter() - t0)


# ---------------------------------------------------------------- gyrogroup

CHART_LIMIT = 10.0


def _triples(rng, n, dim, k):
    """Random triples; for ``k > 0`` drop those whose sums approach the chart's point at infinity."""
    if k <= 0:
        return tuple(_ball_points(rng, n, dim, k) for _ in range(3))
    kept, have = [], 0
    while have < n:
        a, b, c = (_ball_points(rng, 2 * n, dim, k) for _ in range(3))
        ab = st.mobius_add(a, b, k)
        sums = (ab, st.mobius_add(b, c, k), st.mobius_add(ab, b, k))
        ok = np.all([np.linalg.norm(s, axis=1) * np.sqrt(k) <= CHART_LIMIT for s in sums], axis=0)
        kept.append((a[ok], b[ok], c[ok]))
        have += int(ok.sum())
    return tuple(np.concatenate([t[i] for t in kept])[:n] for i in range(3))


def check_gyrogroup(samples=10000, seed=0, ops=None, kappas=AXIOM_KAPPAS, dim=3):
    """Left identity, left inverse, gyroassociativity and the left loop property."""
    ops = _ops(ops)
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for k in kappas:
        a, b, c = _triples(rng, samples, dim, k)
        zero = np.zeros_like(a)
        ab = ops.mobius_add(a, b, k)
        errs = [
            ops.mobius_add(zero, a, k) - a,
            ops.mobius_add(-a, a, k),
            ops.mobius_add(a, ops.mobius_add(b, c, k), k)
            - ops.mobius_add(ab, ops.gyration(a, b, c, k), k),
            ops.gyration(a, b, c, k) - ops.gyration(ab, b, c, k),
        ]
        worst = max(worst, max(float(np.max(np.abs(e))) for e in errs))
    return SuiteResult("gyrogroup", worst <= AXIOM_TOL, worst, AXIOM_TOL,
                       samples * len(kappas), time.perf_counter() - t0)


# ---------------------------------------------------------------- continuity

def check_continuity(points=1000, **_):
    """Analytic vs Taylor branch at ``|k| = SWITCH_THRESHOLD`` on ``x in [-2, 2]``."""
    t0 = time.perf_counter()
    x = np.linspace(-2, 2, points)
    worst = 0.0
    for fn in K.Kernel:
        for k in (K.SWITCH_THRESHOLD, -K.SWITCH_THRESHOLD):
            analytic = K.KERNELS[fn](x, k, threshold=0.0)
            taylor = K.KERNELS[fn](x, k, threshold=1.0)
            worst = max(worst, float(np.max(np.abs(analytic - taylor))))
    return SuiteResult("continuity", worst <= CONTINUITY_TOL, worst, CONTINUITY_TOL,
                       points * 8, time.perf_counter() - t0)


# ---------------------------------------------------------------- geometry

def check_geometry(samples=10000, seed=0, ops=None, kappas=GRAD_KAPPAS, dim=3):
    """Geodesic length ``d(x, exp_x u) = lambda(x)|u|`` and metric isometry of transport."""
    ops = _ops(ops)
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    per = -(-samples // len(kappas))
    worst = 0.0
    for k in kappas:
        x = _ball_points(rng, per, dim, k, 0.7)
        lam = 2.0 / (1.0 + k * np.sum(x * x, axis=1))
        # geodesic lengths up to 2.5 / sqrt|k| keep clear of the antipode and the boundary
        length = rng.uniform(0, 2.5, size=per) / (np.sqrt(abs(k)) if abs(k) > 0.01 else 1.0)
        u = rng.normal(size=(per, dim))
        u *= (length / (lam * np.linalg.norm(u, axis=1)))[:, None]
        y = ops.exp_map(x, u, k)
        err_len = np.abs(ops.distance(x, y, k) - lam * np.linalg.norm(u, axis=1))
        v = rng.normal(size=(per, dim))
        pv = ops.parallel_transport(x, y, v, k)
        lam_y = 2.0 / (1.0 + k * np.sum(y * y, axis=1))
        err_iso = np.abs(lam_y * np.linalg.norm(pv, axis=1) - lam * np.linalg.norm(v, axis=1))
        scale = np.maximum(1.0, lam * np.linalg.norm(v, axis=1))
        worst = max(worst, float(np.max(err_len)), float(np.max(err_iso / scale)))
    return SuiteResult("geometry", worst <= GEOMETRY_TOL, worst, GEOMETRY_TOL,
                       per * len(kappas), time.perf_counter() - t0)


# ---------------------------------------------------------------- flat limit

def _ulps(got, want):
    got, want = np.asarray(got, float), np.asarray(want, float)
    spacing = np.spacing(np.maximum(np.abs(got), np.abs(want)))
    return float(np.max(np.abs(got - want) / np.where(spacing > 0, spacing, np.finfo(float).tiny)))


def check_reductions(samples=1000, seed=0, ops=None, dim=3):
    """At ``k = 0`` every operation equals its Euclidean formula to a few ulp."""
    ops = _ops(ops)
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    x, y, v = (rng.normal(size=(samples, dim)) for _ in range(3))
    a = rng.normal(size=(samples, dim))
    p = rng.normal(size=(samples, dim))
    worst = max(
        _ulps(ops.mobius_add(x, y, 0.0), x + y),
        _ulps(ops.distance(x, y, 0.0), 2.0 * np.linalg.norm(x - y, axis=1)),
        _ulps(ops.parallel_transport(x, y, v, 0.0), v),
        _ulps(ops.exp_map_origin(v, 0.0), v),
        _ulps(ops.hyperplane_distance(x, st.Hyperplane(a, p), 0.0),
              2.0 * np.abs(np.sum((x - p) * a, axis=1)) / np.linalg.norm(a, axis=1)),
    )
    return SuiteResult("reductions", worst <= REDUCTION_ULPS, worst, REDUCTION_ULPS,
                       samples, time.perf_counter() - t0)


SUITES = {
    "gradients": check_gradients,
    "gyrogroup": check_gyrogroup,
    "continuity": check_continuity,
    "geometry": check_geometry,
    "reductions": check_reductions,
}

DEFAULT_SAMPLES = {
    "gradients": 1000,
    "gyrogroup": 10000,
    "continuity": 1000,
    "geometry": 10000,
    "reductions": 1000,
}


def run(suites=None, samples=None, seed=0, ops=None):
    """Run the named suites (all by default) and return their results."""
    results = []
    for name in suites or SUITES:
        n = DEFAULT_SAMPLES[name] if samples is None else samples
        if name == "continuity":
            results.append(check_continuity(points=n))
        else:
            results.append(SUITES[name](samples=n, seed=seed, ops=ops))
    return results


def mutated_ops(**overrides):
    """Namespace of geometry operations with selected entries replaced."""
    names = ("mobius_add", "gyration", "exp_map", "exp_map_origin", "parallel_transport",
             "distance", "gromov_product", "hyperplane_distance", "conformal_factor")
    ns = {n: getattr(st, n) for n in names}
    ns.update(overrides)
    return SimpleNamespace(**ns)
