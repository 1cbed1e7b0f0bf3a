import numpy as np
import pytest

from kstereo import autodiff as ad
from kstereo import stereographic as st
from kstereo.errors import SingularityError
from kstereo.optim import (OptimConfig, RiemannianSGD, StepRejected, Strategy,
                           riemannian_grad)


def make(strategy, dim=2, n=4, kappa=0.0, seed=0, **kw):
    factor = st.Factor(dim, st.Curvature(kappa))
    rng = np.random.default_rng(seed)
    params = [rng.normal(scale=0.1, size=(n, dim))]
    cfg = OptimConfig(strategy=strategy, **kw)
    return RiemannianSGD([factor], params, cfg), factor


def sq_loss(target):
    def loss(points, kappas):
        d = st.distance(points[0], target, kappas[0])
        return ad.total(d * d)
    return loss


def test_riemannian_grad_examples():
    g = np.array([[1.0, -2.0]])
    np.testing.assert_allclose(riemannian_grad(g, np.array([[0.3, 0.1]]), 0.0), g / 4)
    np.testing.assert_allclose(riemannian_grad(g, np.zeros((1, 2)), -1.0), g / 4)
    x = np.array([[0.5, 0.0]])
    np.testing.assert_allclose(riemannian_grad(g, x, -1.0), (1 - 0.25) ** 2 / 4 * g, rtol=1e-15)


def test_config_validation_and_defaults():
    cfg = OptimConfig()
    assert cfg.strategy is Strategy.JOINT
    assert cfg.kappa_lr == pytest.approx(cfg.lr_points / 10)
    assert OptimConfig(lr_kappa=0.0).kappa_lr == 0.0
    for bad in (dict(lr_points=0), dict(lr_kappa=-1), dict(momentum=1.0), dict(grad_clip=0)):
        with pytest.raises(ValueError):
            OptimConfig(**bad)
    with pytest.raises(ValueError):
        OptimConfig(strategy="nope")


def test_zero_gradient_keeps_params():
    opt, _ = make("joint")
    before = opt.params[0].copy()
    opt.step(lambda pts, ks: ad.total(pts[0] * 0.0))
    np.testing.assert_array_equal(opt.params[0], before)


def test_flat_plain_descent():
    opt, f = make("euclidean", momentum=0.0, grad_clip=None, lr_points=0.1)
    p0 = opt.params[0].copy()
    target = np.zeros((4, 2))
    opt.step(sq_loss(target))
    # d = 2|p|, loss = 4|p|^2, gradient 8p, riemannian step p - lr * 8p / 4
    np.testing.assert_allclose(opt.params[0], p0 - 0.1 * 8 * p0 / 4, rtol=1e-12)
    assert f.kappa == 0.0 and f.curvature.frozen


def test_euclidean_and_tangent_match_plain_momentum_sgd():
    rng = np.random.default_rng(1)
    target = rng.normal(scale=0.2, size=(4, 2))
    loss = sq_loss(target)
    runs = {}
    for strategy in ("euclidean", "tangent", "joint"):
        opt, f = make(strategy, grad_clip=None)
        f.curvature.frozen = True
        runs[strategy] = [opt.params[0].copy()]
        for _ in range(20):
            opt.step(loss)
            runs[strategy].append(opt.params[0].copy())
    # plain momentum SGD with gradient 8 (p - t)
    p, m = runs["euclidean"][0].copy(), np.zeros_like(target)
    for i in range(20):
        m_r = 0.9 * m + 8 * (p - target) / 4
        p_r = p - 0.01 * m_r
        np.testing.assert_allclose(runs["euclidean"][i + 1], p_r, atol=1e-12)
        np.testing.assert_allclose(runs["joint"][i + 1], p_r, atol=1e-12)
        p, m = p_r, m_r
    p, m = runs["tangent"][0].copy(), np.zeros_like(target)
    for i in range(20):
        m = 0.9 * m + 8 * (p - target)
        p = p - 0.01 * m
        np.testing.assert_allclose(runs["tangent"][i + 1], p, atol=1e-12)


def test_frozen_and_zero_rate_curvature_unchanged():
    loss = sq_loss(np.full((4, 2), 0.3))
    opt, f = make("joint", kappa=-0.5)
    f.curvature.frozen = True
    opt.step(loss)
    assert f.kappa == -0.5
    opt, f = make("joint", kappa=-0.5, lr_kappa=0.0)
    opt.step(loss)
    assert f.kappa == -0.5


def test_kappa_step_projects_points():
    opt, f = make("joint", kappa=-0.1, n=1, kappa_clip=None)
    opt.params = [np.array([[2.5, 0.0]])]
    f.curvature.grad = 1e4
    opt.step_kappa()
    assert f.kappa < -0.1
    radius = 1 / np.sqrt(-f.kappa)
    assert np.linalg.norm(opt.params[0]) == pytest.approx((1 - 1e-5) * radius, rel=1e-12)


def test_alternating_parity():
    loss = sq_loss(np.full((4, 2), 0.3))
    opt, f = make("alternating", kappa=-0.2)
    ks, ps = [f.kappa], [opt.params[0].copy()]
    for _ in range(6):
        opt.step(loss)
        ks.append(f.kappa)
        ps.append(opt.params[0].copy())
    for it in range(6):
        if it % 2 == 0:
            assert ks[it + 1] == ks[it]
            assert not np.array_equal(ps[it + 1], ps[it])
        else:
            assert ks[it + 1] != ks[it]
            np.testing.assert_array_equal(ps[it + 1], ps[it])


def test_joint_orderings_diverge():
    loss = sq_loss(np.full((4, 2), 0.4))
    a, fa = make("joint", kappa=-0.3)
    b, fb = make("joint-kappa-first", kappa=-0.3)
    for _ in range(3):
        a.step(loss)
        b.step(loss)
    assert not np.allclose(a.params[0], b.params[0], atol=1e-14, rtol=0)


def test_momentum_transport_preserves_metric_norm():
    rng = np.random.default_rng(2)
    opt, _ = make("joint", kappa=-1.0, n=8)
    loss = sq_loss(rng.normal(scale=0.3, size=(8, 2)))
    for _ in range(30):
        opt.step(loss)
        assert opt.last_transport_error <= 1e-9


def test_domain_safety_every_strategy():
    rng = np.random.default_rng(3)
    target = rng.normal(scale=0.3, size=(4, 2))
    for strategy in Strategy:
        opt, f = make(strategy.value, kappa=-1.0, lr_points=0.5, lr_kappa=0.05)
        if strategy is Strategy.WARMSTART:
            opt.config.switch_iter = 5
        for _ in range(40):
            try:
                opt.step(sq_loss(target))
            except StepRejected:
                pass
            k = f.kappa
            if k < 0:
                norms = np.linalg.norm(opt.points()[0], axis=1)
                assert np.all(norms <= (1 - 0.5e-5) / np.sqrt(-k))


def test_descent_sanity_hyperbolic():
    for seed in range(10):
        rng = np.random.default_rng(seed)
        target = rng.normal(scale=0.3, size=(6, 2))
        opt, f = make("joint", kappa=-1.0, n=6, seed=seed, grad_clip=None, momentum=0.0)
        f.curvature.frozen = True
        loss = sq_loss(target)
        values = [opt.step(loss) for _ in range(100)]
        assert all(b <= a for a, b in zip(values, values[1:]))


def test_warmstart_switch():
    loss = sq_loss(np.full((4, 2), 0.4))
    opt, f = make("warmstart", kappa=-0.7, switch_iter=3)
    assert f.kappa == 0.0
    for _ in range(3):
        opt.step(loss)
        assert f.kappa == 0.0
    opt.step(loss)
    assert f.kappa != 0.0


def test_tangent_pole_rejection_restores_state():
    opt, f = make("tangent", kappa=1.0, n=1, momentum=0.0, grad_clip=None, lr_points=10.0)
    opt.params = [np.array([[1.2, 0.0]])]
    before = opt.params[0].copy()
    with pytest.raises(StepRejected):
        opt.step(lambda pts, ks: ad.total(pts[0] * -1.0))
    np.testing.assert_array_equal(opt.params[0], before)
    assert f.kappa == 1.0
    assert opt.iteration == 1


def test_singular_step_becomes_rejection(monkeypatch):
    opt, f = make("joint", kappa=-0.5)
    before = opt.params[0].copy()

    def boom(*a, **k):
        raise SingularityError("forced")

    monkeypatch.setattr(st, "exp_map", boom)
    with pytest.raises(StepRejected):
        opt.step(sq_loss(np.zeros((4, 2))))
    np.testing.assert_array_equal(opt.params[0], before)


def test_gradient_clipping_bounds_metric_step():
    opt, _ = make("euclidean", momentum=0.0, grad_clip=0.1, lr_points=1.0, n=1)
    opt.params = [np.array([[0.0, 0.0]])]
    opt.step(lambda pts, ks: ad.total(pts[0] * 1e6))
    # metric length of the step is lr * clip
    assert 2 * np.linalg.norm(opt.params[0]) == pytest.approx(0.1, rel=1e-12)


def test_kappa_gradient_clip_bounds_curvature_step():
    opt, f = make("joint", kappa=-0.5, momentum=0.0)
    f.curvature.grad = 1e6
    opt.step_kappa()
    assert f.kappa == pytest.approx(-0.5 - opt.config.kappa_lr * opt.config.kappa_clip, rel=1e-14)
