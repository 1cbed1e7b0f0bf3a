import numpy as np
import pytest

from kstereo import autodiff as ad
from kstereo import stereographic as st
from kstereo.embedding import all_pairs, d_avg_loss


def test_lift_and_trivial_backward():
    tape = ad.Tape()
    x = tape.lift(3.0)
    assert float(tape.backward(x)[x]) == 1.0
    a, b = tape.lift(1.0), tape.lift(1.0)
    assert a.index != b.index
    v = tape.lift(np.arange(4.0))
    assert tape.backward(ad.total(v))[v].shape == (4,)


def test_constant_loss_gives_zero_adjoints():
    tape = ad.Tape()
    x = tape.lift(np.ones(3))
    c = tape.lift(2.0)
    g = tape.backward(c)
    assert np.array_equal(g[x], np.zeros(3))


def test_dot_and_norm_adjoints():
    x0 = np.array([[0.3, -0.4, 1.2]])
    _, (g,) = ad.gradients(lambda x: ad.total(ad.dot(x, x)), [x0])
    np.testing.assert_allclose(g, 2 * x0)
    _, (g,) = ad.gradients(lambda x: ad.total(ad.norm2(x)), [x0])
    np.testing.assert_allclose(g, x0 / np.linalg.norm(x0))
    _, (g,) = ad.gradients(lambda x: ad.total(ad.norm2(x)), [np.zeros((1, 3))])
    assert np.all(np.isfinite(g)) and np.all(g == 0)


def test_broadcast_adjoints_are_reduced():
    tape = ad.Tape()
    k = tape.lift(0.5)
    x = tape.lift(np.ones((4, 3)))
    g = tape.backward(ad.total(k * x))
    assert g[k].shape == () and float(g[k]) == 12.0
    np.testing.assert_allclose(g[x], np.full((4, 3), 0.5))


def test_take_accumulates_repeated_rows():
    tape = ad.Tape()
    x = tape.lift(np.arange(6.0).reshape(3, 2))
    g = tape.backward(ad.total(ad.take(x, np.array([0, 0, 2]))))
    np.testing.assert_array_equal(g[x], [[2, 2], [0, 0], [1, 1]])


def test_cross_tape_backward_rejected():
    t1, t2 = ad.Tape(), ad.Tape()
    x = t1.lift(1.0)
    with pytest.raises(ValueError):
        t2.backward(x)
    with pytest.raises(ValueError):
        t1.backward(t1.lift(np.ones(2)))


def test_primitives_evaluate_plain_arrays():
    x = np.array([[3.0, 4.0]])
    assert isinstance(ad.norm2(x), np.ndarray)
    assert ad.norm2(x)[0, 0] == 5.0


def test_harness_linear_function_exact():
    w = np.array([1.5, -2.0, 0.25])
    err = ad.finite_diff_check(lambda x: ad.total(x * w), [np.array([0.1, 0.2, 0.3])])
    assert err <= 1e-10


def test_harness_distance_negative_curvature():
    rng = np.random.default_rng(0)
    x, y = rng.normal(size=(1, 3)) * 0.3, rng.normal(size=(1, 3)) * 0.3
    err = ad.finite_diff_check(lambda a, b, k: ad.total(st.distance(a, b, k)), [x, y, -0.5])
    assert err <= 1e-5


def test_tan_k_curvature_gradient_at_zero():
    x = np.array([0.2, -0.7, 1.1])
    _, (_, dk) = ad.gradients(lambda xx, kk: ad.total(ad.tan_k(xx, kk)), [x, 0.0])
    assert float(dk) == pytest.approx(np.sum(x ** 3) / 3, rel=1e-14)
    err = ad.finite_diff_check(lambda xx, kk: ad.total(ad.tan_k(xx, kk)), [x, 0.0])
    assert err <= 1e-5


def test_distance_curvature_gradient_across_branch():
    x, y = np.array([[0.1, 0.4]]), np.array([[-0.3, 0.2]])
    for k in (0.0, 1e-5, -1e-5, 1.1e-5):
        err = ad.finite_diff_check(lambda a, b, kk: ad.total(st.distance(a, b, kk)), [x, y, k])
        assert err <= 1e-5


def test_d_avg_gradient_five_node_graph():
    rng = np.random.default_rng(3)
    # random connected 5-node graph: path plus two chords
    d = np.array([[0, 1, 2, 1, 2], [1, 0, 1, 2, 1], [2, 1, 0, 1, 2],
                  [1, 2, 1, 0, 1], [2, 1, 2, 1, 0]], dtype=float)
    p1, p2 = rng.normal(size=(5, 2)) * 0.3, rng.normal(size=(5, 3)) * 0.3
    f = lambda a, b, ka, kb: d_avg_loss([a, b], [ka, kb], d, all_pairs(5))
    assert ad.finite_diff_check(f, [p1, p2, -0.7, 0.3]) <= 1e-5


def test_distance_gradient_bounded_near_coincidence():
    x = np.array([[0.2, 0.1]])
    y = x + 1e-9
    _, (gx, gy, gk) = ad.gradients(lambda a, b, k: ad.total(st.distance(a, b, k)), [x, y, -1.0])
    assert np.all(np.isfinite(gx)) and np.all(np.isfinite(gy)) and np.isfinite(gk)


def test_gradients_are_deterministic():
    rng = np.random.default_rng(4)
    x, y = rng.normal(size=(20, 2)) * 0.3, rng.normal(size=(20, 2)) * 0.3
    f = lambda a, b, k: ad.total(st.distance(a, b, k))
    _, g1 = ad.gradients(f, [x, y, -1.0])
    _, g2 = ad.gradients(f, [x, y, -1.0])
    for a, b in zip(g1, g2):
        assert np.array_equal(a, b)


def test_topological_order():
    tape = ad.Tape()
    x = tape.lift(np.ones(2))
    ad.total(ad.norm2(x * 2.0) + x)
    for i, parents in enumerate(tape._parents):
        assert all(p < i for p in parents)
