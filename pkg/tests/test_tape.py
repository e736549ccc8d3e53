import numpy as np
import pytest

from pwpinn import tape as tp
from pwpinn.errors import UsageError

from helpers import central_diff_params


def test_leaf_and_scalar_chain():
    t = tp.Tape()
    a = t.leaf(np.array(2.0), slot="a")
    b = t.leaf(np.array(3.0), slot="b")
    y = tp.add(tp.mul(a, b), tp.square(a))   # ab + a^2
    assert y.value == 10.0
    g = tp.backward(t, y)
    assert g["a"] == 7.0   # b + 2a
    assert g["b"] == 2.0


def test_untouched_parameter_gets_zero_gradient():
    t = tp.Tape()
    a = t.leaf(np.array([1.0, 2.0]), slot="used")
    t.leaf(np.array([[5.0, 6.0]]), slot="unused")
    y = tp.total(tp.square(a))
    g = tp.backward(t, y)
    assert np.array_equal(g["unused"], np.zeros((1, 2)))
    assert np.allclose(g["used"], [2.0, 4.0])


def test_backward_root_must_be_on_tape():
    t1, t2 = tp.Tape(), tp.Tape()
    a = t1.leaf(np.array(1.0), slot="a")
    y = tp.square(a)
    with pytest.raises(UsageError):
        tp.backward(t2, y)


def test_backward_rejects_non_scalar_root():
    t = tp.Tape()
    a = t.leaf(np.array([1.0, 2.0]), slot="a")
    with pytest.raises(UsageError):
        tp.backward(t, tp.square(a))


def test_constant_root_all_zero():
    t = tp.Tape()
    a = t.leaf(np.array([1.0, 2.0]), slot="a")
    c = t.leaf(np.array(4.0))        # no slot: plain differentiable constant
    y = tp.scale(c, 1.0)
    g = tp.backward(t, y)
    assert np.array_equal(g["a"], np.zeros(2))


def test_diamond_graph_accumulates_once():
    # y = (a + a) * a: dy/da = 4a; each node's vjp must fire exactly once
    t = tp.Tape()
    a = t.leaf(np.array(3.0), slot="a")
    s = tp.add(a, a)
    y = tp.mul(s, a)
    calls = {"n": 0}
    orig = s.vjp

    def counting(g):
        calls["n"] += 1
        return orig(g)

    s.vjp = counting
    g = tp.backward(t, y)
    assert g["a"] == 12.0
    assert calls["n"] == 1


def test_linearity_of_backward():
    # backward(2 * root) == 2 * backward(root), exactly (power-of-two scale)
    rng = np.random.default_rng(0)
    w = rng.normal(size=(3, 4))

    def build(alpha):
        t = tp.Tape()
        wn = t.leaf(w, slot="w")
        y = tp.mean(tp.square(tp.tanh(wn)))
        return t, tp.scale(y, alpha)

    t1, y1 = build(1.0)
    t2, y2 = build(2.0)
    g1 = tp.backward(t1, y1)["w"]
    g2 = tp.backward(t2, y2)["w"]
    assert np.array_equal(2.0 * g1, g2)


def test_replay_reproduces_bitwise():
    rng = np.random.default_rng(1)
    t = tp.Tape()
    w = t.leaf(rng.normal(size=(4, 3)), slot="w")
    b = t.leaf(rng.normal(size=4), slot="b")
    h = rng.normal(size=(10, 3))
    y = tp.mean(tp.square(tp.tanh(tp.affine(h, w, b))))
    assert t.replay(y) == y.value


def test_replay_rejects_foreign_node():
    t1, t2 = tp.Tape(), tp.Tape()
    a = t1.leaf(np.array(1.0))
    with pytest.raises(UsageError):
        t2.replay(tp.square(a))


def test_relu_subgradient_zero_at_zero():
    t = tp.Tape()
    a = t.leaf(np.array([-1.0, 0.0, 2.0]), slot="a")
    y = tp.total(tp.relu(a))
    g = tp.backward(t, y)
    assert np.array_equal(g["a"], [0.0, 0.0, 1.0])


def test_matrix_ops_against_fd():
    rng = np.random.default_rng(2)
    w = rng.normal(size=(5, 3))
    b = rng.normal(size=5)
    w2 = rng.normal(size=(2, 5))
    v = rng.normal(size=5)
    h = rng.normal(size=(7, 3))
    m = rng.normal(size=(6, 5))
    arrays = {"w": w, "b": b, "w2": w2, "v": v}

    def build():
        t = tp.Tape()
        wn, bn, vn = t.leaf(w, slot="w"), t.leaf(b, slot="b"), t.leaf(v, slot="v")
        w2n = t.leaf(w2, slot="w2")
        z = tp.tanh(tp.affine(h, wn, bn))            # (7, 5)
        z2 = tp.linmap(z, w2n)                       # (7, 2)
        s = tp.add_scalar(tp.const_matmul(m, vn), tp.dot_const(vn, np.arange(5.)))
        return tp.add(tp.mean(tp.square(z2)), tp.scale(tp.total(tp.square(s)), 0.01))

    node = build()
    g = tp.backward(node.tape, node)
    fd = central_diff_params(lambda: float(build().value), arrays)
    for slot in arrays:
        assert np.max(np.abs(g[slot] - fd[slot])) < 1e-6 * max(1, np.max(np.abs(fd[slot])))


def test_weighted_sum_and_addn():
    t = tp.Tape()
    a = t.leaf(np.array(1.0), slot="a")
    b = t.leaf(np.array(2.0), slot="b")
    c = t.leaf(np.array(3.0), slot="c")
    y = tp.weighted_sum([a, b, c], [0.2, 0.5, 0.3])
    assert np.isclose(y.value, 0.2 + 1.0 + 0.9)
    g = tp.backward(t, y)
    assert (g["a"], g["b"], g["c"]) == (0.2, 0.5, 0.3)
    z = tp.addn(a, b, c)
    assert z.value == 6.0
