import numpy as np
import pytest

from mimolab.nets import Adam, Mlp, soft_update


def numerical_grad(f, flat, h=1e-5):
    g = np.zeros_like(flat)
    for i in range(flat.size):
        up, dn = flat.copy(), flat.copy()
        up[i] += h
        dn[i] -= h
        g[i] = (f(up) - f(dn)) / (2 * h)
    return g


def test_forward_shapes_and_bounds(rng):
    net = Mlp([4, 8, 3], output="tanh", rng=rng)
    y, _ = net.forward(rng.standard_normal((10, 4)))
    assert y.shape == (10, 3)
    assert np.all(np.abs(y) <= 1.0)


def test_zero_weight_tanh_outputs_zero(rng):
    net = Mlp([5, 6, 3], output="tanh", rng=rng)
    for p in net.parameters():
        p[...] = 0.0
    y, _ = net.forward(rng.standard_normal((4, 5)))
    assert np.array_equal(y, np.zeros((4, 3)))


def test_backward_matches_finite_differences_linear(rng):
    net = Mlp([5, 12, 1], output="linear", rng=rng)
    x = rng.standard_normal((7, 5))
    target = rng.standard_normal(7)

    def loss_at(flat):
        net.set_flat(flat)
        y, _ = net.forward(x)
        return float(np.mean((y[:, 0] - target) ** 2))

    flat0 = net.get_flat()
    net.set_flat(flat0)
    y, cache = net.forward(x)
    dy = (2.0 / len(target)) * (y[:, 0] - target)[:, None]
    grads, _ = net.backward(cache, dy)
    analytic = np.concatenate([g.ravel() for g in grads])
    numeric = numerical_grad(loss_at, flat0)
    assert np.allclose(analytic, numeric, rtol=1e-4, atol=1e-6)


def test_backward_matches_finite_differences_tanh(rng):
    net = Mlp([3, 8, 2], output="tanh", rng=rng)
    x = rng.standard_normal((5, 3))
    w = rng.standard_normal((5, 2))

    def obj_at(flat):
        net.set_flat(flat)
        y, _ = net.forward(x)
        return float(np.sum(w * y))

    flat0 = net.get_flat()
    net.set_flat(flat0)
    _, cache = net.forward(x)
    grads, _ = net.backward(cache, w)
    analytic = np.concatenate([g.ravel() for g in grads])
    numeric = numerical_grad(obj_at, flat0)
    assert np.allclose(analytic, numeric, rtol=1e-4, atol=1e-6)


def test_input_gradient_matches_finite_differences(rng):
    net = Mlp([4, 9, 1], output="linear", rng=rng)
    x0 = rng.standard_normal((1, 4))
    _, cache = net.forward(x0)
    _, dx = net.backward(cache, np.ones((1, 1)))
    numeric = np.zeros(4)
    for i in range(4):
        up, dn = x0.copy(), x0.copy()
        up[0, i] += 1e-5
        dn[0, i] -= 1e-5
        numeric[i] = (net.forward(up)[0][0, 0] - net.forward(dn)[0][0, 0]) / 2e-5
    assert np.allclose(dx[0], numeric, rtol=1e-4, atol=1e-6)


def test_dropout_train_vs_eval(rng):
    net = Mlp([6, 32, 1], output="linear", rng=rng, dropout=0.5)
    x = rng.standard_normal((3, 6))
    y1, _ = net.forward(x)
    y2, _ = net.forward(x)
    assert np.array_equal(y1, y2)  # eval mode deterministic
    t1, _ = net.forward(x, train=True, rng=np.random.default_rng(0))
    t2, _ = net.forward(x, train=True, rng=np.random.default_rng(1))
    assert not np.array_equal(t1, t2)  # dropout masks differ
    with pytest.raises(ValueError):
        net.forward(x, train=True)  # rng required


def test_adam_minimizes_quadratic():
    p = [np.array([5.0])]
    opt = Adam(p, lr=0.1)
    for _ in range(500):
        grad = [2.0 * p[0]]
        opt.step(p, grad)
    assert abs(p[0][0]) < 1e-3


def test_soft_update_endpoints(rng):
    a = Mlp([3, 4, 2], rng=rng)
    b = a.copy()
    for p in b.parameters():
        p += 1.0
    soft_update(b, a, tau=1.0)
    for pa, pb in zip(a.parameters(), b.parameters()):
        assert np.array_equal(pa, pb)
    c = a.copy()
    for p in c.parameters():
        p += 1.0
    before = [p.copy() for p in c.parameters()]
    soft_update(c, a, tau=0.0)
    for p, q in zip(c.parameters(), before):
        assert np.array_equal(p, q)


def test_soft_update_geometric_decay(rng):
    online = Mlp([3, 4, 2], rng=rng)
    target = online.copy()
    for p in target.parameters():
        p += rng.standard_normal(p.shape)
    tau = 0.05
    gap0 = np.linalg.norm(target.get_flat() - online.get_flat())
    n = 20
    for _ in range(n):
        soft_update(target, online, tau)
    gap = np.linalg.norm(target.get_flat() - online.get_flat())
    assert gap == pytest.approx(gap0 * (1 - tau) ** n, rel=1e-12)
