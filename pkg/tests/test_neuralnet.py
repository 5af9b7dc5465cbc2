import numpy as np
import pytest

from rbqos import neuralnet as nn


def test_init_deterministic_and_shaped():
    a = nn.init_network([4, 8, 2], ["softplus", "relu"], seed=5)
    b = nn.init_network([4, 8, 2], ["softplus", "relu"], seed=5)
    assert all(np.array_equal(x, y) for x, y in zip(a.weights, b.weights))
    assert a.weights[0].shape == (8, 4)
    assert a.weights[1].shape == (2, 8)
    assert all(np.all(bb == 0) for bb in a.biases)
    c = nn.init_network([4, 8, 2], ["softplus", "relu"], seed=6)
    assert not np.array_equal(a.weights[0], c.weights[0])


def test_init_variance_scaling():
    net = nn.init_network([1000, 1000], ["linear"], seed=0)
    var = net.weights[0].var()
    assert abs(var - 2.0 / 2000.0) / (2.0 / 2000.0) < 0.2


def test_init_validation():
    with pytest.raises(ValueError):
        nn.init_network([4], ["relu"], 0)
    with pytest.raises(ValueError):
        nn.init_network([4, 2], ["tanh"], 0)
    with pytest.raises(ValueError):
        nn.init_network([4, 2], ["relu", "relu"], 0)


def test_forward_zero_net_relu():
    net = nn.init_network([3, 4, 2], ["softplus", "relu"], seed=0)
    for w in net.weights:
        w[:] = 0.0
    out, _ = nn.forward(net, np.ones((5, 3)))
    assert np.all(out == 0.0)


def test_forward_identity_returns_standardized_input():
    net = nn.init_network([3, 3], ["linear"], seed=0)
    net.weights[0] = np.eye(3)
    data = np.random.default_rng(1).normal(5.0, 2.0, size=(40, 3))
    nn.fit_standardization(net, data)
    out, _ = nn.forward(net, data[:6])
    assert np.allclose(out, (data[:6] - net.input_mean) / net.input_std)


def test_forward_deterministic_and_row_equivariant(rng):
    net = nn.init_network([5, 16, 3], ["softplus", "softplus"], seed=2)
    x = rng.normal(size=(7, 5))
    out1, _ = nn.forward(net, x)
    out2, _ = nn.forward(net, x)
    assert np.array_equal(out1, out2)
    perm = rng.permutation(7)
    out_p, _ = nn.forward(net, x[perm])
    assert np.allclose(out_p, out1[perm])


def test_backward_matches_finite_differences(rng):
    net = nn.init_network([5, 12, 10, 4], ["softplus", "softplus", "relu"], seed=3)
    nn.fit_standardization(net, rng.normal(1.0, 2.0, size=(60, 5)))
    x = rng.normal(1.0, 2.0, size=(6, 5))
    w_loss = rng.normal(size=(6, 4))

    def loss():
        return float(np.sum(w_loss * nn.forward(net, x)[0]))

    out, cache = nn.forward(net, x)
    grads, d_x = nn.backward(net, cache, w_loss)
    h = 1e-6
    bad = total = 0
    for li in range(3):
        w = net.weights[li]
        for _ in range(25):
            i, j = rng.integers(w.shape[0]), rng.integers(w.shape[1])
            w[i, j] += h
            up = loss()
            w[i, j] -= 2 * h
            dn = loss()
            w[i, j] += h
            fd = (up - dn) / (2 * h)
            an = grads[li][0][i, j]
            total += 1
            if abs(fd - an) > 1e-5 * max(abs(fd), abs(an), 1e-6):
                bad += 1
    assert bad == 0 and total == 75
    # input gradient
    for _ in range(15):
        r, c = rng.integers(6), rng.integers(5)
        xp = x.copy(); xp[r, c] += h
        xm = x.copy(); xm[r, c] -= h
        fd = (float(np.sum(w_loss * nn.forward(net, xp)[0]))
              - float(np.sum(w_loss * nn.forward(net, xm)[0]))) / (2 * h)
        assert d_x[r, c] == pytest.approx(fd, rel=1e-5, abs=1e-8)


def test_backward_zero_and_linear(rng):
    net = nn.init_network([3, 6, 2], ["softplus", "softplus"], seed=4)
    x = rng.normal(size=(4, 3))
    _, cache = nn.forward(net, x)
    grads0, _ = nn.backward(net, cache, np.zeros((4, 2)))
    assert all(np.all(g[0] == 0) and np.all(g[1] == 0) for g in grads0)
    d = rng.normal(size=(4, 2))
    g1, _ = nn.backward(net, cache, d)
    g2, _ = nn.backward(net, cache, 2 * d)
    for a, b in zip(g1, g2):
        assert np.allclose(2 * a[0], b[0]) and np.allclose(2 * a[1], b[1])


def test_adam_zero_grad_no_change():
    net = nn.init_network([2, 3], ["linear"], seed=0)
    before = [w.copy() for w in net.weights]
    nn.adam_step(net, [(np.zeros((3, 2)), np.zeros(3))], lr=0.1)
    assert all(np.array_equal(a, b) for a, b in zip(before, net.weights))


def test_adam_step_magnitude_approaches_lr():
    net = nn.init_network([1, 1], ["linear"], seed=0)
    g = [(np.array([[3.7]]), np.array([0.0]))]
    prev = net.weights[0][0, 0]
    for _ in range(200):
        nn.adam_step(net, g, lr=0.01)
    step = prev - net.weights[0][0, 0]
    last = None
    nn.adam_step(net, g, lr=0.01)
    last = abs(net.weights[0][0, 0] - (prev - step))
    assert last == pytest.approx(0.01, rel=1e-3)


def test_adam_directions():
    # descend moves x toward lower loss of x^2; ascend raises it
    for direction, sign in (("descend", -1.0), ("ascend", 1.0)):
        net = nn.init_network([1, 1], ["linear"], seed=0)
        net.weights[0][0, 0] = 1.0
        grad = [(np.array([[2.0]]), np.array([0.0]))]  # dL/dw at w=1 for L=w^2
        nn.adam_step(net, grad, lr=0.05, direction=direction)
        assert np.sign(net.weights[0][0, 0] - 1.0) == sign
    with pytest.raises(ValueError):
        nn.adam_step(nn.init_network([1, 1], ["linear"], 0),
                     [(np.zeros((1, 1)), np.zeros(1))], 0.1, direction="sideways")


def test_checkpoint_roundtrip(tmp_path, rng):
    net = nn.init_network([4, 7, 2], ["softplus", "relu"], seed=9)
    nn.fit_standardization(net, rng.normal(size=(30, 4)))
    nn.adam_step(net, [(rng.normal(size=(7, 4)), rng.normal(size=7)),
                       (rng.normal(size=(2, 7)), rng.normal(size=2))], lr=1e-3)
    path = tmp_path / "ckpt.json"
    nn.save_checkpoint(path, {"policy": nn.params_to_dict(net)})
    back = nn.params_from_dict(nn.load_checkpoint(path)["policy"])
    assert all(np.array_equal(a, b) for a, b in zip(net.weights, back.weights))
    assert all(np.array_equal(a, b) for a, b in zip(net.biases, back.biases))
    assert np.array_equal(net.input_mean, back.input_mean)
    assert np.array_equal(net.input_std, back.input_std)
    for (ma, mb), (na, nb) in zip(net.adam_m, back.adam_m):
        assert np.array_equal(ma, na) and np.array_equal(mb, nb)
    assert back.adam_t == net.adam_t
    with pytest.raises(ValueError):
        (tmp_path / "bad.json").write_text('{"format": "other"}')
        nn.load_checkpoint(tmp_path / "bad.json")
