import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize

from unfairedge.fitting import Adam, LinearCombiner, SoftmaxMLP, project_simplex, simplex_least_squares, train_mlp


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=8))
def test_projection_lands_on_simplex_and_is_closest(values):
    v = np.array(values)
    w = project_simplex(v)
    assert np.all(w >= 0) and w.sum() == pytest.approx(1.0, abs=1e-12)
    # optimality: v - w is constant on the support and no larger off it
    r = v - w
    support = w > 1e-12
    assert np.ptp(r[support]) < 1e-9
    if (~support).any():
        assert r[~support].max() <= r[support].min() + 1e-9


def _slsqp(A, y):
    n = A.shape[1]
    res = minimize(lambda w: np.sum((A @ w - y) ** 2), np.full(n, 1 / n), jac=lambda w: 2 * A.T @ (A @ w - y),
                   bounds=[(0, 1)] * n, constraints=[{"type": "eq", "fun": lambda w: w.sum() - 1}],
                   method="SLSQP", options={"ftol": 1e-15, "maxiter": 1000})
    return res.x


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_simplex_least_squares_matches_slsqp(seed):
    rng = np.random.default_rng(seed)
    A = rng.uniform(size=(30, int(rng.integers(2, 5))))
    y = rng.uniform(size=30)
    w, _, converged = simplex_least_squares(A, y)
    ref = _slsqp(A, y)
    assert converged
    assert np.sum((A @ w - y) ** 2) <= np.sum((A @ ref - y) ** 2) + 1e-9
    assert np.all(w >= 0) and w.sum() == pytest.approx(1.0, abs=1e-12)


def test_single_channel_is_forced_to_one():
    w, n_iter, converged = simplex_least_squares(np.ones((4, 1)), np.zeros(4))
    assert w.tolist() == [1.0] and converged and n_iter == 0


def test_linear_backward_matches_finite_difference():
    rng = np.random.default_rng(0)
    net = LinearCombiner(project_simplex(rng.normal(size=3)))
    inputs = rng.uniform(size=(3, 5, 2))
    dout = rng.normal(size=(5, 2))
    g = net.backward_flat(inputs, dout)
    for i in range(3):
        e = np.zeros(3)
        e[i] = 1e-6
        up = np.sum(LinearCombiner(net.weights + e).forward(inputs)[0] * dout)
        dn = np.sum(LinearCombiner(net.weights - e).forward(inputs)[0] * dout)
        assert g[i] == pytest.approx((up - dn) / 2e-6, abs=1e-8)


def test_mlp_gradient_matches_finite_difference():
    rng = np.random.default_rng(1)
    net = SoftmaxMLP.initialize(6, (5, 4), 3, rng)
    inputs = rng.uniform(size=(2, 7, 3))
    dout = rng.normal(size=(7, 3))
    out, cache = net.forward(inputs)
    g = net.backward_flat(cache, dout)
    base = net.flat.copy()
    for i in rng.choice(base.size, size=25, replace=False):
        net.flat[:] = base
        net.flat[i] += 1e-6
        up = np.sum(net.forward(inputs)[0] * dout)
        net.flat[i] -= 2e-6
        dn = np.sum(net.forward(inputs)[0] * dout)
        assert g[i] == pytest.approx((up - dn) / 2e-6, abs=1e-7)
    net.flat[:] = base


def test_mlp_outputs_are_distributions():
    rng = np.random.default_rng(2)
    net = SoftmaxMLP.initialize(4, (16, 16), 2, rng)
    out, _ = net.forward(rng.uniform(size=(2, 9, 2)))
    assert np.all((out >= 0) & (out <= 1))
    np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-12)


def test_adam_first_step_has_learning_rate_size():
    opt = Adam(lr=1e-3)
    step = opt.delta(np.array([3.0, -0.5, 1e-3]))
    np.testing.assert_allclose(np.abs(step), 1e-3, rtol=1e-4)


def test_training_keeps_best_loss():
    rng = np.random.default_rng(3)
    net = SoftmaxMLP.initialize(4, (8,), 2, rng)
    inputs = rng.uniform(size=(2, 6, 2))
    target = rng.dirichlet(np.ones(2), size=6)
    before = float(np.mean((net.forward(inputs)[0] - target) ** 2))
    loss = train_mlp(net, inputs, target, epochs=300, lr=1e-2)
    assert loss <= before
    assert loss == pytest.approx(float(np.mean((net.forward(inputs)[0] - target) ** 2)), abs=1e-15)
