import numpy as np
import pytest
from sklearn.base import clone

from greedyprune import (
    GreedySubnetSelector,
    LayerwiseMLPPruner,
    TwoLayerRegressor,
    init_random_net,
    loss_mean,
    subnet_from_counts,
)
from greedyprune.estimators import _as_dataset

from helpers import planted_task


def regression_task(seed=0, m=60, d=4):
    rng = np.random.default_rng(seed)
    teacher = init_random_net(25, d, seed=[seed, 1])
    X = rng.standard_normal((m, d))
    return X, teacher.predict(X)


def test_regressor_fit_predict_shapes_and_params():
    X, y = regression_task()
    reg = TwoLayerRegressor(n_neurons=40, max_steps=800, random_state=1)
    assert clone(reg).get_params()["n_neurons"] == 40
    reg.fit(X, y)
    preds = reg.predict(X)
    assert preds.shape == (60,)
    assert reg.n_features_in_ == 4
    assert reg.train_loss_ == pytest.approx(reg.loss_trace_[-1])
    assert reg.net_.n_neurons == 40
    # training actually reduced the loss
    assert reg.loss_trace_[-1] < 0.5 * reg.loss_trace_[0]


def test_regressor_rejects_bad_inputs():
    reg = TwoLayerRegressor(max_steps=10)
    with pytest.raises(ValueError):
        reg.fit(np.array([[np.nan, 1.0]]), np.array([1.0]))
    X, y = regression_task()
    reg.fit(X, y)
    with pytest.raises(ValueError):
        reg.predict(np.zeros((3, 7)))


def test_regressor_deterministic_in_random_state():
    X, y = regression_task()
    r1 = TwoLayerRegressor(n_neurons=15, max_steps=200, random_state=5).fit(X, y)
    r2 = TwoLayerRegressor(n_neurons=15, max_steps=200, random_state=5).fit(X, y)
    r3 = TwoLayerRegressor(n_neurons=15, max_steps=200, random_state=6).fit(X, y)
    np.testing.assert_array_equal(r1.net_.a, r2.net_.a)
    assert not np.array_equal(r1.net_.a, r3.net_.a)


def test_selector_forward_and_report():
    X, y = regression_task(1)
    reg = TwoLayerRegressor(n_neurons=60, max_steps=1500, random_state=2).fit(X, y)
    sel = GreedySubnetSelector(net=reg.net_, n_select=20).fit(X, y)
    assert sel.report_.method == "forward"
    assert sel.counts_.sum() == 20
    assert sel.subnet_.n_neurons == np.count_nonzero(sel.counts_)
    ds = _as_dataset(X, y)
    assert sel.loss_ == pytest.approx(loss_mean(sel.subnet_, ds), rel=1e-12)
    # the folded subnet reproduces the multiset average loss from the trace
    assert sel.loss_ == pytest.approx(sel.report_.losses[-1] / 2.0, rel=1e-9)
    assert sel.predict(X).shape == (60,)


def test_selector_eps_stop():
    X, y = regression_task(2)
    reg = TwoLayerRegressor(n_neurons=50, max_steps=1500, random_state=3).fit(X, y)
    ds = _as_dataset(X, y)
    full = loss_mean(reg.net_, ds)
    sel = GreedySubnetSelector(net=reg.net_, eps=2.0 * full).fit(X, y)
    assert sel.loss_ <= 3.0 * full + 1e-12
    assert sel.counts_.sum() <= 50


def test_selector_methods_and_validation():
    X, y = regression_task(3)
    net = init_random_net(12, 4, seed=7)
    for method in ("backward", "frank_wolfe", "random"):
        sel = GreedySubnetSelector(net=net, method=method, n_select=6).fit(X, y)
        assert sel.subnet_.n_neurons >= 1
    with pytest.raises(ValueError):
        GreedySubnetSelector(net=net, method="sideways").fit(X, y)
    with pytest.raises(ValueError):
        GreedySubnetSelector(net=None).fit(X, y)


def test_subnet_from_counts_folds_multiset_exactly():
    net = init_random_net(10, 3, seed=8)
    counts = np.zeros(10, dtype=np.int64)
    counts[2] = 3
    counts[5] = 1
    sub = subnet_from_counts(net, counts)
    assert sub.n_neurons == 2
    rng = np.random.default_rng(9)
    x = rng.standard_normal((7, 3))
    phi = net.activation(net.a @ x.T)
    want = (counts @ (net.b[:, None] * phi)) / counts.sum()
    np.testing.assert_allclose(sub.predict(x), want, rtol=1e-12)
    with pytest.raises(ValueError):
        subnet_from_counts(net, np.zeros(10, dtype=np.int64))


def test_pruner_end_to_end_with_finetune():
    model, data = planted_task(1)
    ref = loss_mean(model, data)
    pruner = LayerwiseMLPPruner(
        model=model,
        eps=1.05 * ref,
        batch_size=200,
        batch_seed=1,
        finetune_steps=300,
        finetune_step_size=0.5,
    )
    pruner.fit(data.x, data.y)
    assert pruner.model_.n_neurons < model.n_neurons
    assert len(pruner.reports_) == 3
    assert pruner.finetune_trace_[0] >= pruner.finetune_trace_[-1] - 1e-15
    assert pruner.predict(data.x).shape == (200,)
    clone(pruner)  # params survive sklearn cloning


def test_pruner_requires_model():
    X, y = regression_task(4)
    with pytest.raises(ValueError):
        LayerwiseMLPPruner().fit(X, y)
