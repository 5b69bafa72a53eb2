import numpy as np
import pytest

from greedyprune import (
    Dataset,
    DeepMLP,
    FeatureInstance,
    MLPBlock,
    Neuron,
    TwoLayerNet,
    build_feature_instance,
    feature_map,
    forward_two_layer,
    gen_toy_data,
    get_activation,
    init_random_mlp,
    init_random_net,
    loss_mean,
    mlp_from_two_layer,
    two_layer_from_mlp,
    vec_loss,
)


def tiny_net(n=3, d=2, seed=0, activation="tanh"):
    rng = np.random.default_rng(seed)
    return TwoLayerNet(
        a=rng.normal(size=(n, d)), b=rng.normal(size=n), activation=activation
    )


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(x=np.zeros(3), y=np.zeros(3))
    with pytest.raises(ValueError):
        Dataset(x=np.zeros((3, 2)), y=np.zeros(4))
    with pytest.raises(ValueError):
        Dataset(x=np.array([[np.nan, 0.0]]), y=np.zeros(1))
    ds = Dataset(x=np.zeros((5, 3)), y=np.ones(5))
    assert ds.n_samples == 5 and ds.n_features == 3


def test_dataset_arrays_are_frozen():
    ds = Dataset(x=np.zeros((2, 2)), y=np.zeros(2))
    with pytest.raises(ValueError):
        ds.x[0, 0] = 1.0


def test_two_layer_predict_matches_manual_average():
    net = tiny_net(n=4, d=3, seed=1)
    rng = np.random.default_rng(2)
    x = rng.normal(size=(6, 3))
    act = net.activation
    want = np.array(
        [np.mean([net.b[i] * act(net.a[i] @ xj) for i in range(4)]) for xj in x]
    )
    np.testing.assert_allclose(net.predict(x), want, rtol=1e-12)
    assert forward_two_layer(net, x[0]) == pytest.approx(want[0])


def test_forward_two_layer_rejects_bad_shape():
    net = tiny_net(d=2)
    with pytest.raises(ValueError):
        forward_two_layer(net, np.zeros(3))


def test_net_validation():
    with pytest.raises(ValueError):
        TwoLayerNet(a=np.zeros((2, 2)), b=np.zeros(3), activation="tanh")
    with pytest.raises(ValueError):
        TwoLayerNet(a=np.full((1, 1), np.inf), b=np.zeros(1), activation="tanh")
    with pytest.raises(ValueError):
        TwoLayerNet(a=np.zeros((1, 1)), b=np.zeros(1), activation="softplus")


def test_loss_mean_is_half_mse():
    net = tiny_net(seed=3)
    rng = np.random.default_rng(4)
    ds = Dataset(x=rng.normal(size=(7, 2)), y=rng.normal(size=7))
    r = net.predict(ds.x) - ds.y
    assert loss_mean(net, ds) == pytest.approx(0.5 * np.mean(r**2))
    # also accepts raw predictions
    assert loss_mean(net.predict(ds.x), ds) == pytest.approx(loss_mean(net, ds))


def test_vec_loss_is_twice_loss_mean_through_the_instance():
    # The y/sqrt(m) scaling is what makes the polytope story and the
    # training loss agree: ||u - y_s||^2 = 2 * loss_mean at matching u.
    net = tiny_net(n=5, d=2, seed=5)
    rng = np.random.default_rng(6)
    ds = Dataset(x=rng.normal(size=(9, 2)), y=rng.normal(size=9))
    inst = build_feature_instance(net, ds)
    u_full = inst.P.mean(axis=0)
    assert vec_loss(u_full, inst.y_s) == pytest.approx(2.0 * loss_mean(net, ds), rel=1e-12)


def test_feature_instance_rows_are_scaled_feature_maps():
    net = tiny_net(n=4, d=3, seed=7)
    rng = np.random.default_rng(8)
    ds = Dataset(x=rng.normal(size=(5, 3)), y=rng.normal(size=5))
    inst = build_feature_instance(net, ds)
    assert inst.P.shape == (4, 5)
    for i in range(4):
        row = feature_map(Neuron(net.a[i], float(net.b[i]), net.activation), ds)
        np.testing.assert_allclose(inst.P[i], row, rtol=1e-12)
    np.testing.assert_allclose(inst.y_s, ds.y / np.sqrt(5), rtol=1e-15)


def test_feature_map_is_homogeneous_in_b():
    rng = np.random.default_rng(9)
    ds = Dataset(x=rng.normal(size=(4, 2)), y=np.zeros(4))
    nrn = Neuron(rng.normal(size=2), 1.5, get_activation("tanh"))
    doubled = Neuron(nrn.a, 3.0, nrn.activation)
    np.testing.assert_allclose(
        feature_map(doubled, ds), 2.0 * feature_map(nrn, ds), rtol=1e-12
    )


def test_instance_fingerprint_changes_with_content():
    inst = FeatureInstance(P=np.eye(3), y_s=np.zeros(3), provenance="direct")
    same = FeatureInstance(P=np.eye(3), y_s=np.zeros(3), provenance="direct")
    other = FeatureInstance(P=np.eye(3), y_s=np.ones(3), provenance="direct")
    assert inst.fingerprint() == same.fingerprint()
    assert inst.fingerprint() != other.fingerprint()


def test_gen_toy_data_shapes_and_determinism():
    ds, teacher = gen_toy_data(0)
    ds2, _ = gen_toy_data(0)
    ds3, _ = gen_toy_data(1)
    assert ds.x.shape == (100, 10) and ds.y.shape == (100,)
    assert teacher.n_neurons == 1000
    assert teacher.activation.kind == "sigmoid"
    np.testing.assert_array_equal(ds.x, ds2.x)
    assert not np.array_equal(ds.y, ds3.y)
    # labels are the noiseless teacher outputs
    np.testing.assert_allclose(ds.y, teacher.predict(ds.x), rtol=1e-12)


def test_init_random_net_bounded_support():
    net = init_random_net(50, 4, seed=0)
    assert net.a.shape == (50, 4)
    assert np.all(np.abs(net.a) < 1.0) and np.all(np.abs(net.b) < 1.0)
    np.testing.assert_array_equal(init_random_net(50, 4, seed=0).a, net.a)


def test_mlp_round_trip_and_width_chaining():
    net = tiny_net(n=6, d=3, seed=10)
    mlp = mlp_from_two_layer(net)
    assert mlp.n_blocks == 1
    back = two_layer_from_mlp(mlp)
    np.testing.assert_array_equal(back.a, net.a)
    np.testing.assert_array_equal(back.b, net.b)
    rng = np.random.default_rng(11)
    x = rng.normal(size=(8, 3))
    np.testing.assert_allclose(mlp.predict(x), net.predict(x), rtol=1e-12)

    good = MLPBlock(a=np.zeros((2, 3)), b=np.zeros((2, 4)), activation="tanh")
    out = MLPBlock(a=np.zeros((3, 4)), b=np.zeros((3, 1)), activation="tanh")
    DeepMLP(blocks=(good, out))
    with pytest.raises(ValueError):
        DeepMLP(blocks=(good, good))
    with pytest.raises(ValueError):
        DeepMLP(blocks=(good,))  # final width_out must be 1


def test_init_random_mlp_specs():
    mlp = init_random_mlp(5, [(12, 4), (7, 1)], seed=0)
    assert mlp.n_blocks == 2
    assert mlp.n_neurons == 19
    assert mlp.blocks[0].width_in == 5
    assert mlp.blocks[1].width_in == 4
    y = mlp.predict(np.random.default_rng(1).normal(size=(3, 5)))
    assert y.shape == (3,) and np.all(np.isfinite(y))


def test_deep_hidden_prefixes():
    mlp = init_random_mlp(3, [(4, 2), (5, 1)], seed=2)
    x = np.random.default_rng(3).normal(size=(6, 3))
    np.testing.assert_array_equal(mlp.hidden(x, 0), x)
    h1 = mlp.blocks[0].forward(x)
    np.testing.assert_allclose(mlp.hidden(x, 1), h1, rtol=1e-12)
