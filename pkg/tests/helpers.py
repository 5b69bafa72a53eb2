"""Frozen random-instance generators shared by the unit and acceptance tests.

Each generator is a pure function of its seed (seeds are namespaced with a
fixed prefix so the families never collide). Expected values elsewhere in
the suite were produced by these exact generators; do not reorder the rng
draws.
"""

import numpy as np

from greedyprune import (
    Dataset,
    DeepMLP,
    FeatureInstance,
    MLPBlock,
    TwoLayerNet,
    build_feature_instance,
    gamma_exact_2d,
)


def clustered_instance(seed):
    """Instance with near-duplicate neurons and a teacher from the same
    cluster: the target sits close to the feature hull and the hull is
    tiny, which keeps the telescoped decay bound comfortably satisfiable.
    """
    rng = np.random.default_rng([101, seed])
    d = int(rng.integers(3, 8))
    m = int(rng.integers(2, 11))
    n = int(rng.integers(10, 51))
    base_a = rng.uniform(-1.0, 1.0, size=d)
    base_b = float(rng.choice([-1.0, 1.0]) * rng.uniform(1.5, 3.0))
    scale = float(rng.choice([0.02, 0.05, 0.1]))
    a = base_a + scale * rng.uniform(-1.0, 1.0, size=(n, d))
    b = base_b * (1.0 + scale * rng.uniform(-1.0, 1.0, size=n))
    net = TwoLayerNet(a=a, b=b, activation="tanh")
    x = rng.standard_normal((m, d))
    ta = base_a + scale * rng.uniform(-1.0, 1.0, size=(8, d))
    tb = base_b * (1.0 + scale * rng.uniform(-1.0, 1.0, size=8))
    teacher = TwoLayerNet(a=ta, b=tb, activation="tanh")
    y = teacher.predict(x)
    return build_feature_instance(net, Dataset(x=x, y=y))


def interior_2d_instance(seed):
    """m=2 instance whose target is a strictly interior hull point.

    The target is a random convex combination of the rows, resampled until
    the exact inradius clears 1e-3. Returns (instance, gamma result).
    """
    rng = np.random.default_rng([202, seed])
    for _ in range(100):
        d = int(rng.integers(2, 6))
        n = int(rng.integers(5, 51))
        net = TwoLayerNet(
            a=rng.uniform(-1, 1, (n, d)), b=rng.uniform(-2, 2, n), activation="tanh"
        )
        x = rng.standard_normal((2, d))
        base = build_feature_instance(net, Dataset(x=x, y=np.zeros(2)))
        alpha = rng.dirichlet(np.ones(n))
        inst = FeatureInstance(P=base.P, y_s=alpha @ base.P, provenance="direct")
        g = gamma_exact_2d(inst)
        if not g.degenerate and g.value > 1e-3:
            return inst, g
    raise RuntimeError(f"no interior instance for seed {seed}")


def generic_instance(seed):
    """Unstructured instance, n up to 60 rows, m up to 12 outputs."""
    rng = np.random.default_rng([303, seed])
    n = int(rng.integers(2, 61))
    m = int(rng.integers(1, 13))
    P = rng.standard_normal((n, m)) * rng.uniform(0.2, 3.0)
    y_s = rng.standard_normal(m) * rng.uniform(0.2, 2.0)
    return FeatureInstance(P=P, y_s=y_s, provenance="direct")


def small_instance(seed):
    """Instance small enough for exhaustive per-step search (n <= 8, m <= 3)."""
    rng = np.random.default_rng([404, seed])
    n = int(rng.integers(1, 9))
    m = int(rng.integers(1, 4))
    P = rng.standard_normal((n, m)) * rng.uniform(0.2, 3.0)
    y_s = rng.standard_normal(m) * rng.uniform(0.2, 2.0)
    return FeatureInstance(P=P, y_s=y_s, provenance="direct")


def fd_pair(i):
    """Small (net, dataset) pair for gradient checks; tanh on even i,
    sigmoid on odd."""
    rng = np.random.default_rng([505, i])
    act = "tanh" if i % 2 == 0 else "sigmoid"
    n = int(rng.integers(2, 9))
    d = int(rng.integers(1, 6))
    m = int(rng.integers(1, 11))
    net = TwoLayerNet(
        a=rng.uniform(-2, 2, (n, d)), b=rng.uniform(-3, 3, n), activation=act
    )
    data = Dataset(x=rng.standard_normal((m, d)), y=rng.standard_normal(m))
    return net, data


def planted_mlp(seed, jitter=0.002, d=6, k_proto=12, reps=4, widths=(8, 8, 1)):
    """Three-block model whose layers are k_proto prototypes repeated reps
    times with small jitter, so most neurons are redundant by design."""
    rng = np.random.default_rng([801, seed])
    blocks = []
    width_in = d
    for width_out in widths:
        base_a = rng.normal(0.0, 1.0, (k_proto, width_in))
        base_b = rng.uniform(-2.0, 2.0, (k_proto, width_out))
        n = k_proto * reps
        a = np.repeat(base_a, reps, axis=0) + jitter * rng.uniform(-1, 1, (n, width_in))
        b = np.repeat(base_b, reps, axis=0) + jitter * rng.uniform(-1, 1, (n, width_out))
        blocks.append(MLPBlock(a=a, b=b, activation="tanh"))
        width_in = width_out
    return DeepMLP(blocks=tuple(blocks))


def planted_task(seed, noise=0.05, m=200):
    """(model, dataset) pair: the planted model plus noisy self-labels, so
    the full model's loss is essentially the label noise floor."""
    model = planted_mlp(seed)
    rng = np.random.default_rng([802, seed])
    x = rng.normal(0.0, 1.0, (m, model.n_features))
    y = model.predict(x) + noise * rng.normal(0.0, 1.0, m)
    return model, Dataset(x=x, y=y)
