"""Network and dataset representations, losses, and feature-map extraction.

Output conventions used everywhere in this package:

* a two-layer network computes ``f(x) = (1/N) sum_i b_i act(a_i . x)``
  (mean-field ``1/N`` scaling, no bias terms);
* ``loss_mean`` is the halved mean squared error
  ``L = (1/2m) sum_j (f(x_j) - y_j)^2``;
* ``vec_loss`` is the squared distance ``l(u) = ||u - y_s||^2`` between a
  point of the feature polytope and the scaled target ``y_s = y / sqrt(m)``.

The two scales are tied by the exact identity ``l = 2 L`` whenever ``u`` is
the feature-map average of a subnetwork; selection and geometry code works
in ``l``, training code works in ``L``.

All types are immutable values after construction and safe to share
read-only across threads.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .activations import Activation, get_activation


def _frozen_array(values, dtype=float):
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


def _require_finite(name, arr):
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")


@dataclass(frozen=True)
class Dataset:
    """A regression dataset of m points in d dimensions.

    Parameters
    ----------
    x : (m, d) array
        Input points, one per row.
    y : (m,) array
        Real-valued labels.
    """

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = _frozen_array(self.x)
        y = _frozen_array(self.y)
        if x.ndim != 2:
            raise ValueError(f"inputs must be 2-D, got shape {x.shape}")
        if y.ndim != 1:
            raise ValueError(f"labels must be 1-D, got shape {y.shape}")
        if x.shape[0] != y.shape[0]:
            raise ValueError(
                f"inputs have {x.shape[0]} rows but labels have {y.shape[0]}"
            )
        if x.shape[0] < 1 or x.shape[1] < 1:
            raise ValueError("dataset needs at least one point and one feature")
        # Boundedness is checked, not assumed.
        _require_finite("inputs", x)
        _require_finite("labels", y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n_samples(self) -> int:
        return self.x.shape[0]

    @property
    def n_features(self) -> int:
        return self.x.shape[1]


class Neuron(NamedTuple):
    """A single unit computing ``b * act(a . x)``."""

    a: np.ndarray
    b: float
    activation: Activation


@dataclass(frozen=True)
class TwoLayerNet:
    """Two-layer network ``f(x) = (1/N) sum_i b_i act(a_i . x)``.

    Parameters
    ----------
    a : (N, d) array
        Inner weights, one neuron per row.
    b : (N,) array
        Outer weights.
    activation : Activation or str
    """

    a: np.ndarray
    b: np.ndarray
    activation: Activation

    def __post_init__(self):
        a = _frozen_array(self.a)
        b = _frozen_array(self.b)
        if a.ndim != 2 or b.ndim != 1:
            raise ValueError(f"bad weight shapes a={a.shape} b={b.shape}")
        if a.shape[0] != b.shape[0]:
            raise ValueError(
                f"{a.shape[0]} inner weight rows but {b.shape[0]} outer weights"
            )
        if a.shape[0] < 1:
            raise ValueError("network needs at least one neuron")
        _require_finite("weights", a)
        _require_finite("weights", b)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "activation", get_activation(self.activation))

    @property
    def n_neurons(self) -> int:
        return self.a.shape[0]

    @property
    def n_features(self) -> int:
        return self.a.shape[1]

    def neuron(self, i: int) -> Neuron:
        return Neuron(self.a[i], float(self.b[i]), self.activation)

    def predict(self, x) -> np.ndarray:
        """Batch forward pass; x is (m, d), result is (m,)."""
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.n_features:
            raise ValueError(
                f"expected inputs of shape (m, {self.n_features}), got {x.shape}"
            )
        return self.b @ self.activation(self.a @ x.T) / self.n_neurons


def forward_two_layer(net: TwoLayerNet, x) -> float:
    """Evaluate the network on a single input vector."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != net.n_features:
        raise ValueError(f"expected a length-{net.n_features} vector, got {x.shape}")
    return float(net.predict(x[None, :])[0])


def loss_mean(model_or_predictions, dataset: Dataset) -> float:
    """Halved mean squared error ``(1/2m) sum_j (f(x_j) - y_j)^2``.

    Accepts either a model with a ``predict`` method or a precomputed
    prediction vector. Equals ``vec_loss / 2`` on the matching feature
    instance (see module docstring).
    """
    if hasattr(model_or_predictions, "predict"):
        preds = model_or_predictions.predict(dataset.x)
    else:
        preds = np.asarray(model_or_predictions, dtype=float)
    if preds.shape != dataset.y.shape:
        raise ValueError(
            f"predictions have shape {preds.shape}, labels {dataset.y.shape}"
        )
    r = preds - dataset.y
    return 0.5 * float(r @ r) / dataset.n_samples


def vec_loss(u, y_s) -> float:
    """Squared Euclidean distance ``||u - y_s||^2``."""
    u = np.asarray(u, dtype=float)
    y_s = np.asarray(y_s, dtype=float)
    if u.shape != y_s.shape:
        raise ValueError(f"shape mismatch {u.shape} vs {y_s.shape}")
    d = u - y_s
    return float(d @ d)


def feature_map(neuron: Neuron, dataset: Dataset) -> np.ndarray:
    """Feature map of one neuron: entry j is ``b * act(a . x_j) / sqrt(m)``.

    1-homogeneous in b: scaling the outer weight scales the whole vector.
    """
    a = np.asarray(neuron.a, dtype=float)
    if a.shape != (dataset.n_features,):
        raise ValueError(
            f"neuron has {a.shape} inner weights, dataset has {dataset.n_features} features"
        )
    return neuron.b * neuron.activation(dataset.x @ a) / np.sqrt(dataset.n_samples)


@dataclass(frozen=True)
class FeatureInstance:
    """Vertex matrix of the feature polytope plus the scaled target.

    Row i of P is the feature map of neuron i; y_s is ``labels / sqrt(m)``.
    ``provenance`` records whether the rows came from a network
    ("derived") or were specified directly ("direct").
    """

    P: np.ndarray
    y_s: np.ndarray
    provenance: str = "direct"

    def __post_init__(self):
        P = _frozen_array(self.P)
        y_s = _frozen_array(self.y_s)
        if P.ndim != 2 or y_s.ndim != 1 or P.shape[1] != y_s.shape[0]:
            raise ValueError(f"bad instance shapes P={P.shape} y_s={y_s.shape}")
        if self.provenance not in ("derived", "direct"):
            raise ValueError(f"unknown provenance {self.provenance!r}")
        _require_finite("P", P)
        _require_finite("y_s", y_s)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "y_s", y_s)

    @property
    def n_rows(self) -> int:
        return self.P.shape[0]

    @property
    def n_outputs(self) -> int:
        return self.P.shape[1]

    def fingerprint(self) -> str:
        """Short content hash used to tag reports."""
        h = hashlib.sha256()
        h.update(np.asarray(self.P.shape, dtype=np.int64).tobytes())
        h.update(self.P.tobytes())
        h.update(self.y_s.tobytes())
        return h.hexdigest()[:16]


def build_feature_instance(net: TwoLayerNet, dataset: Dataset) -> FeatureInstance:
    """Feature maps of every neuron stacked as rows, plus scaled labels."""
    if net.n_features != dataset.n_features:
        raise ValueError(
            f"network expects {net.n_features} features, dataset has {dataset.n_features}"
        )
    scale = np.sqrt(dataset.n_samples)
    P = net.b[:, None] * net.activation(net.a @ dataset.x.T) / scale
    return FeatureInstance(P=P, y_s=dataset.y / scale, provenance="derived")


def gen_toy_data(seed) -> tuple[Dataset, TwoLayerNet]:
    """Synthetic regression task from a wide random teacher.

    The teacher has 1000 sigmoid neurons with standard Gaussian inner
    weights in R^10 and outer weights uniform on (-5, 5). Inputs are 100
    standard Gaussian points; labels are the noiseless teacher outputs.
    Pure function of the seed.
    """
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((1000, 10))
    b = rng.uniform(-5.0, 5.0, 1000)
    teacher = TwoLayerNet(a=a, b=b, activation="sigmoid")
    x = rng.standard_normal((100, 10))
    y = teacher.predict(x)
    return Dataset(x=x, y=y), teacher


def init_random_net(n: int, d: int, seed, activation="tanh") -> TwoLayerNet:
    """Fresh network with all weights i.i.d. uniform on (-1, 1).

    Bounded-support initialization; the default student activation is tanh.
    Pure function of the seed.
    """
    if n < 1:
        raise ValueError("need at least one neuron")
    rng = np.random.default_rng(seed)
    a = rng.uniform(-1.0, 1.0, (n, d))
    b = rng.uniform(-1.0, 1.0, n)
    return TwoLayerNet(a=a, b=b, activation=activation)


@dataclass(frozen=True)
class MLPBlock:
    """One mean-field layer of vector-output neurons.

    Neuron j computes ``b_j * act(a_j . z)`` with ``a_j`` of length
    ``width_in`` and ``b_j`` of length ``width_out``; the block output is
    the average of the neuron outputs.
    """

    a: np.ndarray
    b: np.ndarray
    activation: Activation

    def __post_init__(self):
        a = _frozen_array(self.a)
        b = _frozen_array(self.b)
        if a.ndim != 2 or b.ndim != 2 or a.shape[0] != b.shape[0]:
            raise ValueError(f"bad block shapes a={a.shape} b={b.shape}")
        if a.shape[0] < 1:
            raise ValueError("block needs at least one neuron")
        _require_finite("weights", a)
        _require_finite("weights", b)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "activation", get_activation(self.activation))

    @property
    def n_neurons(self) -> int:
        return self.a.shape[0]

    @property
    def width_in(self) -> int:
        return self.a.shape[1]

    @property
    def width_out(self) -> int:
        return self.b.shape[1]

    def forward(self, z: np.ndarray) -> np.ndarray:
        """(m, width_in) -> (m, width_out)."""
        return self.activation(z @ self.a.T) @ self.b / self.n_neurons


@dataclass(frozen=True)
class DeepMLP:
    """Stack of mean-field blocks ending in a scalar output.

    A model with one block is exactly a two-layer network; each extra
    block adds one prunable hidden layer.
    """

    blocks: tuple

    def __post_init__(self):
        blocks = tuple(self.blocks)
        if not blocks:
            raise ValueError("model needs at least one block")
        for prev, cur in zip(blocks, blocks[1:]):
            if prev.width_out != cur.width_in:
                raise ValueError(
                    f"block widths do not chain: {prev.width_out} -> {cur.width_in}"
                )
        if blocks[-1].width_out != 1:
            raise ValueError("final block must produce a scalar output")
        object.__setattr__(self, "blocks", blocks)

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    @property
    def n_features(self) -> int:
        return self.blocks[0].width_in

    @property
    def n_neurons(self) -> int:
        return sum(blk.n_neurons for blk in self.blocks)

    def hidden(self, x, upto: int) -> np.ndarray:
        """Activations entering block ``upto`` (x itself for upto=0)."""
        z = np.asarray(x, dtype=float)
        for blk in self.blocks[:upto]:
            z = blk.forward(z)
        return z

    def predict(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.n_features:
            raise ValueError(
                f"expected inputs of shape (m, {self.n_features}), got {x.shape}"
            )
        return self.hidden(x, self.n_blocks)[:, 0]


def mlp_from_two_layer(net: TwoLayerNet) -> DeepMLP:
    """Embed a two-layer network as a single-block model (exact)."""
    return DeepMLP(blocks=(MLPBlock(net.a, net.b[:, None], net.activation),))


def two_layer_from_mlp(model: DeepMLP) -> TwoLayerNet:
    """Inverse of mlp_from_two_layer; requires a single-block model."""
    if model.n_blocks != 1:
        raise ValueError("only single-block models convert to TwoLayerNet")
    blk = model.blocks[0]
    return TwoLayerNet(a=blk.a, b=blk.b[:, 0], activation=blk.activation)


def init_random_mlp(d: int, block_specs, seed, activation="tanh") -> DeepMLP:
    """Random model from (n_neurons, width_out) specs per block.

    The last width_out must be 1. All weights i.i.d. uniform on (-1, 1);
    pure function of the seed.
    """
    rng = np.random.default_rng(seed)
    blocks = []
    width_in = d
    for n_neurons, width_out in block_specs:
        a = rng.uniform(-1.0, 1.0, (n_neurons, width_in))
        b = rng.uniform(-1.0, 1.0, (n_neurons, width_out))
        blocks.append(MLPBlock(a=a, b=b, activation=activation))
        width_in = width_out
    return DeepMLP(blocks=tuple(blocks))
