"""Scikit-learn style wrappers around the functional core.

These estimators make the train / prune / finetune workflow composable
with sklearn tooling (clone, pipelines, grid search). They validate
inputs with the standard sklearn helpers and keep all learned state in
trailing-underscore attributes.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .deepprune import LayerPruneConfig, prune_all_layers
from .model import Dataset, build_feature_instance, init_random_net, loss_mean
from .selection import EpsGap, MaxSize, run_backward, run_forward, run_frank_wolfe, run_random_subset
from .training import TrainConfig, sgd_finetune, train_to_convergence


def _as_dataset(X, y) -> Dataset:
    return Dataset(x=np.asarray(X, dtype=float), y=np.asarray(y, dtype=float))


class TwoLayerRegressor(RegressorMixin, BaseEstimator):
    """Mean-field two-layer network trained by full-batch gradient descent.

    Parameters
    ----------
    n_neurons : int
        Width of the network.
    activation : str
        "tanh", "sigmoid", or "relu".
    step_size : float
        Euler step size.
    max_steps : int
        Training step budget.
    rel_tol, window : float, int
        Convergence rule: stop when the loss changes by less than
        rel_tol (relative) across the trailing window.
    random_state : int
        Seed for the uniform weight initialization.
    """

    def __init__(
        self,
        n_neurons=100,
        activation="tanh",
        step_size=0.05,
        max_steps=20_000,
        rel_tol=1e-6,
        window=200,
        random_state=0,
    ):
        self.n_neurons = n_neurons
        self.activation = activation
        self.step_size = step_size
        self.max_steps = max_steps
        self.rel_tol = rel_tol
        self.window = window
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        dataset = _as_dataset(X, y)
        net = init_random_net(
            self.n_neurons, dataset.n_features, self.random_state, self.activation
        )
        self.net_, self.loss_trace_, self.converged_ = train_to_convergence(
            net,
            dataset,
            step_size=self.step_size,
            max_steps=self.max_steps,
            rel_tol=self.rel_tol,
            window=self.window,
        )
        self.n_features_in_ = dataset.n_features
        self.train_loss_ = float(self.loss_trace_[-1])
        return self

    def predict(self, X):
        check_is_fitted(self, "net_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}"
            )
        return self.net_.predict(X)


class GreedySubnetSelector(RegressorMixin, BaseEstimator):
    """Subnetwork selection from a trained two-layer network.

    Parameters
    ----------
    net : TwoLayerNet
        The pre-trained network whose neurons are candidates.
    method : str
        "forward", "backward", "frank_wolfe", or "random".
    n_select : int or None
        Selection budget for forward / frank_wolfe / random.
    eps : float or None
        If given (forward only), stop when the subnetwork loss is within
        eps of the pre-trained net's loss instead of at a fixed size.
    random_state : int
        Seed for the random baseline.

    After fit, ``subnet_`` is a TwoLayerNet with the multiset folded into
    its outer weights and ``report_`` holds the full selection trace.
    """

    def __init__(self, net=None, method="forward", n_select=50, eps=None, random_state=0):
        self.net = net
        self.method = method
        self.n_select = n_select
        self.eps = eps
        self.random_state = random_state

    def fit(self, X, y):
        if self.net is None:
            raise ValueError("a pre-trained net is required")
        X, y = check_X_y(X, y, y_numeric=True)
        dataset = _as_dataset(X, y)
        instance = build_feature_instance(self.net, dataset)
        if self.method == "forward":
            if self.eps is not None:
                stop = EpsGap(self.eps, loss_mean(self.net, dataset))
            else:
                stop = MaxSize(self.n_select)
            report = run_forward(instance, stop)
        elif self.method == "backward":
            report = run_backward(instance)
        elif self.method == "frank_wolfe":
            report = run_frank_wolfe(instance, self.n_select)
        elif self.method == "random":
            report = run_random_subset(instance, self.n_select, self.random_state)
        else:
            raise ValueError(f"unknown method {self.method!r}")
        self.report_ = report
        self.counts_ = report.counts
        self.subnet_ = subnet_from_counts(self.net, report.counts)
        self.loss_ = loss_mean(self.subnet_, dataset)
        self.n_features_in_ = dataset.n_features
        return self

    def predict(self, X):
        check_is_fitted(self, "subnet_")
        X = check_array(X)
        return self.subnet_.predict(X)


def subnet_from_counts(net, counts):
    """Fold a selection multiset into an ordinary two-layer network.

    Keeps each selected neuron once with outer weight
    b_i * count_i * n_selected / k_total, so the subnetwork's mean-field
    output equals the multiset average.
    """
    from .model import TwoLayerNet

    counts = np.asarray(counts, dtype=np.int64)
    active = np.flatnonzero(counts)
    if active.size == 0:
        raise ValueError("empty selection")
    k_tot = int(counts.sum())
    scale = counts[active] * active.size / k_tot
    return TwoLayerNet(
        a=net.a[active], b=net.b[active] * scale, activation=net.activation
    )


class LayerwiseMLPPruner(RegressorMixin, BaseEstimator):
    """Layer-wise greedy pruning of a deep model, with optional finetuning.

    Parameters
    ----------
    model : DeepMLP
        Pre-trained model to prune.
    eps : float
        Full-set loss-gap threshold per layer.
    batch_size, batch_seed : int
        Minibatch schedule for candidate scoring.
    max_neurons : int or None
        Per-layer selection cap.
    finetune_steps : int
        SGD steps after pruning (0 disables finetuning).
    finetune_step_size : float
        SGD step size.
    """

    def __init__(
        self,
        model=None,
        eps=0.0,
        batch_size=32,
        batch_seed=0,
        max_neurons=None,
        finetune_steps=0,
        finetune_step_size=0.5,
    ):
        self.model = model
        self.eps = eps
        self.batch_size = batch_size
        self.batch_seed = batch_seed
        self.max_neurons = max_neurons
        self.finetune_steps = finetune_steps
        self.finetune_step_size = finetune_step_size

    def fit(self, X, y):
        if self.model is None:
            raise ValueError("a pre-trained model is required")
        X, y = check_X_y(X, y, y_numeric=True)
        dataset = _as_dataset(X, y)
        config = LayerPruneConfig(
            eps=self.eps,
            batch_size=self.batch_size,
            batch_seed=self.batch_seed,
            max_neurons=self.max_neurons,
        )
        pruned, reports = prune_all_layers(self.model, dataset, config)
        if self.finetune_steps > 0:
            pruned, trace = sgd_finetune(
                pruned,
                dataset,
                TrainConfig(
                    step_size=self.finetune_step_size,
                    steps=self.finetune_steps,
                    batch_size=min(self.batch_size, dataset.n_samples),
                    batch_seed=self.batch_seed,
                ),
            )
            self.finetune_trace_ = trace
        self.model_ = pruned
        self.reports_ = reports
        self.loss_ = loss_mean(pruned, dataset)
        self.n_features_in_ = dataset.n_features
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X)
        return self.model_.predict(X)
