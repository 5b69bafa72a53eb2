"""Euler-discretized gradient-descent training and SGD finetuning.

Two gradient conventions coexist and are tied by an exact scale factor:

* ``grad_loss`` returns the true gradient of ``loss_mean`` with respect to
  each neuron's weights (used by finite-difference checks and finetuning);
* ``mean_field_grad`` returns the per-neuron velocity field ``g`` under
  which training is stated, which equals ``-N * grad_loss``. ``gd_train``
  performs Euler steps ``theta += step_size * g``; this is plain gradient
  descent on ``loss_mean`` with an effective rate of ``N * step_size``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Dataset, DeepMLP, MLPBlock, TwoLayerNet, init_random_net, mlp_from_two_layer, two_layer_from_mlp


class TrainingDivergence(RuntimeError):
    """Loss exploded during training; try a smaller step size."""


@dataclass(frozen=True)
class TrainConfig:
    """Step size, budget, batching, and learning-rate schedule.

    ``batch_size=None`` means full batch. ``total_time`` is the simulated
    continuous time ``step_size * steps``. The cosine schedule decays
    monotonically from ``step_size`` to 0 across the step budget.
    """

    step_size: float = 0.05
    steps: int = 1000
    batch_size: int | None = None
    batch_seed: int = 0
    schedule: str = "constant"

    def __post_init__(self):
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if self.steps < 0:
            raise ValueError("steps must be non-negative")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.schedule not in ("constant", "cosine"):
            raise ValueError(f"unknown schedule {self.schedule!r}")

    @property
    def total_time(self) -> float:
        return self.step_size * self.steps

    def rate_at(self, step: int) -> float:
        if self.schedule == "constant":
            return self.step_size
        return 0.5 * self.step_size * (1.0 + np.cos(np.pi * step / self.steps))


def _forward_stats(net: TwoLayerNet, x: np.ndarray, y: np.ndarray):
    """Shared forward pass: hidden pre/post activations, residual, loss."""
    z = net.a @ x.T
    s = net.activation(z)
    preds = net.b @ s / net.n_neurons
    r = preds - y
    loss = 0.5 * float(r @ r) / x.shape[0]
    return z, s, r, loss


def mean_field_grad(net: TwoLayerNet, dataset: Dataset):
    """Per-neuron velocity field g_i = mean_j (y_j - f_j) * dsigma(x_j; theta_i).

    Equals ``-n_neurons`` times grad_loss; see module docstring.
    """
    z, s, r, _ = _forward_stats(net, dataset.x, dataset.y)
    coeff = -r / dataset.n_samples
    g_b = s @ coeff
    g_a = (net.activation.deriv(z) * coeff) @ dataset.x * net.b[:, None]
    return g_a, g_b


def grad_loss(net: TwoLayerNet, dataset: Dataset):
    """Exact gradient of loss_mean: (d/da_i, d/db_i), shapes (N, d) and (N,)."""
    g_a, g_b = mean_field_grad(net, dataset)
    n = net.n_neurons
    return -g_a / n, -g_b / n


def _check_divergence(loss: float, initial: float):
    if not np.isfinite(loss) or loss > 1e6 * max(initial, 1e-300):
        raise TrainingDivergence(
            f"loss {loss:.3e} exceeds 1e6 x initial {initial:.3e}; "
            "reduce the step size"
        )


def gd_train(net: TwoLayerNet, dataset: Dataset, config: TrainConfig):
    """Full-batch Euler training for config.steps steps.

    Returns the trained network and the loss trace (length steps + 1,
    entry t is the loss after t steps).
    """
    if config.batch_size is not None:
        raise ValueError("gd_train is full-batch; use sgd_finetune for minibatches")
    x, y = dataset.x, dataset.y
    a = net.a.copy()
    b = net.b.copy()
    act = net.activation
    n = net.n_neurons
    m = dataset.n_samples
    z = a @ x.T
    s = act(z)
    r = b @ s / n - y
    loss = 0.5 * float(r @ r) / m
    trace = [loss]
    initial = loss
    for step in range(config.steps):
        coeff = -r / m
        g_b = s @ coeff
        g_a = (act.deriv(z) * coeff) @ x * b[:, None]
        eta = config.rate_at(step)
        a += eta * g_a
        b += eta * g_b
        z = a @ x.T
        s = act(z)
        r = b @ s / n - y
        loss = 0.5 * float(r @ r) / m
        _check_divergence(loss, initial)
        trace.append(loss)
    return TwoLayerNet(a=a, b=b, activation=act), np.array(trace)


def train_to_convergence(
    net: TwoLayerNet,
    dataset: Dataset,
    step_size: float = 0.05,
    max_steps: int = 100_000,
    rel_tol: float = 1e-6,
    window: int = 200,
):
    """Train until the loss stops moving or the step budget runs out.

    Convergence means the absolute loss change across the trailing window
    is below rel_tol times the loss at the window start. Returns
    (net, trace, converged).
    """
    x, y = dataset.x, dataset.y
    a = net.a.copy()
    b = net.b.copy()
    act = net.activation
    n = net.n_neurons
    m = dataset.n_samples
    z = a @ x.T
    s = act(z)
    r = b @ s / n - y
    loss = 0.5 * float(r @ r) / m
    trace = [loss]
    initial = loss
    converged = False
    for step in range(max_steps):
        coeff = -r / m
        g_b = s @ coeff
        g_a = (act.deriv(z) * coeff) @ x * b[:, None]
        a += step_size * g_a
        b += step_size * g_b
        z = a @ x.T
        s = act(z)
        r = b @ s / n - y
        loss = 0.5 * float(r @ r) / m
        _check_divergence(loss, initial)
        trace.append(loss)
        if len(trace) > window:
            ref = trace[-1 - window]
            if abs(ref - loss) <= rel_tol * max(ref, 1e-300):
                converged = True
                break
    return TwoLayerNet(a=a, b=b, activation=act), np.array(trace), converged


def train_scratch(
    n: int,
    dataset: Dataset,
    config: TrainConfig | None = None,
    seed=0,
    rel_tol: float = 1e-6,
    window: int = 200,
) -> TwoLayerNet:
    """Train a fresh random network of size n to the convergence criterion."""
    if config is None:
        config = TrainConfig(step_size=0.05, steps=100_000)
    net = init_random_net(n, dataset.n_features, seed)
    trained, _, _ = train_to_convergence(
        net,
        dataset,
        step_size=config.step_size,
        max_steps=config.steps,
        rel_tol=rel_tol,
        window=window,
    )
    return trained


def _mlp_loss_and_grads(params, acts, x, y, want_grads=True):
    """Forward and backward through mean-field blocks.

    params is a list of (a, b) arrays per block. Returns (loss, grads)
    where grads mirrors params; the loss is loss_mean on (x, y).
    """
    m = x.shape[0]
    zs = [x]
    pre = []
    hid = []
    for (a, b), act in zip(params, acts):
        t = zs[-1] @ a.T
        s = act(t)
        pre.append(t)
        hid.append(s)
        zs.append(s @ b / a.shape[0])
    r = zs[-1][:, 0] - y
    loss = 0.5 * float(r @ r) / m
    if not want_grads:
        return loss, None
    grads = [None] * len(params)
    dz = (r / m)[:, None]
    for h in range(len(params) - 1, -1, -1):
        a, b = params[h]
        n_h = a.shape[0]
        db = hid[h].T @ dz / n_h
        ds = dz @ b.T / n_h
        dt = ds * acts[h].deriv(pre[h])
        da = dt.T @ zs[h]
        grads[h] = (da, db)
        if h > 0:
            dz = dt @ a
    return loss, grads


def sgd_finetune(model, dataset: Dataset, config: TrainConfig):
    """Minibatch SGD on loss_mean, returning the best-loss checkpoint.

    Works on TwoLayerNet and DeepMLP alike (the two-layer case is run as
    a single-block model and converted back). Uses plain gradients, so the
    model is treated as an ordinary network: mean-field scaling stays
    folded into the weights. The reported final loss is never above the
    initial loss, by the best-checkpoint convention. Returns
    (model, trace) with trace entry t the full-dataset loss after t steps.
    """
    was_two_layer = isinstance(model, TwoLayerNet)
    mlp = mlp_from_two_layer(model) if was_two_layer else model
    acts = [blk.activation for blk in mlp.blocks]
    params = [(blk.a.copy(), blk.b.copy()) for blk in mlp.blocks]
    x, y = dataset.x, dataset.y
    m = dataset.n_samples
    rng = np.random.default_rng(config.batch_seed)
    batch = m if config.batch_size is None else min(config.batch_size, m)

    loss, _ = _mlp_loss_and_grads(params, acts, x, y, want_grads=False)
    initial = loss
    trace = [loss]
    best_loss = loss
    best = [(a.copy(), b.copy()) for a, b in params]
    for step in range(config.steps):
        if batch == m:
            bx, by = x, y
        else:
            idx = rng.choice(m, size=batch, replace=False)
            bx, by = x[idx], y[idx]
        _, grads = _mlp_loss_and_grads(params, acts, bx, by)
        eta = config.rate_at(step)
        params = [
            (a - eta * da, b - eta * db)
            for (a, b), (da, db) in zip(params, grads)
        ]
        loss, _ = _mlp_loss_and_grads(params, acts, x, y, want_grads=False)
        _check_divergence(loss, initial)
        trace.append(loss)
        if loss < best_loss:
            best_loss = loss
            best = [(a.copy(), b.copy()) for a, b in params]
    blocks = tuple(
        MLPBlock(a=a, b=b, activation=act) for (a, b), act in zip(best, acts)
    )
    tuned = DeepMLP(blocks=blocks)
    if was_two_layer:
        return two_layer_from_mlp(tuned), np.array(trace)
    return tuned, np.array(trace)
