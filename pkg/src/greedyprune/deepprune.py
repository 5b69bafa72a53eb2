"""Layer-wise greedy subnetwork selection for deep mean-field models.

Layers are pruned in input -> output order. Within a layer, candidates
are scored on a scheduled minibatch (one fresh batch per iteration,
shared across all candidates so scores are comparable), while the
stopping rule compares the full-training-set loss against a reference
(the pre-trained model's loss) with an absolute gap threshold eps.

After a layer is selected, the multiset weights and the 1/|S| scaling
are folded into the outer weights, so the pruned model is an ordinary
network ready for finetuning.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Dataset, DeepMLP, MLPBlock, loss_mean


@dataclass(frozen=True)
class LayerPruneConfig:
    """Stopping threshold, minibatch schedule, and per-layer cap.

    eps may be inf (stop after the first neuron). max_neurons=None caps
    each layer's multiset at the layer's own neuron count.
    """

    eps: float
    batch_size: int
    batch_seed: int = 0
    max_neurons: int | None = None

    def __post_init__(self):
        if not self.eps >= 0:
            raise ValueError("eps must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.max_neurons is not None and self.max_neurons < 1:
            raise ValueError("max_neurons must be at least 1")


@dataclass(frozen=True)
class LayerReport:
    """Per-iteration trace of one layer's selection."""

    layer: int
    counts: np.ndarray
    iters: np.ndarray
    chosen: np.ndarray
    loss_batch: np.ndarray
    loss_full: np.ndarray
    converged: bool


def score_candidates(model: DeepMLP, h: int, counts: np.ndarray, batch) -> np.ndarray:
    """Batch loss for each candidate extension of layer h's multiset.

    For every neuron index k, layer h is temporarily replaced by the mean
    over S union {k} (counts plus one at k) and the model is evaluated on
    the given (inputs, labels) batch. Pure function of its arguments.
    """
    bx, by = batch
    bx = np.asarray(bx, dtype=float)
    by = np.asarray(by, dtype=float)
    if not 0 <= h < model.n_blocks:
        raise ValueError(f"no block {h} in a {model.n_blocks}-block model")
    blk = model.blocks[h]
    counts = np.asarray(counts)
    if counts.shape != (blk.n_neurons,):
        raise ValueError("counts must have one entry per neuron of the layer")
    z_in = model.hidden(bx, h)
    phi = blk.activation(z_in @ blk.a.T)
    k_tot = int(counts.sum())
    base = (phi * counts) @ blk.b
    cand = (base[None, :, :] + np.einsum("bk,ko->kbo", phi, blk.b)) / (k_tot + 1)
    z = cand
    for down in model.blocks[h + 1 :]:
        z = down.activation(z @ down.a.T) @ down.b / down.n_neurons
    r = z[..., 0] - by
    return np.einsum("kb,kb->k", r, r) / (2.0 * bx.shape[0])


def fold_layer(blk: MLPBlock, counts: np.ndarray) -> MLPBlock:
    """Multiset average over the layer as an ordinary smaller layer.

    Keeps the selected neurons once each and rescales outer weights by
    count * n_selected / k_total, so the folded layer's mean-field output
    equals the multiset average exactly.
    """
    counts = np.asarray(counts, dtype=np.int64)
    active = np.flatnonzero(counts)
    if active.size == 0:
        raise ValueError("cannot fold an empty selection")
    k_tot = int(counts.sum())
    scale = counts[active] * active.size / k_tot
    return MLPBlock(
        a=blk.a[active],
        b=blk.b[active] * scale[:, None],
        activation=blk.activation,
    )


def replace_block(model: DeepMLP, h: int, new_block: MLPBlock) -> DeepMLP:
    blocks = list(model.blocks)
    blocks[h] = new_block
    return DeepMLP(blocks=tuple(blocks))


def prune_layer(
    model: DeepMLP,
    h: int,
    dataset: Dataset,
    config: LayerPruneConfig,
    reference_loss: float | None = None,
):
    """Greedy multiset selection for layer h of an otherwise fixed model.

    Adds the best-scoring neuron per iteration (ties to the smallest
    index) until the full-training-set loss is within eps of
    reference_loss or the cap is reached; the first iteration always adds
    one neuron before the gap test. The minibatch schedule is a pure
    function of (batch_seed, h). Returns (report, model with layer h
    replaced by the folded selection).
    """
    if reference_loss is None:
        reference_loss = loss_mean(model, dataset)
    blk = model.blocks[h]
    cap = config.max_neurons if config.max_neurons is not None else blk.n_neurons
    rng = np.random.default_rng([config.batch_seed, h])
    batch_size = min(config.batch_size, dataset.n_samples)
    counts = np.zeros(blk.n_neurons, dtype=np.int64)
    iters, chosen, loss_batch, loss_full = [], [], [], []
    converged = False
    while True:
        # Sorted so candidate scores do not depend on the draw order of an
        # otherwise identical sample subset.
        idx = np.sort(rng.choice(dataset.n_samples, size=batch_size, replace=False))
        scores = score_candidates(model, h, counts, (dataset.x[idx], dataset.y[idx]))
        pick = int(np.argmin(scores))
        counts[pick] += 1
        trial = replace_block(model, h, fold_layer(blk, counts))
        full = loss_mean(trial, dataset)
        iters.append(len(iters) + 1)
        chosen.append(pick)
        loss_batch.append(float(scores[pick]))
        loss_full.append(full)
        if full - reference_loss <= config.eps:
            converged = True
            break
        if counts.sum() >= cap:
            break
    report = LayerReport(
        layer=h,
        counts=counts,
        iters=np.array(iters, dtype=np.int64),
        chosen=np.array(chosen, dtype=np.int64),
        loss_batch=np.array(loss_batch),
        loss_full=np.array(loss_full),
        converged=converged,
    )
    return report, replace_block(model, h, fold_layer(blk, counts))


def prune_all_layers(model: DeepMLP, dataset: Dataset, config: LayerPruneConfig):
    """Prune every layer in input -> output order against the pre-trained loss.

    Each layer is selected with the current partially-pruned model; the
    reference loss is fixed once, from the model as given. Returns the
    pruned model and the per-layer reports.
    """
    reference = loss_mean(model, dataset)
    current = model
    reports = []
    for h in range(model.n_blocks):
        report, current = prune_layer(current, h, dataset, config, reference_loss=reference)
        reports.append(report)
    return current, reports
