"""Subnetwork selection over the rows of a FeatureInstance.

All methods work on the polytope picture: a size-k multiset S of row
indices represents the subnetwork whose output is the running average
u = (1/k) sum_{i in S} P_i, and its quality is vec_loss(u) = ||u - y_s||^2.

Greedy forward selection has two interchangeable implementations:

* scan: argmin_i ||(k u + P_i) / (k+1) - y_s||^2 (direct enumeration);
* nearest: with the scaled residual w = k (y_s - u), expand
  (k+1)^2 ||(k u + P_i)/(k+1) - y_s||^2 = ||P_i - (y_s + w)||^2,
  so minimizing distance to the single target point y_s + w picks the
  same index. The two must agree on every reachable state.

Ties in every argmin are broken by the smallest index (np.argmin returns
the first minimizer), which keeps runs deterministic.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .model import FeatureInstance, vec_loss


@dataclass(frozen=True)
class MaxSize:
    """Stop after exactly n selections."""

    n: int

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("size bound must be non-negative")

    def describe(self) -> str:
        return f"max_size({self.n})"


@dataclass(frozen=True)
class EpsGap:
    """Stop once vec_loss(u)/2 - reference_loss <= eps.

    The comparison is in loss_mean scale (halved vector loss) against a
    caller-supplied reference, typically the pre-trained model's loss.
    max_steps is a hard cap; exhausting it marks the run non-converged.
    """

    eps: float
    reference_loss: float
    max_steps: int = 10_000

    def __post_init__(self):
        if not self.eps >= 0:
            raise ValueError("eps must be non-negative")

    def describe(self) -> str:
        return f"eps_gap(eps={self.eps!r}, reference={self.reference_loss!r}, max_steps={self.max_steps})"


class SelectionState:
    """Single-owner mutable state of a forward run.

    Maintains counts, k = sum(counts), and the running average u
    incrementally; w = k (y_s - u) is derived on demand.
    """

    def __init__(self, instance: FeatureInstance):
        self.instance = instance
        self.counts = np.zeros(instance.n_rows, dtype=np.int64)
        self.k = 0
        self.u = np.zeros(instance.n_outputs)

    @property
    def w(self) -> np.ndarray:
        return self.k * (self.instance.y_s - self.u)

    @property
    def loss(self) -> float:
        return vec_loss(self.u, self.instance.y_s)

    def apply(self, index: int):
        self.u = (self.k * self.u + self.instance.P[index]) / (self.k + 1)
        self.counts[index] += 1
        self.k += 1

    def recompute_u(self) -> np.ndarray:
        """u from counts alone, for consistency checks."""
        if self.k == 0:
            return np.zeros(self.instance.n_outputs)
        return self.counts @ self.instance.P / self.k


def forward_step_scan(instance: FeatureInstance, state: SelectionState) -> int:
    """Chosen index by direct enumeration of candidate averages."""
    cand = (state.k * state.u + instance.P) / (state.k + 1)
    diff = cand - instance.y_s
    losses = np.einsum("ij,ij->i", diff, diff)
    return int(np.argmin(losses))


def forward_step_nearest(instance: FeatureInstance, state: SelectionState) -> int:
    """Chosen index as the row nearest to the shifted target y_s + w."""
    target = (state.k + 1) * instance.y_s - state.k * state.u
    diff = instance.P - target
    dists = np.einsum("ij,ij->i", diff, diff)
    return int(np.argmin(dists))


@dataclass(frozen=True)
class PruneReport:
    """Trace and outcome of one selection run.

    sizes/chosen/losses are parallel arrays, one entry per recorded stage;
    chosen is -1 where no index applies (the initial full set of a
    backward run). initial_loss is vec_loss at the empty selection,
    ||y_s||^2, which the bound checkers need as l(u^0).
    """

    method: str
    fingerprint: str
    counts: np.ndarray
    sizes: np.ndarray
    chosen: np.ndarray
    losses: np.ndarray
    initial_loss: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        sizes = np.asarray(self.sizes, dtype=np.int64)
        chosen = np.asarray(self.chosen, dtype=np.int64)
        losses = np.asarray(self.losses, dtype=float)
        if not (sizes.shape == chosen.shape == losses.shape):
            raise ValueError("trace arrays must be parallel")
        if not np.all(np.isfinite(losses)):
            raise ValueError("trace losses must be finite")
        if sizes.size > 1:
            steps = np.diff(sizes)
            if self.method == "backward":
                if not np.all(steps == -1):
                    raise ValueError("backward sizes must decrease by 1")
            elif not np.all(steps == 1):
                raise ValueError("forward sizes must increase by 1")
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "chosen", chosen)
        object.__setattr__(self, "losses", losses)
        object.__setattr__(self, "counts", np.asarray(self.counts, dtype=np.int64))

    @property
    def final_loss(self) -> float:
        return float(self.losses[-1]) if self.losses.size else self.initial_loss


def run_forward(instance: FeatureInstance, stop, seed=None) -> PruneReport:
    """Greedy forward selection until the stop rule fires.

    stop is MaxSize(n) or EpsGap(eps, reference_loss). With EpsGap the
    gap test runs before each step, so an immediately satisfied threshold
    returns an empty multiset.
    """
    t0 = time.perf_counter()
    state = SelectionState(instance)
    sizes, chosen, losses = [], [], []
    converged = True
    if isinstance(stop, MaxSize):
        budget = stop.n
        while state.k < budget:
            i = forward_step_nearest(instance, state)
            state.apply(i)
            sizes.append(state.k)
            chosen.append(i)
            losses.append(state.loss)
    elif isinstance(stop, EpsGap):
        while True:
            if state.loss / 2.0 - stop.reference_loss <= stop.eps:
                break
            if state.k >= stop.max_steps:
                converged = False
                break
            i = forward_step_nearest(instance, state)
            state.apply(i)
            sizes.append(state.k)
            chosen.append(i)
            losses.append(state.loss)
    else:
        raise TypeError(f"unknown stop rule {stop!r}")
    return PruneReport(
        method="forward",
        fingerprint=instance.fingerprint(),
        counts=state.counts,
        sizes=np.array(sizes, dtype=np.int64),
        chosen=np.array(chosen, dtype=np.int64),
        losses=np.array(losses),
        initial_loss=vec_loss(np.zeros(instance.n_outputs), instance.y_s),
        metadata={
            "seed": seed,
            "stop": stop.describe(),
            "converged": converged,
            "wall_time_s": time.perf_counter() - t0,
        },
    )


def run_backward(instance: FeatureInstance) -> PruneReport:
    """Backward elimination from the full index set down to one neuron.

    Each stage removes the index whose removal minimizes the vec_loss of
    the plain average over the remaining indices (each index at most
    once; no multiset). The trace starts with the full set (chosen -1).
    """
    t0 = time.perf_counter()
    P, y_s = instance.P, instance.y_s
    n = instance.n_rows
    active = np.ones(n, dtype=bool)
    total = P.sum(axis=0)
    sizes = [n]
    chosen = [-1]
    losses = [vec_loss(total / n, y_s)]
    for remaining in range(n, 1, -1):
        idx = np.flatnonzero(active)
        cand = (total - P[idx]) / (remaining - 1)
        diff = cand - y_s
        cand_losses = np.einsum("ij,ij->i", diff, diff)
        drop = int(idx[np.argmin(cand_losses)])
        active[drop] = False
        total = total - P[drop]
        sizes.append(remaining - 1)
        chosen.append(drop)
        losses.append(vec_loss(total / (remaining - 1), y_s))
    return PruneReport(
        method="backward",
        fingerprint=instance.fingerprint(),
        counts=active.astype(np.int64),
        sizes=np.array(sizes, dtype=np.int64),
        chosen=np.array(chosen, dtype=np.int64),
        losses=np.array(losses),
        initial_loss=vec_loss(np.zeros(instance.n_outputs), instance.y_s),
        metadata={
            "seed": None,
            "stop": "single_neuron",
            "converged": True,
            "wall_time_s": time.perf_counter() - t0,
        },
    )


def run_frank_wolfe(instance: FeatureInstance, n: int) -> PruneReport:
    """Conditional-gradient baseline with step size 1/k.

    Step k picks the vertex minimizing <grad l(u), P_i> and moves
    u <- (1 - 1/k) u + (1/k) P_i. At k=1 this selects the row maximizing
    <y_s, P_i>.
    """
    if n < 1:
        raise ValueError("need at least one step")
    t0 = time.perf_counter()
    P, y_s = instance.P, instance.y_s
    counts = np.zeros(instance.n_rows, dtype=np.int64)
    u = np.zeros(instance.n_outputs)
    sizes, chosen, losses = [], [], []
    for k in range(1, n + 1):
        grad = 2.0 * (u - y_s)
        i = int(np.argmin(P @ grad))
        u = (1.0 - 1.0 / k) * u + P[i] / k
        counts[i] += 1
        sizes.append(k)
        chosen.append(i)
        losses.append(vec_loss(u, y_s))
    return PruneReport(
        method="frank-wolfe",
        fingerprint=instance.fingerprint(),
        counts=counts,
        sizes=np.array(sizes, dtype=np.int64),
        chosen=np.array(chosen, dtype=np.int64),
        losses=np.array(losses),
        initial_loss=vec_loss(np.zeros(instance.n_outputs), instance.y_s),
        metadata={
            "seed": None,
            "stop": f"max_size({n})",
            "converged": True,
            "wall_time_s": time.perf_counter() - t0,
        },
    )


def run_random_subset(instance: FeatureInstance, n: int, seed) -> PruneReport:
    """Baseline: n indices i.i.d. uniform with replacement; prefix-average trace."""
    if n < 1:
        raise ValueError("need at least one sample")
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, instance.n_rows, size=n)
    prefix = np.cumsum(instance.P[idx], axis=0) / np.arange(1, n + 1)[:, None]
    diff = prefix - instance.y_s
    losses = np.einsum("ij,ij->i", diff, diff)
    return PruneReport(
        method="random",
        fingerprint=instance.fingerprint(),
        counts=np.bincount(idx, minlength=instance.n_rows).astype(np.int64),
        sizes=np.arange(1, n + 1, dtype=np.int64),
        chosen=idx.astype(np.int64),
        losses=losses,
        initial_loss=vec_loss(np.zeros(instance.n_outputs), instance.y_s),
        metadata={
            "seed": seed,
            "stop": f"max_size({n})",
            "converged": True,
            "wall_time_s": time.perf_counter() - t0,
        },
    )


def counterexample_instance() -> FeatureInstance:
    """Hand-specified 43-vertex planar instance where backward elimination
    stays far from the optimum reachable by forward selection.

    Rows: [0, 1.5], [0, 0], [-0.5, 1], [2, 1], then
    [(-1.001)^(i-3) + 2, 1] for i = 5..43; target y_s = [0, 1]. The target
    is an interior point of the hull, and the multiset {row 2 x4, row 3
    x1} averages exactly to y_s.
    """
    P = np.zeros((43, 2))
    P[0] = [0.0, 1.5]
    P[1] = [0.0, 0.0]
    P[2] = [-0.5, 1.0]
    P[3] = [2.0, 1.0]
    for i in range(5, 44):
        P[i - 1] = [(-1.001) ** (i - 3) + 2.0, 1.0]
    return FeatureInstance(P=P, y_s=np.array([0.0, 1.0]), provenance="direct")
