"""Feature-polytope geometry and proof-level bound checkers.

The polytope is the convex hull of the rows of a FeatureInstance. This
module computes the best simplex-weighted loss l* (conditional gradient
with a duality-gap certificate), the polytope diameter D, the interior
radius gamma at y_s, and verifies three inequalities that every greedy
forward trace is expected to satisfy:

* telescoped bound:   l(u_k) <= (l(u_0) - l*) / k + l*
* per-step recursion: l(u_k) <= (1 - 1/k) l(u_{k-1}) + l*/k + C/k^2
* residual bound:     ||w_k|| <= max(sqrt(C), C/2, C/(2 gamma))

with C = D^2 and w_k = k (y_s - u_k), so ||w_k|| = k sqrt(l(u_k)).
An upper bound for l* only loosens the right-hand sides, so a certified
upper estimate (loss from lstar_solve) keeps all three checks sound.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError
from scipy.spatial.distance import pdist

from .model import FeatureInstance, vec_loss
from .selection import PruneReport


@dataclass(frozen=True)
class SimplexSolution:
    """Output of the simplex-constrained least-squares solve.

    The true optimum is sandwiched: loss - fw_gap <= l* <= loss.
    """

    alpha: np.ndarray
    loss: float
    fw_gap: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class GammaResult:
    """Interior radius at y_s with its provenance.

    kind is "exact-2d" (planar hull computation) or
    "monte-carlo-upper-bound" (sampled support directions; an upper bound
    of the true radius, and negative when y_s is certified outside).
    """

    value: float
    kind: str
    degenerate: bool = False


@dataclass(frozen=True)
class PolytopeStats:
    diameter: float
    gamma: GammaResult
    member: bool
    member_tol: float


@dataclass(frozen=True)
class CheckResult:
    """Outcome of a bound check over a trace.

    worst_margin is the smallest bound-minus-loss slack seen (negative
    means violated); first_fail is the earliest failing k. skipped means
    the check's precondition (gamma > 0) did not hold.
    """

    passed: bool
    worst_margin: float
    first_fail: int | None = None
    skipped: bool = False
    margins: np.ndarray | None = None


def lstar_solve(instance: FeatureInstance, tol: float = 1e-10, max_iters: int = 50_000) -> SimplexSolution:
    """Minimize ||P^T alpha - y_s||^2 over the simplex by conditional gradient.

    Uses exact line search toward the best vertex each iteration and stops
    once the duality gap <grad, u - P_j> falls below tol. If the iteration
    cap is hit, the best iterate so far is returned with its gap; the
    caller decides whether that is good enough.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    P, y = instance.P, instance.y_s
    diff = P - y
    start = int(np.argmin(np.einsum("ij,ij->i", diff, diff)))
    alpha = np.zeros(instance.n_rows)
    alpha[start] = 1.0
    u = P[start].copy()
    iterations = 0
    for iterations in range(1, max_iters + 1):
        grad = 2.0 * (u - y)
        scores = P @ grad
        j = int(np.argmin(scores))
        gap = float(u @ grad - scores[j])
        if gap <= tol:
            break
        step_dir = P[j] - u
        denom = float(step_dir @ step_dir)
        if denom == 0.0:
            break
        # Exact line search for a quadratic: argmin_t l(u + t d), clipped to [0, 1].
        t = min(1.0, max(0.0, -float(grad @ step_dir) / (2.0 * denom)))
        if t == 0.0:
            break
        u = u + t * step_dir
        alpha *= 1.0 - t
        alpha[j] += t
    grad = 2.0 * (u - y)
    scores = P @ grad
    gap = max(float(u @ grad - scores.min()), 0.0)
    return SimplexSolution(
        alpha=alpha,
        loss=vec_loss(u, y),
        fw_gap=gap,
        iterations=iterations,
        converged=gap <= tol,
    )


def lstar_binary(instance: FeatureInstance, max_subset_size: int) -> float:
    """Exhaustive minimum of vec_loss over averages of subsets up to a size cap.

    A lower-bound probe for the best subset-average loss: exact when the
    cap reaches n_rows, otherwise the minimum over the searched sizes.
    The cap is guarded at 20 to keep the enumeration tractable.
    """
    if max_subset_size < 1:
        raise ValueError("subset size cap must be at least 1")
    if max_subset_size > 20:
        raise ValueError("subset size cap above 20 is combinatorially infeasible")
    P, y = instance.P, instance.y_s
    n = instance.n_rows
    best = np.inf
    chunk = 100_000
    for size in range(1, min(max_subset_size, n) + 1):
        combos = itertools.combinations(range(n), size)
        while True:
            block = list(itertools.islice(combos, chunk))
            if not block:
                break
            means = P[np.array(block)].mean(axis=1)
            diff = means - y
            best = min(best, float(np.einsum("ij,ij->i", diff, diff).min()))
    return best


def diameter(instance: FeatureInstance) -> float:
    """Max pairwise Euclidean distance among rows (0 for a single row)."""
    if instance.n_rows < 2:
        return 0.0
    return float(pdist(instance.P).max())


def gamma_exact_2d(instance: FeatureInstance) -> GammaResult:
    """Exact interior radius at y_s for planar instances.

    Builds the convex hull of the rows and returns the minimum distance
    from y_s to the supporting lines of the hull edges, or 0 when y_s is
    outside or on the hull. A degenerate (collinear) point set yields 0
    with the degeneracy flag set.
    """
    if instance.n_outputs != 2:
        raise ValueError("exact gamma is only computed for m = 2")
    if instance.n_rows < 3:
        return GammaResult(0.0, "exact-2d", degenerate=True)
    try:
        hull = ConvexHull(instance.P)
    except QhullError:
        return GammaResult(0.0, "exact-2d", degenerate=True)
    # Qhull normalizes equations so normal . x + offset <= 0 inside.
    eq = hull.equations
    dists = -(eq[:, :2] @ instance.y_s + eq[:, 2])
    value = float(dists.min())
    return GammaResult(max(value, 0.0), "exact-2d", degenerate=False)


def gamma_estimate(instance: FeatureInstance, n_directions: int = 4096, seed=0) -> GammaResult:
    """Sampled support-function radius: min over unit directions v of
    max_i <P_i - y_s, v>.

    An upper bound of the true interior radius (fewer directions can only
    raise the minimum); a negative value certifies y_s outside the hull.
    Deterministic given the seed.
    """
    if instance.n_outputs < 2:
        raise ValueError("need at least 2 output dimensions")
    if n_directions < 1:
        raise ValueError("need at least one direction")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((n_directions, instance.n_outputs))
    v /= np.maximum(np.linalg.norm(v, axis=1, keepdims=True), 1e-300)
    support = (instance.P - instance.y_s) @ v.T
    return GammaResult(float(support.max(axis=0).min()), "monte-carlo-upper-bound")


def membership(instance: FeatureInstance, tol: float = 1e-9) -> bool:
    """Whether y_s lies in the hull up to sqrt(tol) distance, via l* <= tol."""
    sol = lstar_solve(instance, tol=tol)
    return sol.loss <= tol


def polytope_stats(
    instance: FeatureInstance,
    n_directions: int = 4096,
    seed=0,
    member_tol: float = 1e-9,
) -> PolytopeStats:
    if instance.n_outputs == 2:
        gamma = gamma_exact_2d(instance)
    else:
        gamma = gamma_estimate(instance, n_directions=n_directions, seed=seed)
    return PolytopeStats(
        diameter=diameter(instance),
        gamma=gamma,
        member=membership(instance, tol=member_tol),
        member_tol=member_tol,
    )


def _require_forward(report: PruneReport):
    if report.method != "forward":
        raise ValueError(f"bound checks apply to forward traces, got {report.method!r}")


def check_prop1_bound(report: PruneReport, lstar_upper: float, slack: float = 1e-9) -> CheckResult:
    """Telescoped rate bound l(u_k) <= (l(u_0) - lstar_upper)/k + lstar_upper."""
    _require_forward(report)
    if report.sizes.size == 0:
        return CheckResult(passed=True, worst_margin=np.inf)
    k = report.sizes.astype(float)
    bounds = (report.initial_loss - lstar_upper) / k + lstar_upper
    margins = bounds - report.losses
    failing = np.flatnonzero(margins < -slack)
    return CheckResult(
        passed=failing.size == 0,
        worst_margin=float(margins.min()),
        first_fail=int(report.sizes[failing[0]]) if failing.size else None,
        margins=margins,
    )


def check_step_recursion(
    report: PruneReport, lstar_upper: float, diameter: float, slack: float = 1e-9
) -> CheckResult:
    """Per-step recursion with C = diameter^2:
    l(u_k) <= (1 - 1/k) l(u_{k-1}) + lstar_upper/k + C/k^2.
    """
    _require_forward(report)
    if report.sizes.size == 0:
        return CheckResult(passed=True, worst_margin=np.inf)
    c = diameter * diameter
    prev = report.initial_loss
    margins = np.empty(report.sizes.size)
    for pos, (k, loss) in enumerate(zip(report.sizes, report.losses)):
        bound = (1.0 - 1.0 / k) * prev + lstar_upper / k + c / (k * k)
        margins[pos] = bound - loss
        prev = loss
    failing = np.flatnonzero(margins < -slack)
    return CheckResult(
        passed=failing.size == 0,
        worst_margin=float(margins.min()),
        first_fail=int(report.sizes[failing[0]]) if failing.size else None,
        margins=margins,
    )


def check_w_bound(
    report: PruneReport, gamma: GammaResult, diameter: float, slack: float = 1e-9
) -> CheckResult:
    """Residual bound ||w_k|| <= max(sqrt(C), C/2, C/(2 gamma)), C = diameter^2.

    Requires an exact gamma: sampled estimates only upper-bound the true
    radius, and an overestimated gamma shrinks C/(2 gamma), which could
    fail the check spuriously. gamma <= 0 means the interior condition
    does not hold and the check is reported as skipped.
    """
    _require_forward(report)
    if gamma.kind != "exact-2d":
        raise ValueError("check_w_bound needs an exact gamma, not an estimate")
    if gamma.value <= 0.0 or gamma.degenerate:
        return CheckResult(passed=False, worst_margin=np.nan, skipped=True)
    if report.sizes.size == 0:
        return CheckResult(passed=True, worst_margin=np.inf)
    c = diameter * diameter
    bound = max(np.sqrt(c), c / 2.0, c / (2.0 * gamma.value))
    w_norms = report.sizes * np.sqrt(report.losses)
    margins = bound - w_norms
    failing = np.flatnonzero(margins < -slack)
    return CheckResult(
        passed=failing.size == 0,
        worst_margin=float(margins.min()),
        first_fail=int(report.sizes[failing[0]]) if failing.size else None,
        margins=margins,
    )
