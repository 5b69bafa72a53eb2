"""Decay-rate experiment: size sweeps, log-log slope fits, and plotting.

The sweep trains a wide source network on the synthetic teacher task,
prunes it by greedy forward selection to each requested size, and trains
same-size networks from scratch as the comparison curve. Losses are in
loss_mean scale in the CSV so both curves are directly comparable.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .model import build_feature_instance, gen_toy_data, init_random_net, loss_mean
from .selection import MaxSize, run_forward
from .serialize import atomic_write
from .training import train_to_convergence


@dataclass(frozen=True)
class RateFit:
    """OLS fit of log10(loss) against log10(n)."""

    slope: float
    intercept: float
    r_squared: float
    points: tuple


def fit_loglog_slope(points) -> RateFit:
    """Least-squares slope on log-log axes.

    Non-positive losses cannot be placed on a log axis; they are dropped
    with a warning. At least 3 usable points are required.
    """
    pts = [(float(n), float(loss)) for n, loss in points]
    usable = [(n, loss) for n, loss in pts if loss > 0 and n > 0]
    if len(usable) < len(pts):
        warnings.warn(
            f"dropped {len(pts) - len(usable)} non-positive points from log-log fit",
            stacklevel=2,
        )
    if len(usable) < 3:
        raise ValueError(f"need at least 3 positive points, have {len(usable)}")
    x = np.log10([n for n, _ in usable])
    y = np.log10([loss for _, loss in usable])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_res = float(resid @ resid)
    centered = y - y.mean()
    ss_tot = float(centered @ centered)
    if ss_tot == 0.0:
        r_squared = 1.0 if ss_res <= 1e-30 else 0.0
    else:
        r_squared = 1.0 - ss_res / ss_tot
    return RateFit(
        slope=float(slope),
        intercept=float(intercept),
        r_squared=r_squared,
        points=tuple(usable),
    )


@dataclass(frozen=True)
class SweepConfig:
    """Hyperparameters of the rate sweep, recorded with the results.

    The default max_steps is deliberately small enough that it binds
    before the plateau test for every size in the default sweep: all
    networks then get the same optimization horizon, so losses compare
    training quality at a fixed budget rather than at (size-dependent)
    convergence. Raise max_steps to study the converged regime instead;
    narrow nets interpolate the 100-sample task when trained that far.
    """

    source_size: int = 1000
    step_size: float = 0.05
    max_steps: int = 16_000
    rel_tol: float = 1e-6
    window: int = 200

    def __post_init__(self):
        if self.source_size < 1:
            raise ValueError("source_size must be at least 1")
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")


def sweep_rate(seed, sizes, config: SweepConfig | None = None, csv_path=None):
    """Pruned-versus-scratch losses over subnetwork sizes.

    Returns (rows, info): rows is a list of (n, pruned_loss, scratch_loss)
    in the order given, info records the source loss and convergence
    flags. The whole sweep is a pure function of (seed, sizes, config).
    Seeds for the source init and each scratch run are derived from the
    sweep seed, so curves for different seeds are independent.
    """
    if config is None:
        config = SweepConfig()
    sizes = [int(n) for n in sizes]
    if not sizes:
        raise ValueError("sizes must be non-empty")
    if min(sizes) < 1 or max(sizes) > config.source_size:
        raise ValueError(f"sizes must lie in [1, {config.source_size}]")
    data, _ = gen_toy_data(seed)
    source = init_random_net(config.source_size, data.n_features, seed=[seed, 1])
    trained, _, source_converged = train_to_convergence(
        source,
        data,
        step_size=config.step_size,
        max_steps=config.max_steps,
        rel_tol=config.rel_tol,
        window=config.window,
    )
    instance = build_feature_instance(trained, data)
    forward = run_forward(instance, MaxSize(max(sizes)))
    rows = []
    scratch_converged = {}
    for n in sizes:
        pruned = forward.losses[n - 1] / 2.0
        net = init_random_net(n, data.n_features, seed=[seed, 2, n])
        scratch_net, _, conv = train_to_convergence(
            net,
            data,
            step_size=config.step_size,
            max_steps=config.max_steps,
            rel_tol=config.rel_tol,
            window=config.window,
        )
        scratch_converged[n] = conv
        rows.append((n, float(pruned), loss_mean(scratch_net, data)))
    info = {
        "source_loss": loss_mean(trained, data),
        "source_converged": source_converged,
        "scratch_converged": scratch_converged,
    }
    if csv_path is not None:
        lines = ["n,pruned_loss,scratch_loss"]
        for n, pruned, scratch in rows:
            lines.append(f"{n},{pruned!r},{scratch!r}")
        atomic_write(csv_path, "\n".join(lines) + "\n")
    return rows, info


_PALETTE = ("#1f6fb4", "#d1495b", "#3a945b", "#8a5fbf", "#c98a1c", "#4d4d4d")

_W, _H = 640, 480
_LEFT, _RIGHT, _TOP, _BOTTOM = 72, 608, 40, 420


def _decade_range(values):
    lo = np.floor(np.log10(min(values)))
    hi = np.ceil(np.log10(max(values)))
    if hi <= lo:
        hi = lo + 1
    return lo, hi


def emit_plot(series: dict, path):
    """Write a log-log line chart of the series as a standalone SVG.

    series maps a label to a sequence of (x, y) points; non-positive
    points are dropped with a warning since they have no place on log
    axes. Output is deterministic for fixed input.
    """
    if not series:
        raise ValueError("no series to plot")
    cleaned = {}
    for name, pts in series.items():
        kept = [(float(x), float(y)) for x, y in pts if x > 0 and y > 0]
        if len(kept) < len(list(pts)):
            warnings.warn(f"series {name!r}: dropped non-positive points", stacklevel=2)
        if not kept:
            raise ValueError(f"series {name!r} has no positive points")
        cleaned[name] = kept
    xs = [x for pts in cleaned.values() for x, _ in pts]
    ys = [y for pts in cleaned.values() for _, y in pts]
    x_lo, x_hi = _decade_range(xs)
    y_lo, y_hi = _decade_range(ys)

    def sx(x):
        return _LEFT + (np.log10(x) - x_lo) / (x_hi - x_lo) * (_RIGHT - _LEFT)

    def sy(y):
        return _BOTTOM - (np.log10(y) - y_lo) / (y_hi - y_lo) * (_BOTTOM - _TOP)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
    ]
    for k in range(int(x_lo), int(x_hi) + 1):
        px = sx(10.0 ** k)
        out.append(
            f'<line x1="{px:.2f}" y1="{_TOP}" x2="{px:.2f}" y2="{_BOTTOM}" '
            'stroke="#dddddd" stroke-width="1"/>'
        )
        out.append(
            f'<text x="{px:.2f}" y="{_BOTTOM + 18}" text-anchor="middle">1e{k}</text>'
        )
    for k in range(int(y_lo), int(y_hi) + 1):
        py = sy(10.0 ** k)
        out.append(
            f'<line x1="{_LEFT}" y1="{py:.2f}" x2="{_RIGHT}" y2="{py:.2f}" '
            'stroke="#dddddd" stroke-width="1"/>'
        )
        out.append(
            f'<text x="{_LEFT - 8}" y="{py:.2f}" text-anchor="end" '
            f'dominant-baseline="middle">1e{k}</text>'
        )
    out.append(
        f'<rect x="{_LEFT}" y="{_TOP}" width="{_RIGHT - _LEFT}" '
        f'height="{_BOTTOM - _TOP}" fill="none" stroke="#333333"/>'
    )
    for pos, (name, pts) in enumerate(cleaned.items()):
        color = _PALETTE[pos % len(_PALETTE)]
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
        out.append(
            f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="2"/>'
        )
        ly = _TOP + 16 + 18 * pos
        out.append(
            f'<line x1="{_RIGHT - 150}" y1="{ly}" x2="{_RIGHT - 120}" y2="{ly}" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        out.append(f'<text x="{_RIGHT - 112}" y="{ly + 4}">{name}</text>')
    out.append("</svg>")
    atomic_write(path, "\n".join(out) + "\n")
