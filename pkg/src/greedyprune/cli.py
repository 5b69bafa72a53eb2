"""Command line interface.

Subcommands cover the full workflow: generate toy data, pretrain a
source network, prune it (several methods), sweep pruned-vs-scratch
rates, fit log-log slopes, inspect polytope geometry, verify the
hand-built counterexample, prune deep models layer by layer, and
finetune. Every subcommand is deterministic given its flags and seed,
and CSV artifacts are byte-for-byte reproducible.

Exit codes: 0 success, 2 bad flags or flag combinations, 3 missing or
malformed files, 4 non-converged runs or failed claims.

If the environment variable GREEDYPRUNE_OUT is set, relative output
paths are placed under that directory (inputs are never remapped).
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .deepprune import LayerPruneConfig, prune_all_layers
from .estimators import subnet_from_counts
from .geometry import diameter, gamma_estimate, gamma_exact_2d, lstar_solve
from .model import (
    Dataset,
    FeatureInstance,
    TwoLayerNet,
    build_feature_instance,
    gen_toy_data,
    init_random_net,
    loss_mean,
    vec_loss,
)
from .rates import SweepConfig, emit_plot, fit_loglog_slope, sweep_rate
from .selection import (
    EpsGap,
    MaxSize,
    counterexample_instance,
    run_backward,
    run_forward,
    run_frank_wolfe,
    run_random_subset,
)
from .serialize import (
    ModelFormatError,
    atomic_write,
    deep_trace_csv_text,
    load_dataset_csv,
    load_model,
    read_csv_columns,
    report_csv_text,
    report_meta_text,
    save_dataset_csv,
    save_model,
    trace_csv_text,
)
from .training import TrainConfig, TrainingDivergence, sgd_finetune, train_to_convergence

OUT_ENV = "GREEDYPRUNE_OUT"


class UsageError(Exception):
    """Flag combination errors detected after argparse."""


def _out(path: str) -> str:
    """Resolve an output path against the optional output directory."""
    base = os.environ.get(OUT_ENV, "")
    if not base or os.path.isabs(path):
        return path
    os.makedirs(base, exist_ok=True)
    return os.path.join(base, path)


def _say(*parts):
    print(" ".join(str(p) for p in parts))


def _load_instance(args):
    """FeatureInstance from --model/--data flags.

    A two-layer model file needs --data to evaluate features on; a
    feature-instance file stands alone. Returns (instance, net, dataset)
    with net/dataset set to None when not applicable.
    """
    model = load_model(args.model)
    if isinstance(model, FeatureInstance):
        if getattr(args, "data", None):
            raise UsageError("--data does not apply to a feature-instance file")
        return model, None, None
    if not isinstance(model, TwoLayerNet):
        raise UsageError(f"{args.model}: expected a two-layer model or feature instance")
    if not getattr(args, "data", None):
        raise UsageError("--data is required with a two-layer model")
    dataset = load_dataset_csv(args.data)
    return build_feature_instance(model, dataset), model, dataset


def cmd_gen_data(args) -> int:
    dataset, teacher = gen_toy_data(args.seed)
    out = _out(args.out)
    save_dataset_csv(dataset, out)
    _say("wrote", out, f"({dataset.n_samples} samples, {dataset.n_features} features)")
    if args.teacher_out:
        path = _out(args.teacher_out)
        save_model(teacher, path)
        _say("wrote", path)
    return 0


def cmd_pretrain(args) -> int:
    dataset = load_dataset_csv(args.data)
    net = init_random_net(args.n_neurons, dataset.n_features, args.seed, args.activation)
    trained, trace, converged = train_to_convergence(
        net,
        dataset,
        step_size=args.step_size,
        max_steps=args.max_steps,
        rel_tol=args.rel_tol,
        window=args.window,
    )
    out = _out(args.out)
    save_model(trained, out)
    _say("wrote", out)
    if args.trace_out:
        path = _out(args.trace_out)
        atomic_write(path, trace_csv_text(trace))
        _say("wrote", path)
    _say("steps", len(trace) - 1, "loss", repr(float(trace[-1])))
    if not converged:
        print(
            f"error: training did not converge within {args.max_steps} steps "
            "(model written anyway)",
            file=sys.stderr,
        )
        return 4
    return 0


def cmd_prune(args) -> int:
    instance, net, dataset = _load_instance(args)
    if args.method == "forward":
        if args.eps is not None and args.n_select is not None:
            raise UsageError("--eps and --n-select are mutually exclusive")
        if args.eps is not None:
            if net is not None:
                reference = loss_mean(net, dataset)
            else:
                u0 = instance.P.mean(axis=0)
                reference = vec_loss(u0, instance.y_s) / 2.0
            stop = EpsGap(args.eps, reference, max_steps=args.max_steps)
        elif args.n_select is not None:
            stop = MaxSize(args.n_select)
        else:
            raise UsageError("forward needs --n-select or --eps")
        report = run_forward(instance, stop, seed=args.seed)
    elif args.method == "backward":
        report = run_backward(instance)
    elif args.method == "frank-wolfe":
        if args.n_select is None:
            raise UsageError("frank-wolfe needs --n-select")
        report = run_frank_wolfe(instance, args.n_select)
    else:
        if args.n_select is None:
            raise UsageError("random needs --n-select")
        report = run_random_subset(instance, args.n_select, args.seed)
    out = _out(args.out)
    atomic_write(out, report_csv_text(report))
    atomic_write(out + ".meta", report_meta_text(report))
    _say("wrote", out, "and", out + ".meta")
    final_size = int(report.sizes[-1]) if report.sizes.size else 0
    _say("method", report.method, "final size", final_size, "vec loss", repr(report.final_loss))
    if args.model_out:
        if net is None:
            raise UsageError("--model-out needs a two-layer model input")
        if not report.counts.any():
            raise UsageError("--model-out with an empty selection (loosen --eps)")
        subnet = subnet_from_counts(net, report.counts)
        path = _out(args.model_out)
        save_model(subnet, path)
        _say("wrote", path, f"({subnet.n_neurons} distinct neurons)")
    if not report.metadata.get("converged", True):
        print("error: stop rule not reached within step cap", file=sys.stderr)
        return 4
    return 0


def cmd_sweep_rate(args) -> int:
    settings = {
        "seed": args.seed,
        "sizes": args.sizes,
        "source_size": args.source_size,
        "step_size": args.step_size,
        "max_steps": args.max_steps,
        "rel_tol": args.rel_tol,
        "window": args.window,
    }
    if args.config:
        for key, value in _read_config(args.config).items():
            if key not in settings:
                raise UsageError(f"{args.config}: unknown config key {key!r}")
            if _flag_given(key):
                continue
            settings[key] = value
    sizes = _parse_sizes(settings["sizes"])
    config = SweepConfig(
        source_size=int(settings["source_size"]),
        step_size=float(settings["step_size"]),
        max_steps=int(settings["max_steps"]),
        rel_tol=float(settings["rel_tol"]),
        window=int(settings["window"]),
    )
    out = _out(args.out)
    rows, info = sweep_rate(int(settings["seed"]), sizes, config, csv_path=out)
    _say("wrote", out)
    meta = [
        ("seed", settings["seed"]),
        ("sizes", ",".join(str(n) for n in sizes)),
        ("source_size", config.source_size),
        ("step_size", repr(config.step_size)),
        ("max_steps", config.max_steps),
        ("rel_tol", repr(config.rel_tol)),
        ("window", config.window),
        ("source_loss", repr(info["source_loss"])),
        ("source_converged", info["source_converged"]),
    ]
    atomic_write(out + ".meta", "".join(f"{k} = {v}\n" for k, v in meta))
    _say("wrote", out + ".meta")
    if args.plot:
        series = {
            "pruned": [(n, p) for n, p, _ in rows],
            "scratch": [(n, s) for n, _, s in rows],
        }
        path = _out(args.plot)
        emit_plot(series, path)
        _say("wrote", path)
    for n, pruned, scratch in rows:
        _say(f"n={n}", "pruned", repr(pruned), "scratch", repr(scratch))
    # Hitting the step budget is the normal stopping rule for the sweep
    # (fixed horizon for every size), so plateau flags are informational
    # here, unlike pretrain where the plateau is the goal.
    bad = [n for n, ok in info["scratch_converged"].items() if not ok]
    if not info["source_converged"]:
        _say("note: source stopped at the step budget, not a plateau")
    if bad:
        _say("note: scratch runs stopped at the step budget:", *map(str, bad))
    return 0


def cmd_fit_slope(args) -> int:
    columns = read_csv_columns(args.csv)
    for name in (args.x_col, args.y_col):
        if name not in columns:
            raise ModelFormatError(f"{args.csv}: no column {name!r}")
    points = list(zip(columns[args.x_col], columns[args.y_col]))
    fit = fit_loglog_slope(points)
    _say("slope", repr(fit.slope))
    _say("intercept", repr(fit.intercept))
    _say("r_squared", repr(fit.r_squared))
    _say("n_points", len(fit.points))
    return 0


def cmd_check_geometry(args) -> int:
    instance, _, _ = _load_instance(args)
    _say("rows", instance.n_rows, "outputs", instance.n_outputs)
    _say("fingerprint", instance.fingerprint())
    _say("diameter", repr(diameter(instance)))
    if instance.n_outputs == 2:
        gamma = gamma_exact_2d(instance)
    else:
        gamma = gamma_estimate(instance, n_directions=args.directions)
    degenerate = " degenerate" if gamma.degenerate else ""
    _say("gamma", repr(gamma.value), f"({gamma.kind}{degenerate})")
    solution = lstar_solve(instance, tol=args.tol, max_iters=args.max_iters)
    _say(
        "lstar_upper",
        repr(solution.loss),
        f"(gap {solution.fw_gap!r}, {solution.iterations} iterations)",
    )
    member = solution.loss <= args.member_tol
    _say("member", member, f"(tol {args.member_tol!r})")
    if not solution.converged:
        print(
            f"error: simplex solve did not reach gap {args.tol!r} "
            f"within {args.max_iters} iterations",
            file=sys.stderr,
        )
        return 4
    return 0


def cmd_counterexample(args) -> int:
    instance = counterexample_instance()
    checks = []

    u = (4 * instance.P[2] + instance.P[3]) / 5.0
    five = vec_loss(u, instance.y_s)
    checks.append((five <= 1e-12, f"multiset {{2:x4, 3:x1}} vec loss {five!r} (tol 1e-12)"))

    forward = run_forward(instance, MaxSize(50))
    hits = np.flatnonzero(forward.losses < 0.01)
    if hits.size:
        detail = f"loss {float(forward.losses[hits[0]])!r} at size {int(forward.sizes[hits[0]])}"
    else:
        detail = f"min loss {float(forward.losses.min())!r} over 50 steps"
    checks.append((hits.size > 0, f"forward reaches vec loss < 0.01: {detail}"))

    backward = run_backward(instance)
    worst = int(np.argmin(backward.losses))
    checks.append(
        (
            bool(np.all(backward.losses > 0.03)),
            "backward stays above 0.03 at every size: "
            f"min {float(backward.losses[worst])!r} at size {int(backward.sizes[worst])}",
        )
    )

    solution = lstar_solve(instance)
    checks.append((solution.loss <= 1e-8, f"lstar upper bound {solution.loss!r} (tol 1e-8)"))

    failed = 0
    for ok, text in checks:
        _say("PASS" if ok else "FAIL", text)
        failed += 0 if ok else 1
    if failed:
        print(f"error: {failed} claim(s) failed", file=sys.stderr)
        return 4
    return 0


def cmd_deep_prune(args) -> int:
    model = load_model(args.model)
    dataset = load_dataset_csv(args.data)
    if isinstance(model, TwoLayerNet):
        raise UsageError("deep-prune expects a deep model file")
    if (args.eps is None) == (args.eps_scale is None):
        raise UsageError("exactly one of --eps / --eps-scale is required")
    full_loss = loss_mean(model, dataset)
    eps = args.eps if args.eps is not None else args.eps_scale * full_loss
    config = LayerPruneConfig(
        eps=eps,
        batch_size=args.batch_size,
        batch_seed=args.batch_seed,
        max_neurons=args.max_neurons,
    )
    pruned, reports = prune_all_layers(model, dataset, config)
    out = _out(args.out)
    save_model(pruned, out)
    _say("wrote", out)
    if args.trace_out:
        path = _out(args.trace_out)
        atomic_write(path, deep_trace_csv_text(reports))
        _say("wrote", path)
    before = model.n_neurons
    after = pruned.n_neurons
    _say("eps", repr(float(eps)), "full loss", repr(full_loss))
    for rep, blk, old in zip(reports, pruned.blocks, model.blocks):
        flag = "" if rep.converged else " (cap hit)"
        _say(
            f"layer {rep.layer}:",
            f"kept {blk.n_neurons}/{old.n_neurons},",
            "full loss",
            repr(float(rep.loss_full[-1])) + flag,
        )
    _say("neurons", f"{before} -> {after}", "pruned loss", repr(loss_mean(pruned, dataset)))
    if not all(rep.converged for rep in reports):
        print("error: a layer hit its selection cap before reaching eps", file=sys.stderr)
        return 4
    return 0


def cmd_finetune(args) -> int:
    model = load_model(args.model)
    if isinstance(model, FeatureInstance):
        raise UsageError("finetune expects a network model file")
    dataset = load_dataset_csv(args.data)
    config = TrainConfig(
        step_size=args.step_size,
        steps=args.steps,
        batch_size=min(args.batch_size, dataset.n_samples),
        batch_seed=args.batch_seed,
        schedule=args.schedule,
    )
    tuned, trace = sgd_finetune(model, dataset, config)
    out = _out(args.out)
    save_model(tuned, out)
    _say("wrote", out)
    if args.trace_out:
        path = _out(args.trace_out)
        atomic_write(path, trace_csv_text(trace))
        _say("wrote", path)
    _say("loss", repr(float(trace[0])), "->", repr(float(trace[-1])))
    return 0


def _parse_sizes(text) -> list:
    if isinstance(text, list):
        return text
    try:
        sizes = [int(part) for part in str(text).split(",") if part.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --sizes value: {exc}") from exc
    if not sizes:
        raise UsageError("--sizes must list at least one size")
    return sizes


def _read_config(path) -> dict:
    """key = value lines; blank lines and # comments ignored."""
    settings = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ModelFormatError(f"{path}: line {lineno}: expected key = value")
            key, _, value = line.partition("=")
            settings[key.strip()] = value.strip()
    return settings


_GIVEN_FLAGS: set = set()


class _TrackedParser(argparse.ArgumentParser):
    """Records which optional flags were explicitly present on argv."""

    def parse_args(self, argv=None, namespace=None):
        args = super().parse_args(argv, namespace)
        argv = sys.argv[1:] if argv is None else list(argv)
        _GIVEN_FLAGS.clear()
        for token in argv:
            if token.startswith("--"):
                _GIVEN_FLAGS.add(token[2:].split("=", 1)[0].replace("-", "_"))
        return args


def _flag_given(name: str) -> bool:
    return name in _GIVEN_FLAGS


def build_parser() -> argparse.ArgumentParser:
    parser = _TrackedParser(
        prog="greedyprune",
        description="Greedy forward subnetwork selection and layer-wise pruning.",
        epilog=f"Set {OUT_ENV} to redirect relative output paths into a directory.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write the synthetic teacher-labeled dataset")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="toy_data.csv")
    p.add_argument("--teacher-out", default=None, help="also save the teacher network")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("pretrain", help="train a two-layer source network")
    p.add_argument("--data", required=True)
    p.add_argument("--n-neurons", type=int, default=1000)
    p.add_argument("--activation", choices=["tanh", "sigmoid", "relu"], default="tanh")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--step-size", type=float, default=0.05)
    p.add_argument("--max-steps", type=int, default=100_000)
    p.add_argument("--rel-tol", type=float, default=1e-6)
    p.add_argument("--window", type=int, default=200)
    p.add_argument("--out", required=True)
    p.add_argument("--trace-out", default=None)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("prune", help="select a subnetwork from a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", default=None)
    p.add_argument(
        "--method",
        choices=["forward", "backward", "frank-wolfe", "random"],
        default="forward",
    )
    p.add_argument("--n-select", type=int, default=None)
    p.add_argument("--eps", type=float, default=None, help="loss gap target (forward)")
    p.add_argument("--max-steps", type=int, default=10_000, help="cap for --eps runs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="report CSV (sidecar: <out>.meta)")
    p.add_argument("--model-out", default=None, help="save the folded subnetwork")
    p.set_defaults(func=cmd_prune)

    p = sub.add_parser("sweep-rate", help="pruned vs scratch losses across sizes")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sizes", default="8,16,32,64,128,256", help="comma separated")
    p.add_argument("--source-size", type=int, default=1000)
    p.add_argument("--step-size", type=float, default=0.05)
    p.add_argument("--max-steps", type=int, default=16_000, help="shared horizon")
    p.add_argument("--rel-tol", type=float, default=1e-6)
    p.add_argument("--window", type=int, default=200)
    p.add_argument("--config", default=None, help="key = value file; flags win")
    p.add_argument("--out", required=True)
    p.add_argument("--plot", default=None, help="also write an SVG plot")
    p.set_defaults(func=cmd_sweep_rate)

    p = sub.add_parser("fit-slope", help="least squares slope on log-log points")
    p.add_argument("csv")
    p.add_argument("--x-col", default="n")
    p.add_argument("--y-col", default="pruned_loss")
    p.set_defaults(func=cmd_fit_slope)

    # boundary targets make the duality gap decay like 1/k, so a very
    # tight gap target can never certify; 1e-7 still pins the loss to
    # well under the membership tolerance on interior and boundary cases
    p = sub.add_parser("check-geometry", help="polytope diagnostics for an instance")
    p.add_argument("--model", required=True)
    p.add_argument("--data", default=None)
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--max-iters", type=int, default=100_000)
    p.add_argument("--member-tol", type=float, default=1e-9)
    p.add_argument("--directions", type=int, default=4096)
    p.set_defaults(func=cmd_check_geometry)

    p = sub.add_parser("counterexample", help="verify the 43-neuron worked example")
    p.set_defaults(func=cmd_counterexample)

    p = sub.add_parser("deep-prune", help="layer-wise pruning of a deep model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--eps", type=float, default=None, help="absolute loss-gap threshold")
    p.add_argument(
        "--eps-scale",
        type=float,
        default=None,
        help="threshold as a multiple of the full model loss",
    )
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--batch-seed", type=int, default=0)
    p.add_argument("--max-neurons", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--trace-out", default=None)
    p.set_defaults(func=cmd_deep_prune)

    p = sub.add_parser("finetune", help="minibatch SGD from inherited weights")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--step-size", type=float, default=0.5)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--batch-seed", type=int, default=0)
    p.add_argument("--schedule", choices=["constant", "cosine"], default="constant")
    p.add_argument("--out", required=True)
    p.add_argument("--trace-out", default=None)
    p.set_defaults(func=cmd_finetune)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ModelFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except TrainingDivergence as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
