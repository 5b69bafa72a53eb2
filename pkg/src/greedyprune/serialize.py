"""Plain-text model format, dataset CSV, and atomic file writes.

Model files are line oriented: a version line, named fields, matrices
row-major with one row per line. Floats are written with ``repr``, which
round-trips exactly, so save -> load -> save is byte identical.
"""

from __future__ import annotations

import os
import tempfile

import numpy as np

from .model import Dataset, DeepMLP, FeatureInstance, MLPBlock, TwoLayerNet

MAGIC = "greedyprune-model"
VERSION = 1


class ModelFormatError(ValueError):
    """Raised on malformed or unsupported model/dataset files."""


def atomic_write(path, text: str):
    """Write text to path via a temp file in the same directory + rename."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt_row(values) -> str:
    return " ".join(repr(float(v)) for v in np.atleast_1d(values))


def _model_text(model) -> str:
    lines = [f"{MAGIC} v{VERSION}"]
    if isinstance(model, TwoLayerNet):
        lines.append("kind two_layer")
        lines.append(f"activation {model.activation.kind}")
        lines.append(f"shape {model.n_neurons} {model.n_features}")
        for row in model.a:
            lines.append("a " + _fmt_row(row))
        lines.append("b " + _fmt_row(model.b))
    elif isinstance(model, DeepMLP):
        lines.append("kind deep_mlp")
        lines.append(f"blocks {model.n_blocks}")
        for idx, blk in enumerate(model.blocks):
            lines.append(f"block {idx}")
            lines.append(f"activation {blk.activation.kind}")
            lines.append(f"shape {blk.n_neurons} {blk.width_in} {blk.width_out}")
            for row in blk.a:
                lines.append("a " + _fmt_row(row))
            for row in blk.b:
                lines.append("b " + _fmt_row(row))
    elif isinstance(model, FeatureInstance):
        lines.append("kind feature_instance")
        lines.append(f"provenance {model.provenance}")
        lines.append(f"shape {model.n_rows} {model.n_outputs}")
        for row in model.P:
            lines.append("P " + _fmt_row(row))
        lines.append("y_s " + _fmt_row(model.y_s))
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    lines.append("end")
    return "\n".join(lines) + "\n"


def save_model(model, path):
    atomic_write(path, _model_text(model))


class _Lines:
    def __init__(self, text, path):
        self.lines = text.splitlines()
        self.pos = 0
        self.path = path

    def next(self, expect=None):
        if self.pos >= len(self.lines):
            raise ModelFormatError(f"{self.path}: truncated file at line {self.pos + 1}")
        line = self.lines[self.pos]
        self.pos += 1
        if expect is not None and not line.startswith(expect + " "):
            raise ModelFormatError(
                f"{self.path}: line {self.pos}: expected field {expect!r}, got {line!r}"
            )
        return line

    def field(self, name):
        return self.next(expect=name).split(" ", 1)[1]

    def floats(self, name, count):
        parts = self.next(expect=name).split()[1:]
        if len(parts) != count:
            raise ModelFormatError(
                f"{self.path}: line {self.pos}: expected {count} values, got {len(parts)}"
            )
        try:
            return np.array([float(p) for p in parts])
        except ValueError as exc:
            raise ModelFormatError(f"{self.path}: line {self.pos}: {exc}") from exc


def load_model(path):
    """Load a TwoLayerNet, DeepMLP, or FeatureInstance from a model file."""
    with open(path) as fh:
        text = fh.read()
    rd = _Lines(text, path)
    header = rd.next()
    if not header.startswith(MAGIC + " v"):
        raise ModelFormatError(f"{path}: not a {MAGIC} file")
    version = header[len(MAGIC) + 2 :]
    if version != str(VERSION):
        raise ModelFormatError(f"{path}: unsupported format version {version!r}")
    kind = rd.field("kind")
    if kind == "two_layer":
        activation = rd.field("activation")
        n, d = (int(v) for v in rd.field("shape").split())
        a = np.stack([rd.floats("a", d) for _ in range(n)])
        b = rd.floats("b", n)
        model = TwoLayerNet(a=a, b=b, activation=activation)
    elif kind == "deep_mlp":
        n_blocks = int(rd.field("blocks"))
        blocks = []
        for idx in range(n_blocks):
            if rd.field("block") != str(idx):
                raise ModelFormatError(f"{path}: blocks out of order near line {rd.pos}")
            activation = rd.field("activation")
            n, win, wout = (int(v) for v in rd.field("shape").split())
            a = np.stack([rd.floats("a", win) for _ in range(n)])
            b = np.stack([rd.floats("b", wout) for _ in range(n)])
            blocks.append(MLPBlock(a=a, b=b, activation=activation))
        model = DeepMLP(blocks=tuple(blocks))
    elif kind == "feature_instance":
        provenance = rd.field("provenance")
        n, m = (int(v) for v in rd.field("shape").split())
        P = np.stack([rd.floats("P", m) for _ in range(n)])
        y_s = rd.floats("y_s", m)
        model = FeatureInstance(P=P, y_s=y_s, provenance=provenance)
    else:
        raise ModelFormatError(f"{path}: unknown model kind {kind!r}")
    if rd.next() != "end":
        raise ModelFormatError(f"{path}: missing end marker")
    return model


def dataset_csv_text(dataset: Dataset) -> str:
    header = ",".join([f"x{i}" for i in range(dataset.n_features)] + ["y"])
    lines = [header]
    for row, label in zip(dataset.x, dataset.y):
        lines.append(",".join(repr(float(v)) for v in row) + "," + repr(float(label)))
    return "\n".join(lines) + "\n"


def save_dataset_csv(dataset: Dataset, path):
    atomic_write(path, dataset_csv_text(dataset))


def load_dataset_csv(path) -> Dataset:
    with open(path) as fh:
        lines = [ln for ln in fh.read().splitlines() if ln]
    if not lines:
        raise ModelFormatError(f"{path}: empty dataset file")
    cols = lines[0].split(",")
    d = len(cols) - 1
    if d < 1 or cols != [f"x{i}" for i in range(d)] + ["y"]:
        raise ModelFormatError(f"{path}: bad dataset header {lines[0]!r}")
    rows = []
    for i, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != d + 1:
            raise ModelFormatError(f"{path}: line {i}: expected {d + 1} columns")
        try:
            rows.append([float(p) for p in parts])
        except ValueError as exc:
            raise ModelFormatError(f"{path}: line {i}: {exc}") from exc
    data = np.array(rows)
    return Dataset(x=data[:, :d], y=data[:, d])


def trace_csv_text(losses) -> str:
    lines = ["step,loss"]
    for step, loss in enumerate(np.asarray(losses, dtype=float)):
        lines.append(f"{step},{float(loss)!r}")
    return "\n".join(lines) + "\n"


def report_csv_text(report) -> str:
    """One row per selection step: size,chosen_index,vec_loss."""
    lines = ["size,chosen_index,vec_loss"]
    for size, chosen, loss in zip(report.sizes, report.chosen, report.losses):
        lines.append(f"{size},{chosen},{float(loss)!r}")
    return "\n".join(lines) + "\n"


# Keys like wall time vary between identical runs; keeping them out of the
# sidecar preserves byte-for-byte reproducibility of artifacts.
_VOLATILE_META = ("wall_time_s",)


def report_meta_text(report) -> str:
    pairs = [
        ("method", report.method),
        ("fingerprint", report.fingerprint),
        ("initial_loss", repr(float(report.initial_loss))),
        ("final_loss", repr(float(report.final_loss))),
        ("n_steps", str(len(report.sizes))),
    ]
    for key in sorted(report.metadata):
        if key in _VOLATILE_META:
            continue
        value = report.metadata[key]
        pairs.append((key, repr(value) if isinstance(value, float) else str(value)))
    return "".join(f"{k} = {v}\n" for k, v in pairs)


def deep_trace_csv_text(reports) -> str:
    """Per-layer pruning traces flattened into one CSV."""
    lines = ["layer,iter,chosen,loss_batch,loss_full"]
    for rep in reports:
        for it, chosen, lb, lf in zip(
            rep.iters, rep.chosen, rep.loss_batch, rep.loss_full
        ):
            lines.append(f"{rep.layer},{it},{chosen},{float(lb)!r},{float(lf)!r}")
    return "\n".join(lines) + "\n"


def read_csv_columns(path) -> dict:
    """Read a numeric CSV with a header row into {column: float array}."""
    with open(path) as fh:
        lines = [ln for ln in fh.read().splitlines() if ln]
    if not lines:
        raise ModelFormatError(f"{path}: empty CSV file")
    names = lines[0].split(",")
    columns = {name: [] for name in names}
    if len(columns) != len(names):
        raise ModelFormatError(f"{path}: duplicate column names in {lines[0]!r}")
    for i, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != len(names):
            raise ModelFormatError(f"{path}: line {i}: expected {len(names)} columns")
        for name, part in zip(names, parts):
            try:
                columns[name].append(float(part))
            except ValueError as exc:
                raise ModelFormatError(f"{path}: line {i}: {exc}") from exc
    return {name: np.array(vals) for name, vals in columns.items()}
