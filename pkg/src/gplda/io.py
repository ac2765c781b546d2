"""File formats: labeled-curve CSV, model files, and run configuration.

CSV rows are ``label, v1, ..., vp``.  Model files are JSON with float
values written in full precision so a save/load round trip reproduces
the model bit for bit.  Run configuration is a flat ``key = value`` text
format with dotted section prefixes, designed to diff cleanly; every
field of :class:`RunConfig` has a printable default and the format/parse
pair is an exact round trip.

All file writes go through a temporary file in the target directory
followed by an atomic rename, so readers never observe partial files.
"""

from __future__ import annotations

import csv
import json
import os
import tempfile
from dataclasses import dataclass, field, fields

import numpy as np

from .discriminant import DiscriminantModel
from .exceptions import ParseError, ValidationError
from .model import HyperParams, LabeledFunctionalDataset, validate_dataset

MODEL_FORMAT = "gplda-model-v1"


def atomic_write_text(path: str, text: str) -> None:
    """Write the whole file or nothing: temp file plus atomic rename."""
    directory = os.path.dirname(os.path.abspath(path))
    handle, temp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(handle, "w") as fh:
            fh.write(text)
        os.replace(temp_path, path)
    except BaseException:
        if os.path.exists(temp_path):
            os.unlink(temp_path)
        raise


def read_labeled_csv(path: str, has_header: bool = False):
    """Read a labeled-curve CSV into raw labels and a float matrix.

    Returns ``(labels, values)`` without dataset-level validation, so it
    is usable for prediction inputs of any size.  Parse failures carry
    one-based row and column positions, counting data rows only.
    """
    try:
        with open(path, newline="") as fh:
            raw_rows = [
                row for row in csv.reader(fh) if row and any(cell.strip() for cell in row)
            ]
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    if has_header and raw_rows:
        raw_rows = raw_rows[1:]
    if not raw_rows:
        raise ParseError(f"{path}: no data rows")
    labels = []
    values = []
    expected = len(raw_rows[0])
    if expected < 2:
        raise ParseError(f"{path}: row 1 has no value columns", row=1)
    for r, row in enumerate(raw_rows, start=1):
        if len(row) != expected:
            raise ParseError(
                f"{path}: row {r} has {len(row)} columns, expected {expected}",
                row=r,
            )
        labels.append(row[0].strip())
        parsed = []
        for c, cell in enumerate(row[1:], start=2):
            try:
                parsed.append(float(cell))
            except ValueError:
                raise ParseError(
                    f"{path}: row {r} column {c}: cannot parse {cell.strip()!r} as a number",
                    row=r,
                    column=c,
                ) from None
        values.append(parsed)
    return labels, np.asarray(values, dtype=float)


def load_csv(path: str, has_header: bool = False) -> LabeledFunctionalDataset:
    """Load and validate a labeled-curve CSV as a training dataset."""
    labels, values = read_labeled_csv(path, has_header=has_header)
    return validate_dataset(values, labels)


def save_dataset_csv(path: str, dataset: LabeledFunctionalDataset) -> None:
    """Write a dataset in the labeled-curve CSV format."""
    lines = []
    names = list(dataset.label_names)
    for i in range(dataset.n):
        label = names[dataset.labels[i] - 1]
        values = ",".join(repr(float(v)) for v in dataset.y[i])
        lines.append(f"{label},{values}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def save_model(path: str, model: DiscriminantModel) -> None:
    """Serialize a fitted discriminant to a JSON model file.

    Stores the method tag, class labels, directions, projected centroids,
    and the penalty descriptor.  Floats keep full precision, so loading
    reproduces them exactly.
    """
    payload = {
        "format": MODEL_FORMAT,
        "method_tag": model.method_tag,
        "class_labels": list(model.class_labels),
        "directions": [[float(v) for v in row] for row in model.directions],
        "projected_centroids": [
            [float(v) for v in row] for row in model.projected_centroids
        ],
        "penalty": model.penalty,
    }
    atomic_write_text(path, json.dumps(payload, indent=1) + "\n")


def load_model(path: str) -> DiscriminantModel:
    """Load a model file written by ``save_model``.

    The within covariance and eigenvalues are not stored, so the loaded
    model predicts but does not expose them.
    """
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not a valid model file: {exc}") from exc
    if payload.get("format") != MODEL_FORMAT:
        raise ParseError(
            f"{path}: unrecognized model format {payload.get('format')!r}"
        )
    try:
        return DiscriminantModel(
            method_tag=payload["method_tag"],
            directions=np.asarray(payload["directions"], dtype=float),
            projected_centroids=np.asarray(payload["projected_centroids"], dtype=float),
            class_labels=tuple(payload["class_labels"]),
            penalty=payload.get("penalty"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: malformed model file: {exc}") from exc


@dataclass(frozen=True)
class RunConfig:
    """Everything a CLI run needs, with printable defaults.

    ``penalty_kind`` of ``"auto"`` resolves to first differences for the
    posterior method and second differences for the penalized baseline.
    ``pda_alpha`` is a number or ``"cv"`` for cross-validated selection;
    ``mle_ridge`` is a number or ``"auto"`` for the singularity-dependent
    default.
    """

    method: str = "gplda"
    k: int | None = None
    seed: int = 0
    data: str | None = None
    out: str | None = None
    penalty_kind: str = "auto"
    penalty_grid: tuple[int, int] | None = None
    pda_alpha: float | str = "cv"
    pca_q: int = 1
    mle_ridge: float | str = "auto"
    hyper: HyperParams = field(default_factory=HyperParams)
    max_sweeps: int = 500
    rel_tol: float = 1e-6
    jitter_scale: float = 1e-8
    bench_which: str = "sim1"
    bench_methods: tuple[str, ...] = ("gplda", "pda")
    bench_n_values: tuple[int, ...] = (50, 200)
    bench_reps: int = 30
    bench_n_test: int = 200


def default_run_config() -> RunConfig:
    return RunConfig()


def _format_float(value: float) -> str:
    return repr(float(value))


def format_config(config: RunConfig) -> str:
    """Render a config as flat ``key = value`` lines."""
    lines = [
        f"method = {config.method}",
        f"k = {'auto' if config.k is None else config.k}",
        f"seed = {config.seed}",
        f"data = {'' if config.data is None else config.data}",
        f"out = {'' if config.out is None else config.out}",
        f"penalty.kind = {config.penalty_kind}",
        "penalty.grid = "
        + ("" if config.penalty_grid is None else "%dx%d" % config.penalty_grid),
        f"pda.alpha = {config.pda_alpha if isinstance(config.pda_alpha, str) else _format_float(config.pda_alpha)}",
        f"pca.q = {config.pca_q}",
        f"mle.ridge = {config.mle_ridge if isinstance(config.mle_ridge, str) else _format_float(config.mle_ridge)}",
    ]
    for name in ("a1", "b1", "a2", "b2", "a3", "b3", "delta"):
        lines.append(f"hyper.{name} = {_format_float(getattr(config.hyper, name))}")
    lines += [
        f"fit.max_sweeps = {config.max_sweeps}",
        f"fit.rel_tol = {_format_float(config.rel_tol)}",
        f"fit.jitter_scale = {_format_float(config.jitter_scale)}",
        f"bench.which = {config.bench_which}",
        f"bench.methods = {','.join(config.bench_methods)}",
        f"bench.n_values = {','.join(str(v) for v in config.bench_n_values)}",
        f"bench.reps = {config.bench_reps}",
        f"bench.n_test = {config.bench_n_test}",
    ]
    return "\n".join(lines) + "\n"


def _parse_int(key: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ParseError(f"config key {key}: cannot parse {raw!r} as an integer") from None


def _parse_float(key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ParseError(f"config key {key}: cannot parse {raw!r} as a number") from None


def parse_config(text: str) -> RunConfig:
    """Parse the flat key-value format back into a RunConfig.

    Unknown keys raise a parse error naming the key; missing keys keep
    their defaults, so partial configs are valid.
    """
    values: dict = {}
    hyper_values: dict = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ParseError(f"config line {line_no}: expected 'key = value'", row=line_no)
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key == "method":
            values["method"] = raw
        elif key == "k":
            values["k"] = None if raw in ("", "auto") else _parse_int(key, raw)
        elif key == "seed":
            values["seed"] = _parse_int(key, raw)
        elif key == "data":
            values["data"] = raw or None
        elif key == "out":
            values["out"] = raw or None
        elif key == "penalty.kind":
            values["penalty_kind"] = raw
        elif key == "penalty.grid":
            if raw:
                parts = raw.lower().split("x")
                if len(parts) != 2:
                    raise ParseError(
                        f"config key {key}: expected ROWSxCOLS, got {raw!r}"
                    )
                values["penalty_grid"] = (
                    _parse_int(key, parts[0]),
                    _parse_int(key, parts[1]),
                )
            else:
                values["penalty_grid"] = None
        elif key == "pda.alpha":
            values["pda_alpha"] = "cv" if raw == "cv" else _parse_float(key, raw)
        elif key == "pca.q":
            values["pca_q"] = _parse_int(key, raw)
        elif key == "mle.ridge":
            values["mle_ridge"] = "auto" if raw == "auto" else _parse_float(key, raw)
        elif key.startswith("hyper."):
            name = key[len("hyper."):]
            if name not in ("a1", "b1", "a2", "b2", "a3", "b3", "delta"):
                raise ParseError(f"unknown config key {key!r}")
            hyper_values[name] = _parse_float(key, raw)
        elif key == "fit.max_sweeps":
            values["max_sweeps"] = _parse_int(key, raw)
        elif key == "fit.rel_tol":
            values["rel_tol"] = _parse_float(key, raw)
        elif key == "fit.jitter_scale":
            values["jitter_scale"] = _parse_float(key, raw)
        elif key == "bench.which":
            values["bench_which"] = raw
        elif key == "bench.methods":
            values["bench_methods"] = tuple(
                part.strip() for part in raw.split(",") if part.strip()
            )
        elif key == "bench.n_values":
            values["bench_n_values"] = tuple(
                _parse_int(key, part.strip()) for part in raw.split(",") if part.strip()
            )
        elif key == "bench.reps":
            values["bench_reps"] = _parse_int(key, raw)
        elif key == "bench.n_test":
            values["bench_n_test"] = _parse_int(key, raw)
        else:
            raise ParseError(f"unknown config key {key!r}")
    if hyper_values:
        defaults = HyperParams()
        merged = {
            name: hyper_values.get(name, getattr(defaults, name))
            for name in ("a1", "b1", "a2", "b2", "a3", "b3", "delta")
        }
        values["hyper"] = HyperParams(**merged)
    return RunConfig(**values)


def load_config(path: str) -> RunConfig:
    try:
        with open(path) as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ValidationError(f"cannot read config file {path}: {exc}") from exc
