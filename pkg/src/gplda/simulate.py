"""Seeded simulation benchmarks for the discriminant methods.

Two synthetic two-class problems are provided.  The first builds curves
from random convex combinations of shifted triangular bumps, observed
with unit noise on a grid of 101 points over [1, 21].  The second builds
sinusoids sharing a random common component on a grid of 100 points over
[0, 1], with noise variance 0.1; the classes differ only by a low-energy
mean offset, which is what makes it hard for variance-driven projections.

All randomness flows through a counter-based 64-bit generator keyed by
(seed, role), where the role separates training from test draws, so any
single replication is reproducible in isolation and independent of the
order replications run in.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .discriminant import (
    METHOD_GPLDA,
    METHOD_MLE_LDA,
    METHOD_PCA_LDA,
    METHOD_PDA,
    error_rate,
    gplda_fit,
    mle_lda_fit,
    pca_lda_fit,
    pda_fit,
    predict,
)
from .exceptions import NumericError, ValidationError
from .linalg import FIRST_DIFF, SECOND_DIFF, build_penalty
from .model import FitConfig, HyperParams, LabeledFunctionalDataset

SIM1 = "sim1"
SIM2 = "sim2"

_ROLE_TRAIN = 0
_ROLE_TEST = 1

_MASK64 = (1 << 64) - 1

METHOD_TAGS = (METHOD_GPLDA, METHOD_PDA, METHOD_MLE_LDA, METHOD_PCA_LDA)

_CLI_TO_TAG = {
    "gplda": METHOD_GPLDA,
    "pda": METHOD_PDA,
    "mle": METHOD_MLE_LDA,
    "pca-lda": METHOD_PCA_LDA,
}


def normalize_method(name: str) -> str:
    """Map a CLI-style method name or tag to the canonical method tag."""
    if name in METHOD_TAGS:
        return name
    key = name.strip().lower()
    if key in _CLI_TO_TAG:
        return _CLI_TO_TAG[key]
    raise ValidationError(
        f"unknown method {name!r}; expected one of {sorted(_CLI_TO_TAG)} or {METHOD_TAGS}"
    )


@dataclass(frozen=True)
class SimSpec:
    """One simulated classification problem.

    ``n_train`` and ``n_test`` are totals over the two balanced classes
    and must be even and at least 2.
    """

    which: str
    n_train: int
    n_test: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.which not in (SIM1, SIM2):
            raise ValidationError(
                f"unknown simulation {self.which!r}, expected {SIM1!r} or {SIM2!r}"
            )
        for name in ("n_train", "n_test"):
            value = getattr(self, name)
            if value < 2 or value % 2 != 0:
                raise ValidationError(f"{name} must be even and >= 2, got {value}")


def _stream(seed: int, role: int) -> np.random.Generator:
    key = ((role & _MASK64) << 64) | (seed & _MASK64)
    return np.random.Generator(np.random.Philox(key=key))


def sim1_grid() -> np.ndarray:
    """101 equidistant points spanning [1, 21]."""
    return np.linspace(1.0, 21.0, 101)


def triangular_bump(t: np.ndarray) -> np.ndarray:
    """Triangle of height 6 centered at 11 with support [5, 17]."""
    return np.maximum(6.0 - np.abs(t - 11.0), 0.0)


def _sim1_curves(rng: np.random.Generator, n: int, noise_scale: float):
    t = sim1_grid()
    base = triangular_bump(t)
    right = triangular_bump(t - 4.0)
    left = triangular_bump(t + 4.0)
    weights = rng.random(n)
    noise = rng.standard_normal((n, t.size))
    half = n // 2
    y = np.empty((n, t.size))
    y[:half] = weights[:half, None] * base + (1.0 - weights[:half, None]) * right
    y[half:] = weights[half:, None] * base + (1.0 - weights[half:, None]) * left
    y += noise_scale * noise
    labels = np.repeat([1, 2], half)
    return y, labels


def sim2_grid() -> np.ndarray:
    """100 equidistant points spanning [0, 1], endpoints included."""
    return np.linspace(0.0, 1.0, 100)


def sim2_mean_difference(t) -> np.ndarray:
    """Population mean difference between the two classes."""
    return np.sin(2.0 * np.pi * np.asarray(t, dtype=float)) / 4.0


def sim2_shared_component(t) -> np.ndarray:
    """Common random-amplitude component present in both classes."""
    return np.sin(4.0 * np.pi * np.asarray(t, dtype=float))


def _sim2_curves(rng: np.random.Generator, n: int, noise_scale: float):
    t = sim2_grid()
    offset = sim2_mean_difference(t)
    shared = sim2_shared_component(t)
    amplitude = rng.standard_normal(n)
    noise = rng.standard_normal((n, t.size)) * np.sqrt(0.1)
    half = n // 2
    y = amplitude[:, None] * shared + noise_scale * noise
    y[:half] += offset
    labels = np.repeat([1, 2], half)
    return y, labels


def _make_dataset(y: np.ndarray, labels: np.ndarray) -> LabeledFunctionalDataset:
    return LabeledFunctionalDataset(y=y, labels=labels, label_names=(1, 2))


def generate(
    spec: SimSpec, noise_scale: float = 1.0
) -> tuple[LabeledFunctionalDataset, LabeledFunctionalDataset]:
    """Generate the (train, test) pair for a simulation spec.

    ``noise_scale`` multiplies the noise standard deviation and exists for
    noise-free sanity checks; the defined problems use 1.0.
    """
    maker = _sim1_curves if spec.which == SIM1 else _sim2_curves
    y_train, l_train = maker(_stream(spec.seed, _ROLE_TRAIN), spec.n_train, noise_scale)
    y_test, l_test = maker(_stream(spec.seed, _ROLE_TEST), spec.n_test, noise_scale)
    return _make_dataset(y_train, l_train), _make_dataset(y_test, l_test)


def gen_sim1(spec: SimSpec, noise_scale: float = 1.0):
    """Triangular-bump problem; see module docstring."""
    return generate(replace(spec, which=SIM1), noise_scale)


def gen_sim2(spec: SimSpec, noise_scale: float = 1.0):
    """Sinusoid problem; see module docstring."""
    return generate(replace(spec, which=SIM2), noise_scale)


DEFAULT_PDA_ALPHA_GRID = (1e-2, 1e-1, 1.0, 10.0, 100.0, 1e3, 1e4, 1e5, 1e6)


def select_pda_alpha(
    data: LabeledFunctionalDataset,
    penalty,
    grid=DEFAULT_PDA_ALPHA_GRID,
    folds: int = 5,
    seed: int = 0,
) -> float:
    """Pick the penalty weight by stratified cross-validation.

    Folds are assigned round-robin within each class after a seeded
    shuffle.  Ties resolve to the smallest candidate.  Fold counts are
    reduced if some class has fewer curves than requested folds.
    """
    counts = data.class_counts
    folds = max(2, min(folds, int(counts.min())))
    rng = _stream(seed, 2)
    assignment = np.zeros(data.n, dtype=int)
    for i in range(1, data.c + 1):
        rows = data.class_rows(i)
        shuffled = rng.permutation(rows)
        assignment[shuffled] = np.arange(shuffled.size) % folds
    best_alpha = None
    best_error = np.inf
    for alpha in grid:
        fold_errors = []
        for fold in range(folds):
            holdout = assignment == fold
            if not holdout.any() or holdout.all():
                continue
            train = LabeledFunctionalDataset(
                y=data.y[~holdout],
                labels=data.labels[~holdout],
                label_names=data.label_names,
            )
            try:
                model = pda_fit(train, penalty, alpha)
                predicted = predict(model, data.y[holdout])
            except NumericError:
                fold_errors.append(1.0)
                continue
            truth = np.asarray(data.label_names)[data.labels[holdout] - 1]
            fold_errors.append(error_rate(predicted, truth))
        mean_error = float(np.mean(fold_errors)) if fold_errors else np.inf
        if mean_error < best_error:
            best_error = mean_error
            best_alpha = alpha
    if best_alpha is None:
        raise NumericError("cross-validation failed for every candidate alpha")
    return float(best_alpha)


def default_method_options() -> dict:
    """Per-method settings used by the benchmark harness."""
    return {
        METHOD_GPLDA: {
            "penalty_kind": FIRST_DIFF,
            "hyper": HyperParams(),
            "max_sweeps": 500,
            "rel_tol": 1e-6,
            "jitter_scale": 1e-8,
            "k": None,
        },
        METHOD_PDA: {"penalty_kind": SECOND_DIFF, "alpha": "cv", "k": None},
        METHOD_MLE_LDA: {"ridge": None, "k": None},
        METHOD_PCA_LDA: {"q": 1, "ridge": None, "k": None},
    }


def _fit_for_method(tag: str, train: LabeledFunctionalDataset, options: dict, seed: int):
    if tag == METHOD_GPLDA:
        penalty = build_penalty(options.get("penalty_kind", FIRST_DIFF), train.p)
        config = FitConfig(
            penalty=penalty,
            max_sweeps=options.get("max_sweeps", 500),
            rel_tol=options.get("rel_tol", 1e-6),
            jitter_scale=options.get("jitter_scale", 1e-8),
        )
        model, _ = gplda_fit(
            train, hyper=options.get("hyper"), config=config, k=options.get("k")
        )
        return model
    if tag == METHOD_PDA:
        penalty = build_penalty(options.get("penalty_kind", SECOND_DIFF), train.p)
        alpha = options.get("alpha", "cv")
        if alpha == "cv":
            alpha = select_pda_alpha(train, penalty, seed=seed)
        return pda_fit(train, penalty, float(alpha), k=options.get("k"))
    if tag == METHOD_MLE_LDA:
        return mle_lda_fit(train, k=options.get("k"), ridge=options.get("ridge"))
    if tag == METHOD_PCA_LDA:
        return pca_lda_fit(
            train,
            q=options.get("q", 1),
            k=options.get("k"),
            ridge=options.get("ridge"),
        )
    raise ValidationError(f"unknown method tag {tag!r}")


@dataclass(frozen=True)
class BenchmarkCell:
    """Aggregate result of one (method, training size) pair.

    ``errors`` holds the per-replication test error rates (fractions, not
    percent) of the successful replications, in replication order;
    ``replications`` maps each entry of ``errors`` to its replication
    index.  ``failures`` counts replications that raised a numeric error;
    they are excluded from the mean and never retried.
    """

    method: str
    n_train: int
    mean_pct: float
    std_pct: float
    failures: int
    seconds: float
    errors: tuple[float, ...]
    replications: tuple[int, ...]


@dataclass(frozen=True)
class BenchmarkReport:
    """All cells of one benchmark run, plus the settings that produced it."""

    which: str
    reps: int
    base_seed: int
    n_test: int
    cells: tuple[BenchmarkCell, ...] = field(default_factory=tuple)

    def cell(self, method: str, n_train: int) -> BenchmarkCell:
        tag = normalize_method(method)
        for cell in self.cells:
            if cell.method == tag and cell.n_train == n_train:
                return cell
        raise KeyError(f"no cell for method {tag} at n_train={n_train}")

    def to_csv(self) -> str:
        lines = ["method,N,mean_pct,std_pct,failures,seconds"]
        for cell in self.cells:
            lines.append(
                f"{cell.method},{cell.n_train},{cell.mean_pct:.6f},"
                f"{cell.std_pct:.6f},{cell.failures},{cell.seconds:.3f}"
            )
        return "\n".join(lines) + "\n"

    def to_summary(self) -> dict:
        return {
            "which": self.which,
            "reps": self.reps,
            "base_seed": self.base_seed,
            "n_test": self.n_test,
            "cells": [
                {
                    "method": cell.method,
                    "n_train": cell.n_train,
                    "mean_pct": cell.mean_pct,
                    "std_pct": cell.std_pct,
                    "failures": cell.failures,
                    "seconds": cell.seconds,
                    "errors": list(cell.errors),
                    "replications": list(cell.replications),
                }
                for cell in self.cells
            ],
        }


def run_benchmark(
    which: str,
    methods,
    n_values,
    reps: int,
    base_seed: int,
    n_test: int = 200,
    options: dict | None = None,
) -> BenchmarkReport:
    """Monte Carlo comparison of methods over training sizes.

    Replication r draws its own (train, test) pair from seed
    ``base_seed + r``, fits every method on the same pair, and scores test
    error.  Numeric failures are counted per cell and excluded from the
    aggregates; nothing is retried.

    Parameters
    ----------
    which : str
        ``"sim1"`` or ``"sim2"``.
    methods : sequence of str
        Method tags or CLI names.
    n_values : sequence of int
        Training sizes to sweep.
    reps : int
        Replications per cell, >= 1.
    base_seed : int
        Seed offset; replication r uses base_seed + r.
    n_test : int
        Test curves per replication.
    options : dict, optional
        Per-method-tag overrides merged over ``default_method_options``.

    Returns
    -------
    BenchmarkReport
    """
    if reps < 1:
        raise ValidationError(f"reps must be >= 1, got {reps}")
    tags = [normalize_method(m) for m in methods]
    if not tags:
        raise ValidationError("methods list is empty")
    merged = default_method_options()
    for tag, overrides in (options or {}).items():
        merged.setdefault(normalize_method(tag), {}).update(overrides)

    results: dict = {
        (tag, int(n)): {"errors": [], "reps": [], "failures": 0, "seconds": 0.0}
        for tag in tags
        for n in n_values
    }
    for n in n_values:
        for r in range(reps):
            seed = base_seed + r
            train, test = generate(SimSpec(which=which, n_train=int(n), n_test=n_test, seed=seed))
            truth = np.asarray(test.label_names)[test.labels - 1]
            for tag in tags:
                slot = results[(tag, int(n))]
                start = time.perf_counter()
                try:
                    model = _fit_for_method(tag, train, merged.get(tag, {}), seed)
                    predicted = predict(model, test.y)
                    slot["errors"].append(error_rate(predicted, truth))
                    slot["reps"].append(r)
                except NumericError:
                    slot["failures"] += 1
                finally:
                    slot["seconds"] += time.perf_counter() - start

    cells = []
    for tag in tags:
        for n in n_values:
            slot = results[(tag, int(n))]
            errors = np.asarray(slot["errors"], dtype=float)
            if errors.size == 0:
                mean_pct, std_pct = float("nan"), float("nan")
            else:
                mean_pct = float(errors.mean()) * 100.0
                std_pct = float(errors.std(ddof=1)) * 100.0 if errors.size > 1 else 0.0
            cells.append(
                BenchmarkCell(
                    method=tag,
                    n_train=int(n),
                    mean_pct=mean_pct,
                    std_pct=std_pct,
                    failures=slot["failures"],
                    seconds=slot["seconds"],
                    errors=tuple(slot["errors"]),
                    replications=tuple(slot["reps"]),
                )
            )
    return BenchmarkReport(
        which=which,
        reps=reps,
        base_seed=base_seed,
        n_test=n_test,
        cells=tuple(cells),
    )
