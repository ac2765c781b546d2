"""Shared construction helpers for the test suite."""

from __future__ import annotations

import dataclasses

import numpy as np

from gplda import LabeledFunctionalDataset, PosteriorState, log_posterior


def sample_well_posed_dataset(rng: np.random.Generator) -> LabeledFunctionalDataset:
    """Draw a random dataset whose pooled scatter is safely full rank.

    Sizes satisfy n - c >= p + 4, the regime where the within-class
    covariance is estimable without regularization and the backfitting
    map has an interior fixed point.
    """
    c = int(rng.integers(2, 4))
    p = int(rng.integers(8, min(32, 40 - c - 4) + 1))
    n = int(rng.integers(p + c + 4, 41))
    labels = np.sort(
        np.concatenate([np.arange(1, c + 1), rng.integers(1, c + 1, size=n - c)])
    )
    y = rng.standard_normal((n, p)) + labels[:, None] * 0.5
    return LabeledFunctionalDataset(
        y=y, labels=labels, label_names=tuple(range(1, c + 1))
    )


def random_spd_matrix(rng: np.random.Generator, p: int) -> np.ndarray:
    """A well-conditioned random symmetric positive definite matrix."""
    a = rng.standard_normal((p, p))
    return a @ a.T / p + np.eye(p)


def random_posterior_state(
    rng: np.random.Generator, data: LabeledFunctionalDataset
) -> PosteriorState:
    """A random strictly feasible state for a given dataset."""
    return PosteriorState(
        x=data.y + 0.1 * rng.standard_normal(data.y.shape),
        mu=rng.standard_normal((data.c, data.p)),
        sigma_w=random_spd_matrix(rng, data.p),
        alpha1=float(rng.uniform(0.05, 2.0)),
        alpha2=float(rng.uniform(0.05, 2.0)),
        sigma2=float(rng.uniform(0.1, 2.0)),
    )


def _central_difference(f, value: float) -> float:
    h = 1e-5 * (1.0 + abs(value))
    return (f(value + h) - f(value - h)) / (2.0 * h)


def finite_difference_residuals(state, data, hyper, penalty) -> dict:
    """Gradient norms of the objective per block, by central differences.

    Returns a dict with the same keys as ``FirstOrderResiduals.as_dict``,
    computed without any analytic derivative so the two can be compared.
    """
    lp_at = lambda s: log_posterior(s, data, hyper, penalty)

    def scalar_grad(name):
        return _central_difference(
            lambda v: lp_at(dataclasses.replace(state, **{name: v})),
            getattr(state, name),
        )

    def precision_grad():
        return _central_difference(
            lambda v: lp_at(dataclasses.replace(state, sigma2=1.0 / v)),
            1.0 / state.sigma2,
        )

    def array_grad(name):
        base = getattr(state, name)
        grad = np.zeros_like(base)
        for idx in np.ndindex(base.shape):
            def with_entry(v, idx=idx):
                changed = base.copy()
                changed[idx] = v
                return lp_at(dataclasses.replace(state, **{name: changed}))
            grad[idx] = _central_difference(with_entry, base[idx])
        return grad

    def sigma_w_grad():
        base = state.sigma_w
        p = base.shape[0]
        grad = np.zeros((p, p))
        for i in range(p):
            for j in range(i + 1):
                bump = np.zeros((p, p))
                bump[i, j] = bump[j, i] = 1.0
                derivative = _central_difference(
                    lambda t: lp_at(dataclasses.replace(state, sigma_w=base + t * bump)),
                    0.0,
                )
                # symmetric bump picks up both entries off the diagonal
                value = derivative if i == j else derivative / 2.0
                grad[i, j] = grad[j, i] = value
        return grad

    return {
        "alpha1": abs(scalar_grad("alpha1")),
        "alpha2": abs(scalar_grad("alpha2")),
        "noise_precision": abs(precision_grad()),
        "x_max": float(np.max(np.linalg.norm(array_grad("x"), axis=1))),
        "mu_max": float(np.max(np.linalg.norm(array_grad("mu"), axis=1))),
        "sigma_w": float(np.linalg.norm(sigma_w_grad())),
    }


def two_class_separable(n_per_class: int, p: int, gap: float, seed: int = 0):
    """A simple labeled two-class dataset with a mean shift on every column."""
    rng = np.random.default_rng(seed)
    y1 = rng.standard_normal((n_per_class, p))
    y2 = rng.standard_normal((n_per_class, p)) + gap
    y = np.vstack([y1, y2])
    labels = np.repeat([1, 2], n_per_class)
    return LabeledFunctionalDataset(y=y, labels=labels, label_names=(1, 2))
