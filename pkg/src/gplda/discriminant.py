"""Discriminant directions, baseline classifiers, and prediction.

Every method here reduces to the same two-matrix eigenproblem: maximize
the between-class quadratic form against a within-class covariance
estimate.  The methods differ only in how the class means and the within
covariance are estimated:

* ``gplda_directions`` uses the posterior estimates from the backfitting
  estimator.
* ``pda_fit`` uses observed class means and the pooled scatter plus a
  scaled roughness penalty.
* ``mle_lda_fit`` uses observed class means and the pooled scatter alone
  (optionally ridge-stabilized).
* ``pca_lda_fit`` first projects onto leading principal components, then
  applies ``mle_lda_fit`` in the reduced space.

Prediction assigns the nearest projected centroid; because directions are
normalized against the within covariance, Euclidean distance in the
projected space is the within-covariance distance in the original space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError, ValidationError
from .linalg import SmoothingPenalty, generalized_eig_top
from .model import (
    FitConfig,
    HyperParams,
    LabeledFunctionalDataset,
    PosteriorState,
    pooled_within_scatter,
)

METHOD_GPLDA = "GPLDA"
METHOD_PDA = "PDA"
METHOD_MLE_LDA = "MLE_LDA"
METHOD_PCA_LDA = "PCA_LDA"


@dataclass(frozen=True, eq=False)
class DiscriminantModel:
    """A fitted linear discriminant.

    Attributes
    ----------
    method_tag : str
        One of ``"GPLDA"``, ``"PDA"``, ``"MLE_LDA"``, ``"PCA_LDA"``.
    directions : ndarray of shape (k, p)
        Discriminant directions, rows normalized so the within-covariance
        quadratic form of each is 1.
    projected_centroids : ndarray of shape (c, k)
        Class mean projections onto the directions.
    class_labels : tuple
        Original label values, position i holding the value of class i+1.
    within_cov_used : ndarray of shape (p, p), optional
        The within-covariance estimate the directions were normalized
        against; absent on models restored from disk.
    eigenvalues : ndarray of shape (k,), optional
        Separation ratios of the directions, descending.
    penalty : str, optional
        Descriptor of the roughness penalty involved in the fit, if any.
    warnings : tuple of str
        Notes recorded during fitting, e.g. a clamped direction count.
    """

    method_tag: str
    directions: np.ndarray
    projected_centroids: np.ndarray
    class_labels: tuple
    within_cov_used: np.ndarray | None = None
    eigenvalues: np.ndarray | None = None
    penalty: str | None = None
    warnings: tuple[str, ...] = ()

    @property
    def k(self) -> int:
        return self.directions.shape[0]

    @property
    def p(self) -> int:
        return self.directions.shape[1]

    @property
    def c(self) -> int:
        return self.projected_centroids.shape[0]


def between_covariance(mu: np.ndarray) -> np.ndarray:
    """Scatter of class means around their unweighted average.

    Parameters
    ----------
    mu : ndarray of shape (c, p)
        One mean curve per class, c >= 2.

    Returns
    -------
    ndarray of shape (p, p)
        Sum over classes of the outer product of each centered mean; rank
        at most c - 1.
    """
    mu = np.asarray(mu, dtype=float)
    if mu.ndim != 2 or mu.shape[0] < 2:
        raise ValidationError(
            f"between-class covariance needs at least 2 class means, got shape {mu.shape}"
        )
    centered = mu - mu.mean(axis=0)
    return centered.T @ centered


def _resolve_k(k: int | None, c: int, p: int) -> tuple[int, tuple[str, ...]]:
    limit = min(c - 1, p)
    if k is None:
        return limit, ()
    if k < 1:
        raise ValidationError(f"k must be at least 1, got {k}")
    if k > limit:
        return limit, (
            f"requested k={k} exceeds the identifiable maximum {limit}; clamped",
        )
    return k, ()


def _assemble(
    method_tag: str,
    mu: np.ndarray,
    within: np.ndarray,
    class_labels: tuple,
    k: int | None,
    penalty_descriptor: str | None = None,
    extra_warnings: tuple[str, ...] = (),
) -> DiscriminantModel:
    c, p = mu.shape
    k_used, warnings = _resolve_k(k, c, p)
    eigenvalues, directions = generalized_eig_top(between_covariance(mu), within, k_used)
    centroids = mu @ directions.T
    return DiscriminantModel(
        method_tag=method_tag,
        directions=directions,
        projected_centroids=centroids,
        class_labels=class_labels,
        within_cov_used=within,
        eigenvalues=eigenvalues,
        penalty=penalty_descriptor,
        warnings=extra_warnings + warnings,
    )


def gplda_directions(
    state: PosteriorState,
    class_labels: tuple,
    k: int | None = None,
    penalty_descriptor: str | None = None,
) -> DiscriminantModel:
    """Discriminant directions from a fitted posterior state.

    Parameters
    ----------
    state : PosteriorState
        Estimates from the backfitting fit; class means and within
        covariance are taken from it.
    class_labels : tuple
        Original label values in class-index order.
    k : int, optional
        Number of directions; defaults to c - 1 and is clamped to the
        identifiable maximum with a recorded warning.
    """
    if len(class_labels) != state.mu.shape[0]:
        raise DimensionError(
            f"{len(class_labels)} class labels for {state.mu.shape[0]} mean curves"
        )
    return _assemble(
        METHOD_GPLDA,
        state.mu,
        state.sigma_w,
        tuple(class_labels),
        k,
        penalty_descriptor=penalty_descriptor,
    )


def gplda_fit(
    data: LabeledFunctionalDataset,
    hyper: HyperParams | None = None,
    config: FitConfig | None = None,
    k: int | None = None,
):
    """Run the backfitting estimator and extract discriminant directions.

    Returns
    -------
    (DiscriminantModel, FitTrace)
    """
    from .estimator import fit

    state, trace = fit(data, hyper=hyper, config=config)
    descriptor = config.penalty.descriptor if config is not None else "d1"
    model = gplda_directions(
        state, data.label_names, k, penalty_descriptor=descriptor
    )
    return model, trace


def pda_fit(
    data: LabeledFunctionalDataset,
    penalty: SmoothingPenalty,
    alpha: float,
    k: int | None = None,
    jitter_scale: float = 0.0,
) -> DiscriminantModel:
    """Penalized discriminant baseline.

    Uses observed class means and the pooled within-class scatter plus
    ``alpha`` times the penalty as the within covariance.

    Parameters
    ----------
    alpha : float
        Non-negative penalty weight; 0 recovers the plain pooled-scatter
        discriminant.
    jitter_scale : float
        Optional relative diagonal jitter applied to the within estimate.
    """
    if alpha < 0:
        raise ValidationError(f"alpha must be non-negative, got {alpha}")
    if penalty.p != data.p:
        raise DimensionError(
            f"penalty is built for grid length {penalty.p}, data has p={data.p}"
        )
    mu = data.class_means()
    within = pooled_within_scatter(data.y, data.labels, mu) + alpha * penalty.matrix
    within = 0.5 * (within + within.T)
    if jitter_scale > 0:
        within = within + jitter_scale * (np.trace(within) / data.p) * np.eye(data.p)
    return _assemble(
        METHOD_PDA, mu, within, data.label_names, k,
        penalty_descriptor=penalty.descriptor,
    )


def mle_lda_fit(
    data: LabeledFunctionalDataset,
    k: int | None = None,
    ridge: float | None = None,
) -> DiscriminantModel:
    """Plain pooled-covariance discriminant.

    Parameters
    ----------
    ridge : float, optional
        Diagonal stabilizer added to the pooled scatter.  When omitted it
        defaults to 0 for n > p and to 1e-6 times the mean diagonal for
        p >= n, where the pooled scatter is singular.
    """
    if data.n <= data.c:
        raise ValidationError(
            f"need more curves than classes, got n={data.n}, c={data.c}"
        )
    mu = data.class_means()
    within = pooled_within_scatter(data.y, data.labels, mu)
    if ridge is None:
        ridge = 0.0 if data.n > data.p else 1e-6 * float(np.trace(within)) / data.p
    if ridge < 0:
        raise ValidationError(f"ridge must be non-negative, got {ridge}")
    if ridge > 0:
        within = within + ridge * np.eye(data.p)
    return _assemble(METHOD_MLE_LDA, mu, within, data.label_names, k)


def pca_lda_fit(
    data: LabeledFunctionalDataset,
    q: int,
    k: int | None = None,
    ridge: float | None = None,
) -> DiscriminantModel:
    """Principal components followed by the pooled-covariance discriminant.

    Projects the curves onto the top ``q`` eigenvectors of the total
    covariance, runs ``mle_lda_fit`` in the reduced space, and composes
    the result back to curve space.

    Parameters
    ----------
    q : int
        Number of components, 1 <= q <= min(n, p).
    """
    if not 1 <= q <= min(data.n, data.p):
        raise ValidationError(
            f"q={q} is outside the valid range 1..{min(data.n, data.p)}"
        )
    centered = data.y - data.y.mean(axis=0)
    total_cov = centered.T @ centered / data.n
    eigenvalues, vectors = np.linalg.eigh(total_cov)
    components = vectors[:, ::-1][:, :q]
    reduced = LabeledFunctionalDataset(
        y=data.y @ components, labels=data.labels, label_names=data.label_names
    )
    submodel = mle_lda_fit(reduced, k=k, ridge=ridge)
    directions = submodel.directions @ components.T
    within = components @ submodel.within_cov_used @ components.T
    return DiscriminantModel(
        method_tag=METHOD_PCA_LDA,
        directions=directions,
        projected_centroids=submodel.projected_centroids,
        class_labels=submodel.class_labels,
        within_cov_used=within,
        eigenvalues=submodel.eigenvalues,
        warnings=submodel.warnings,
    )


def predict(model: DiscriminantModel, x_new: np.ndarray):
    """Assign the nearest-projected-centroid class.

    Parameters
    ----------
    x_new : ndarray of shape (p,) or (m, p)
        One curve or a batch of curves.

    Returns
    -------
    label or ndarray of labels
        Original label values; ties resolve to the lowest class index.
    """
    x_new = np.asarray(x_new, dtype=float)
    single = x_new.ndim == 1
    batch = x_new[None, :] if single else x_new
    if batch.ndim != 2 or batch.shape[1] != model.p:
        raise DimensionError(
            f"input of shape {x_new.shape} does not match grid length {model.p}"
        )
    projected = batch @ model.directions.T
    deltas = projected[:, None, :] - model.projected_centroids[None, :, :]
    distances = np.sum(deltas * deltas, axis=2)
    indices = np.argmin(distances, axis=1)
    labels = np.asarray(model.class_labels)[indices]
    return labels[0] if single else labels


def error_rate(predicted, truth) -> float:
    """Fraction of mismatched labels between two equal-length sequences."""
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    if predicted.shape != truth.shape:
        raise ValidationError(
            f"predicted labels have shape {predicted.shape}, truth {truth.shape}"
        )
    if predicted.size == 0:
        raise ValidationError("cannot compute an error rate over zero labels")
    return float(np.mean(predicted != truth))
