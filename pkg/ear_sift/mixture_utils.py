"""
Mixture Utilities

Color modeling of ear pixels with a Gaussian mixture:
 - vector quantization (Lloyd iterations from a seeded farthest-point start)
   builds the codebook that initializes the mixture
 - expectation-maximization fits full-covariance components
 - component and mixture densities

    f(D)   = sum_i P_i f(D | i)
    f(D|i) = exp(-1/2 (D - m_i)^T S_i^-1 (D - m_i)) / ((2 pi)^(p/2) |S_i|^(1/2))

with p = 3 (RGB). Every covariance carries a 1e-6 * I ridge so that flat skin
patches cannot collapse a component.
"""

import logging
from dataclasses import dataclass, field
from typing import Tuple, Union

import numpy as np
from scipy.linalg import LinAlgError, cholesky, solve_triangular
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

from .error_utils import SingularCovariance, TooFewSamples
from .image_utils import PixelSet

DIM = 3
EPS_REG = 1e-6
MAX_COMPONENTS = 32
MIN_WEIGHT = 1e-4
VQ_MAX_ITER = 100
EM_MAX_ITER = 200
EM_TOL = 1e-6
WEIGHT_TOL = 1e-9

Samples = Union[PixelSet, np.ndarray]


def _samples(pixels: Samples) -> np.ndarray:
    if isinstance(pixels, PixelSet):
        return pixels.colors
    return np.asarray(pixels, dtype=np.float64).reshape(-1, DIM)


@dataclass(frozen=True, eq=False)
class GaussianComponent:
    """
    One mixture component (P_i, m_i, S_i).

    Attributes
    ----------
    weight : float
        Prior probability, in (0, 1].
    mean : np.ndarray
        3-vector.
    covariance : np.ndarray
        3 x 3 symmetric positive definite matrix.
    """

    weight: float
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=np.float64).reshape(DIM)
        covariance = np.array(self.covariance, dtype=np.float64).reshape(DIM, DIM)
        if not 0.0 < self.weight <= 1.0 + WEIGHT_TOL:
            raise ValueError(f"Component weight must lie in (0, 1], got {self.weight}")
        if not np.allclose(covariance, covariance.T, rtol=0.0, atol=1e-12):
            raise ValueError("Component covariance must be symmetric")
        mean.setflags(write=False)
        covariance.setflags(write=False)
        object.__setattr__(self, "weight", float(self.weight))
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", covariance)

    def __eq__(self, other) -> bool:
        if not isinstance(other, GaussianComponent):
            return NotImplemented
        return (
            self.weight == other.weight
            and np.array_equal(self.mean, other.mean)
            and np.array_equal(self.covariance, other.covariance)
        )

    def cholesky(self) -> np.ndarray:
        """
        Lower Cholesky factor of the covariance.

        Raises
        ------
        SingularCovariance
            If the covariance is not positive definite.
        """
        try:
            return cholesky(self.covariance, lower=True)
        except LinAlgError as e:
            raise SingularCovariance(f"Covariance is not positive definite: {e}") from e

    def to_dict(self) -> dict:
        return {
            "weight": self.weight,
            "mean": [float(v) for v in self.mean],
            "covariance": [float(v) for v in self.covariance.ravel()],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GaussianComponent":
        return cls(
            weight=float(d["weight"]),
            mean=np.array(d["mean"], dtype=np.float64),
            covariance=np.array(d["covariance"], dtype=np.float64).reshape(DIM, DIM),
        )


@dataclass(frozen=True)
class MixtureModel:
    """
    A Gaussian mixture over RGB colors.

    Attributes
    ----------
    components : tuple of GaussianComponent
        Between 1 and 32 components whose weights sum to 1.
    log_likelihoods : tuple of float
        EM log-likelihood trace of the fit that produced the model (empty for
        hand-built models). Not part of equality.
    """

    components: Tuple[GaussianComponent, ...]
    log_likelihoods: Tuple[float, ...] = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        components = tuple(self.components)
        if not 1 <= len(components) <= MAX_COMPONENTS:
            raise ValueError(f"A mixture needs 1..{MAX_COMPONENTS} components, got {len(components)}")
        total = sum(c.weight for c in components)
        if abs(total - 1.0) > WEIGHT_TOL:
            raise ValueError(f"Mixture weights sum to {total!r}, expected 1")
        object.__setattr__(self, "components", components)
        object.__setattr__(self, "log_likelihoods", tuple(float(v) for v in self.log_likelihoods))

    @property
    def dim(self) -> int:
        return DIM

    @property
    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.components])

    @property
    def means(self) -> np.ndarray:
        return np.stack([c.mean for c in self.components])

    @property
    def covariances(self) -> np.ndarray:
        return np.stack([c.covariance for c in self.components])

    def __len__(self) -> int:
        return len(self.components)

    def to_dict(self) -> dict:
        return {"components": [c.to_dict() for c in self.components]}

    @classmethod
    def from_dict(cls, d: dict) -> "MixtureModel":
        return cls(tuple(GaussianComponent.from_dict(c) for c in d["components"]))


@dataclass(frozen=True, eq=False)
class Codebook:
    """
    Vector-quantization result.

    Attributes
    ----------
    centroids : np.ndarray
        k x 3 array.
    assignment : np.ndarray
        Centroid index of every sample.
    distortion : tuple of float
        Total squared quantization error after every Lloyd iteration.
    """

    centroids: np.ndarray
    assignment: np.ndarray
    distortion: Tuple[float, ...] = ()

    @property
    def k(self) -> int:
        return len(self.centroids)


def log_component_density(c: GaussianComponent, points: np.ndarray) -> np.ndarray:
    """
    Vectorized log f(D | i) for an n x 3 array of points.

    Raises
    ------
    SingularCovariance
        If the covariance cannot be factorized.
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, DIM)
    chol = c.cholesky()
    z = solve_triangular(chol, (points - c.mean).T, lower=True)
    maha = np.sum(z * z, axis=0)
    log_det = 2.0 * np.sum(np.log(np.diag(chol)))
    return -0.5 * (maha + log_det + DIM * np.log(2.0 * np.pi))


def component_density(c: GaussianComponent, d: np.ndarray) -> Union[float, np.ndarray]:
    """
    Multivariate normal density f(D | i), p = 3.

    Parameters
    ----------
    c : GaussianComponent
        The component (its weight is ignored).
    d : np.ndarray
        One 3-vector, or an n x 3 array of points.

    Returns
    -------
    float or np.ndarray
        The density, a scalar for a single point.

    Example
    -------
    >>> c = GaussianComponent(1.0, np.zeros(3), np.eye(3))
    >>> round(component_density(c, np.zeros(3)), 7)
    0.0634936
    """
    d = np.asarray(d, dtype=np.float64)
    values = np.exp(log_component_density(c, d))
    return float(values[0]) if d.ndim == 1 else values


def weighted_log_densities(model: MixtureModel, points: np.ndarray) -> np.ndarray:
    """Return the n x N matrix log P_i + log f(D | i)."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, DIM)
    return np.stack(
        [np.log(c.weight) + log_component_density(c, points) for c in model.components],
        axis=1,
    )


def mixture_density(m: MixtureModel, d: np.ndarray) -> Union[float, np.ndarray]:
    """
    Mixture density f(D) = sum_i P_i f(D | i).

    Parameters
    ----------
    m : MixtureModel
        The mixture.
    d : np.ndarray
        One 3-vector, or an n x 3 array of points.

    Returns
    -------
    float or np.ndarray
        The density, a scalar for a single point.
    """
    d = np.asarray(d, dtype=np.float64)
    values = np.exp(logsumexp(weighted_log_densities(m, d), axis=1))
    return float(values[0]) if d.ndim == 1 else values


def _farthest_point_init(data: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """
    Seeded k-means++ start: first centroid uniform, the next ones drawn with
    probability proportional to the squared distance to the closest chosen
    centroid (the farthest point when every distance is tied at zero).
    """
    centroids = [data[rng.integers(len(data))]]
    closest = np.sum((data - centroids[0]) ** 2, axis=1)
    for _ in range(1, k):
        total = closest.sum()
        if total > 0.0:
            index = rng.choice(len(data), p=closest / total)
        else:
            index = int(np.argmax(closest))
        centroids.append(data[index])
        closest = np.minimum(closest, np.sum((data - data[index]) ** 2, axis=1))
    return np.array(centroids)


def _assign(data: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # argmin keeps the lowest index on ties
    return np.argmin(cdist(data, centroids, metric="sqeuclidean"), axis=1)


def _update_centroids(data: np.ndarray, labels: np.ndarray, k: int) -> Tuple[np.ndarray, np.ndarray]:
    """Recompute centroids, repairing empty clusters by splitting the largest one."""
    labels = labels.copy()
    counts = np.bincount(labels, minlength=k)
    for empty in np.flatnonzero(counts == 0):
        largest = int(np.argmax(counts))
        members = np.flatnonzero(labels == largest)
        center = data[members].mean(axis=0)
        farthest = members[int(np.argmax(np.sum((data[members] - center) ** 2, axis=1)))]
        labels[farthest] = empty
        counts[largest] -= 1
        counts[empty] = 1
        logging.debug(f"VQ repaired empty cluster {empty} from cluster {largest}")
    centroids = np.stack([data[labels == j].mean(axis=0) for j in range(k)])
    return centroids, labels


def _distortion(data: np.ndarray, centroids: np.ndarray, labels: np.ndarray) -> float:
    return float(np.sum((data - centroids[labels]) ** 2))


def vq_codebook(pixels: Samples, k: int, seed: int) -> Codebook:
    """
    Build a k-entry color codebook with Lloyd iterations.

    The start is a seeded farthest-point (k-means++ style) choice; iterations
    stop when the assignment no longer changes or after 100 rounds. Empty
    clusters are repaired by moving the farthest member of the largest
    cluster into them, so every centroid owns at least one sample.

    Parameters
    ----------
    pixels : PixelSet or np.ndarray
        The color samples.
    k : int
        Codebook size, at least 1.
    seed : int
        Seed of the initialization.

    Returns
    -------
    Codebook
        Centroids, final assignment and distortion trace.

    Raises
    ------
    TooFewSamples
        If there are fewer samples than codewords.
    """
    data = _samples(pixels)
    if k < 1:
        raise ValueError(f"Codebook size must be at least 1, got {k}")
    if len(data) < k:
        raise TooFewSamples(f"{len(data)} samples cannot fill a codebook of {k} entries")

    rng = np.random.default_rng(seed)
    centroids = _farthest_point_init(data, k, rng)
    labels = _assign(data, centroids)
    distortion = []
    for _ in range(VQ_MAX_ITER):
        centroids, labels = _update_centroids(data, labels, k)
        distortion.append(_distortion(data, centroids, labels))
        new_labels = _assign(data, centroids)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return Codebook(centroids=centroids, assignment=labels, distortion=tuple(distortion))


def _components(weights: np.ndarray, means: np.ndarray, covs: np.ndarray) -> Tuple[GaussianComponent, ...]:
    return tuple(GaussianComponent(float(w), m, c) for w, m, c in zip(weights, means, covs))


def _regularized_covariances(data: np.ndarray, resp: np.ndarray, means: np.ndarray, counts: np.ndarray) -> np.ndarray:
    covs = np.empty((len(means), DIM, DIM))
    for j, mean in enumerate(means):
        centered = data - mean
        cov = (resp[:, j, None] * centered).T @ centered / counts[j]
        covs[j] = 0.5 * (cov + cov.T) + EPS_REG * np.eye(DIM)
    return covs


def fit_gmm(pixels: Samples, k: int, seed: int) -> MixtureModel:
    """
    Fit a k-component full-covariance Gaussian mixture with EM.

    The mixture starts from the VQ codebook (weights = cluster fractions,
    means = centroids, covariances = per-cluster sample covariance + 1e-6 I).
    EM runs until the relative log-likelihood improvement drops below 1e-6 or
    200 iterations. A step that would lower the log-likelihood is rejected and
    the previous model returned, so the trace never decreases. A component
    whose weight falls under 1e-4 is removed and the remaining weights
    renormalized, so fewer than k components may come back; the trace then
    restarts and covers the final component set only.

    Parameters
    ----------
    pixels : PixelSet or np.ndarray
        The color samples.
    k : int
        Requested number of components.
    seed : int
        Seed of the VQ initialization.

    Returns
    -------
    MixtureModel
        The fitted model, with its log-likelihood trace.

    Raises
    ------
    TooFewSamples
        If there are fewer than 10 k samples.
    """
    data = _samples(pixels)
    n = len(data)
    if k < 1 or k > MAX_COMPONENTS:
        raise ValueError(f"Number of components must lie in 1..{MAX_COMPONENTS}, got {k}")
    if n < 10 * k:
        raise TooFewSamples(f"{n} samples are not enough to fit {k} components (need {10 * k})")

    codebook = vq_codebook(data, k, seed)
    one_hot = np.eye(k)[codebook.assignment]
    counts = one_hot.sum(axis=0)
    weights = counts / n
    means = codebook.centroids
    covs = _regularized_covariances(data, one_hot, means, counts)

    history = []
    accepted = None
    for iteration in range(EM_MAX_ITER + 1):
        model = MixtureModel(_components(weights, means, covs))
        # E-step
        log_prob = weighted_log_densities(model, data)
        log_norm = logsumexp(log_prob, axis=1)
        log_likelihood = float(log_norm.sum())
        if accepted is not None and log_likelihood < accepted[1]:
            logging.debug(
                f"EM iteration {iteration}: log-likelihood fell from {accepted[1]:.10g} "
                f"to {log_likelihood:.10g}, keeping the previous model"
            )
            model = accepted[0]
            break
        history.append(log_likelihood)
        previous = accepted
        accepted = (model, log_likelihood)
        if previous is not None:
            improvement = (log_likelihood - previous[1]) / max(abs(previous[1]), np.finfo(float).tiny)
            if improvement < EM_TOL:
                break
        if iteration == EM_MAX_ITER:
            break
        resp = np.exp(log_prob - log_norm[:, None])

        # M-step
        counts = resp.sum(axis=0)
        weights = counts / n
        keep = weights >= MIN_WEIGHT
        if not keep.all():
            removed = np.flatnonzero(~keep).tolist()
            logging.warning(f"EM iteration {iteration}: removing degenerate components {removed}")
            resp, counts = resp[:, keep], counts[keep]
            weights = counts / counts.sum()
            # the trace restarts with the reduced component set
            history, accepted = [], None
        means = (resp.T @ data) / counts[:, None]
        covs = _regularized_covariances(data, resp, means, counts)

    logging.info(f"Fitted {len(model)}-component mixture on {n} pixels in {len(history)} EM steps")
    return MixtureModel(model.components, log_likelihoods=tuple(history))
