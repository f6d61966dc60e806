"""
Divergence Utilities

Kullback-Leibler divergences used to keep color consistency between slice
regions and ear models:

 - closed form between two multivariate normals
 - the matching-based approximation between two mixtures, where every
   component of P is paired with its closest component of Q:

       KL(P || Q) ~= sum_i P_i [ min_j KL(f_p(.|i) || f_q(.|j)) + log(P_i / Q_j*) ]

 - the per-region consistency gate.
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.linalg import cho_solve

from .error_utils import ConfigError
from .mixture_utils import DIM, GaussianComponent, MixtureModel


@dataclass(frozen=True)
class MatchedComponent:
    """One row of a ComponentMatch: component i of P paired with j of Q."""

    p_index: int
    q_index: int
    kl: float
    log_weight_ratio: float


@dataclass(frozen=True)
class ComponentMatch:
    """Per-component pairing used by the mixture approximation."""

    pairs: Tuple[MatchedComponent, ...]


def report_kl(value: float) -> float:
    """Clamp a divergence at zero for reporting; internal values stay signed."""
    return max(0.0, float(value))


def gaussian_kl(a: GaussianComponent, b: GaussianComponent) -> float:
    """
    KL(a || b) between two 3-d normal densities (weights are ignored).

        1/2 [ tr(Sb^-1 Sa) + (mb - ma)^T Sb^-1 (mb - ma) - p + ln(|Sb| / |Sa|) ]

    Parameters
    ----------
    a, b : GaussianComponent
        The two components.

    Returns
    -------
    float
        The divergence; exactly 0 when both densities are identical.

    Raises
    ------
    SingularCovariance
        If either covariance cannot be factorized.

    Example
    -------
    >>> a = GaussianComponent(1.0, np.zeros(3), np.eye(3))
    >>> b = GaussianComponent(1.0, np.array([1.0, 0.0, 0.0]), np.eye(3))
    >>> gaussian_kl(a, b)
    0.5
    """
    if np.array_equal(a.mean, b.mean) and np.array_equal(a.covariance, b.covariance):
        return 0.0
    chol_a = a.cholesky()
    chol_b = b.cholesky()
    delta = b.mean - a.mean
    trace = float(np.trace(cho_solve((chol_b, True), a.covariance)))
    maha = float(delta @ cho_solve((chol_b, True), delta))
    log_det_a = 2.0 * np.sum(np.log(np.diag(chol_a)))
    log_det_b = 2.0 * np.sum(np.log(np.diag(chol_b)))
    return 0.5 * (trace + maha - DIM + float(log_det_b - log_det_a))


def nearest_component(g: GaussianComponent, q: MixtureModel) -> Tuple[float, int]:
    """
    Find the component of `q` closest to `g` in KL(g || q_j).

    Returns
    -------
    Tuple[float, int]
        The minimal divergence and the index attaining it (lowest on ties).
    """
    divergences = [gaussian_kl(g, c) for c in q.components]
    j = int(np.argmin(divergences))
    return divergences[j], j


def mixture_kl(p: MixtureModel, q: MixtureModel) -> Tuple[float, ComponentMatch]:
    """
    Matching-based approximation of KL(P || Q) between two mixtures.

    The log term uses mixture weights, log(P_i / Q_j*), where j* is the
    component of Q matched to component i of P.

    Parameters
    ----------
    p, q : MixtureModel
        The two mixtures.

    Returns
    -------
    Tuple[float, ComponentMatch]
        The (unclamped) approximation and the pairing that produced it.
    """
    total = 0.0
    pairs = []
    for i, component in enumerate(p.components):
        kl, j = nearest_component(component, q)
        log_ratio = float(np.log(component.weight / q.components[j].weight))
        total += component.weight * (kl + log_ratio)
        pairs.append(MatchedComponent(i, j, kl, log_ratio))
    return total, ComponentMatch(tuple(pairs))


def consistency_gate(p_region: GaussianComponent, q: MixtureModel, tau_kl: float) -> bool:
    """
    Keep a region whose color component lies within `tau_kl` of some
    component of `q`.

    Parameters
    ----------
    p_region : GaussianComponent
        The region's mixture component.
    q : MixtureModel
        Reference (or global skin) model.
    tau_kl : float
        Positive divergence threshold.

    Returns
    -------
    bool
        True iff min_j KL(p_region || q_j) <= tau_kl.
    """
    if not tau_kl > 0.0:
        raise ConfigError(f"tau_kl must be positive, got {tau_kl}")
    kl, j = nearest_component(p_region, q)
    logging.debug(f"Consistency gate: min KL {kl:.6g} (component {j}) vs tau {tau_kl}")
    return kl <= tau_kl
