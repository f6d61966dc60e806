import numpy as np
import pytest
from scipy.stats import multivariate_normal

from ear_sift import (
    ConfigError,
    GaussianComponent,
    MixtureModel,
    consistency_gate,
    gaussian_kl,
    mixture_kl,
    nearest_component,
    report_kl,
)


def _spd(rng: np.random.Generator, scale: float = 0.05) -> np.ndarray:
    a = rng.standard_normal((3, 3)) * scale
    cov = a @ a.T + 0.1 * scale ** 2 * np.eye(3)
    return 0.5 * (cov + cov.T)


def _component(rng: np.random.Generator, weight: float = 1.0) -> GaussianComponent:
    return GaussianComponent(weight, rng.uniform(size=3), _spd(rng))


def _mixture(rng: np.random.Generator, n: int) -> MixtureModel:
    weights = rng.dirichlet(np.ones(n))
    weights[-1] = 1.0 - weights[:-1].sum()
    return MixtureModel(
        tuple(
            GaussianComponent(float(w), rng.uniform(size=3), np.diag(rng.uniform(0.005, 0.02, size=3)))
            for w in weights
        )
    )


def _shifted(model: MixtureModel, shift: float) -> MixtureModel:
    offset = np.full(3, shift / np.sqrt(3.0))
    return MixtureModel(
        tuple(GaussianComponent(c.weight, c.mean + offset, c.covariance) for c in model.components)
    )


def test_gaussian_kl_closed_form():
    """
    Test the `gaussian_kl` function on closed-form cases.

    - Identical densities give exactly 0.
    - A unit mean step with identity covariances gives 0.5.
    - The divergence is not symmetric.
    """
    a = GaussianComponent(1.0, np.zeros(3), np.eye(3))
    b = GaussianComponent(1.0, np.array([1.0, 0.0, 0.0]), np.eye(3))
    assert gaussian_kl(a, a) == 0.0
    assert gaussian_kl(a, b) == pytest.approx(0.5)

    wide = GaussianComponent(1.0, np.zeros(3), 4.0 * np.eye(3))
    assert abs(gaussian_kl(a, wide) - gaussian_kl(wide, a)) > 0.1


def test_gaussian_kl_monte_carlo():
    """
    Test `gaussian_kl` against a Monte-Carlo estimate of E_a[log f_a - log f_b].
    """
    rng = np.random.default_rng(2024)
    a = _component(rng)
    b = _component(rng)
    samples = rng.multivariate_normal(a.mean, a.covariance, size=200_000)
    log_ratio = multivariate_normal(a.mean, a.covariance).logpdf(samples) - multivariate_normal(
        b.mean, b.covariance
    ).logpdf(samples)
    estimate = log_ratio.mean()
    stderr = log_ratio.std(ddof=1) / np.sqrt(len(log_ratio))
    assert abs(gaussian_kl(a, b) - estimate) <= 4.0 * stderr


def test_gaussian_kl_nonnegative():
    """
    Test that `gaussian_kl` is non-negative on 200 random pairs.
    """
    rng = np.random.default_rng(7)
    for _ in range(200):
        a, b = _component(rng), _component(rng)
        assert gaussian_kl(a, b) >= -1e-12
        assert gaussian_kl(a, a) == 0.0


def test_mixture_kl_cases():
    """
    Test the `mixture_kl` function on hand-evaluated cases.

    - P = Q with one component gives 0.
    - One component each equals `gaussian_kl`.
    - Two halves against a single component equal to the first half.
    """
    rng = np.random.default_rng(3)
    a, b = _component(rng), _component(rng)
    single_a = MixtureModel((a,))
    single_b = MixtureModel((b,))
    assert mixture_kl(single_a, single_a)[0] == 0.0
    assert mixture_kl(single_a, single_b)[0] == gaussian_kl(a, b)

    p1 = GaussianComponent(0.5, np.array([0.2, 0.2, 0.2]), 0.01 * np.eye(3))
    p2 = GaussianComponent(0.5, np.array([0.8, 0.7, 0.6]), 0.02 * np.eye(3))
    q1 = GaussianComponent(1.0, p1.mean, p1.covariance)
    value, match = mixture_kl(MixtureModel((p1, p2)), MixtureModel((q1,)))
    expected = 0.5 * (0.0 + np.log(0.5)) + 0.5 * (gaussian_kl(p2, q1) + np.log(0.5))
    assert value == pytest.approx(expected, rel=1e-12)
    assert [(m.p_index, m.q_index) for m in match.pairs] == [(0, 0), (1, 0)]
    assert report_kl(np.log(0.5)) == 0.0


def test_mixture_kl_ordering():
    """
    Test that small perturbations of a mixture score below large ones.

    - Means shifted by 0.01 against 0.5, in at least 95 of 100 trials.
    """
    rng = np.random.default_rng(11)
    wins = 0
    for _ in range(100):
        p = _mixture(rng, int(rng.integers(2, 5)))
        small = mixture_kl(p, _shifted(p, 0.01))[0]
        large = mixture_kl(p, _shifted(p, 0.5))[0]
        wins += small < large
    assert wins >= 95


def test_consistency_gate():
    """
    Test the `consistency_gate` function.

    - A region identical to a model component always passes.
    - A region 10 units away from every unit-covariance component fails tau 1.
    - The decision flips exactly around the minimal divergence.
    - Non-positive thresholds are refused.
    """
    rng = np.random.default_rng(5)
    q = _mixture(rng, 3)
    region = GaussianComponent(0.3, q.components[1].mean, q.components[1].covariance)
    assert consistency_gate(region, q, 1e-9)

    unit = MixtureModel(
        (
            GaussianComponent(0.5, np.zeros(3), np.eye(3)),
            GaussianComponent(0.5, np.array([0.0, 12.0, 0.0]), np.eye(3)),
        )
    )
    far = GaussianComponent(1.0, np.array([10.0, 0.0, 0.0]), np.eye(3))
    assert nearest_component(far, unit) == (pytest.approx(50.0), 0)
    assert not consistency_gate(far, unit, 1.0)

    for _ in range(10):
        region = _component(rng, 0.2)
        q = _mixture(rng, 3)
        kl_min = min(gaussian_kl(region, c) for c in q.components)
        assert consistency_gate(region, q, kl_min + 1e-6)
        assert not consistency_gate(region, q, kl_min - 1e-6)

    with pytest.raises(ConfigError):
        consistency_gate(region, q, 0.0)
