import numpy as np
import pytest
from scipy.stats import multivariate_normal

from ear_sift import (
    ColorImage,
    ConfigError,
    GaussianComponent,
    Mask,
    MixtureModel,
    PixelSet,
    SegmentationResult,
    SliceRegion,
    classify_pixels,
    extract_regions,
    fit_global_model,
    full_mask,
    gate_regions,
    keep_mask,
    label_map,
    masked_pixels,
    segment_pixels,
    validate_cluster_counts,
)
from ear_sift.segmentation_utils import OUTSIDE_LABEL, region_summary


def _pixels(colors: np.ndarray) -> PixelSet:
    colors = np.asarray(colors, dtype=np.float64).reshape(-1, 3)
    locations = np.stack([np.arange(len(colors)), np.zeros(len(colors), dtype=int)], axis=1)
    return PixelSet(locations, colors)


def _random_model(rng: np.random.Generator, n: int) -> MixtureModel:
    weights = rng.dirichlet(np.ones(n))
    weights[-1] = 1.0 - weights[:-1].sum()
    return MixtureModel(
        tuple(
            GaussianComponent(float(w), rng.uniform(size=3), np.diag(rng.uniform(0.005, 0.05, size=3)))
            for w in weights
        )
    )


def _two_color_image(width: int = 20, height: int = 20) -> ColorImage:
    data = np.empty((height, width, 3))
    data[:, : width // 2] = (0.8, 0.5, 0.4)
    data[:, width // 2:] = (0.2, 0.3, 0.6)
    return ColorImage(data)


def _two_region_segmentation() -> SegmentationResult:
    model = MixtureModel(
        (
            GaussianComponent(0.6, np.array([0.8, 0.5, 0.4]), 0.01 * np.eye(3)),
            GaussianComponent(0.4, np.array([0.2, 0.3, 0.6]), 0.01 * np.eye(3)),
        )
    )
    first = np.array([[x, 0] for x in range(6)])
    second = np.array([[x, 1] for x in range(4)])
    regions = (SliceRegion(0, first, 0.6), SliceRegion(1, second, 0.4))
    return SegmentationResult(model, regions, width=6, height=2)


def test_classify_pixels_cases():
    """
    Test the `classify_pixels` function.

    - A pixel next to the first component goes to it.
    - An exact tie goes to the lowest index.
    """
    model = MixtureModel(
        (
            GaussianComponent(0.5, np.array([0.1, 0.1, 0.1]), 0.01 * np.eye(3)),
            GaussianComponent(0.5, np.array([0.9, 0.1, 0.1]), 0.01 * np.eye(3)),
        )
    )
    assert classify_pixels(model, _pixels([[0.05, 0.1, 0.1]])).tolist() == [0]

    tie = MixtureModel(
        (
            GaussianComponent(0.5, np.array([0.25, 0.5, 0.5]), 0.0625 * np.eye(3)),
            GaussianComponent(0.5, np.array([0.75, 0.5, 0.5]), 0.0625 * np.eye(3)),
        )
    )
    assert classify_pixels(tie, _pixels([[0.5, 0.5, 0.5]])).tolist() == [0]


def test_classify_pixels_brute_force():
    """
    Test `classify_pixels` against an independent argmax of P_i f(D | i).
    """
    rng = np.random.default_rng(8)
    for _ in range(20):
        model = _random_model(rng, 3)
        colors = rng.uniform(size=(200, 3))
        scores = np.stack(
            [c.weight * multivariate_normal(c.mean, c.covariance).pdf(colors) for c in model.components],
            axis=1,
        )
        assert np.array_equal(classify_pixels(model, _pixels(colors)), np.argmax(scores, axis=1))


def test_extract_regions():
    """
    Test the `extract_regions` function.

    - A single label gives one region of fraction 1.
    - Labels {0, 0, 1} give fractions 2/3 and 1/3.
    - Components without pixels get no region.
    """
    model = _random_model(np.random.default_rng(0), 3)
    pixels = _pixels(np.full((3, 3), 0.5))

    single = extract_regions(np.zeros(3, dtype=int), pixels, model)
    assert len(single) == 1 and single[0].weight_fraction == 1.0

    two = extract_regions(np.array([0, 0, 1]), pixels, model)
    assert [r.component_index for r in two] == [0, 1]
    assert [r.weight_fraction for r in two] == pytest.approx([2 / 3, 1 / 3])

    skipping = extract_regions(np.array([2, 0, 2]), pixels, model)
    assert [r.component_index for r in skipping] == [0, 2]


def test_segment_two_colors():
    """
    Test `segment_pixels` on a two-solid-color image.

    - The exact color partition is recovered.
    - Every masked pixel is in exactly one region.
    """
    img = _two_color_image()
    pixels = masked_pixels(img, full_mask(img.width, img.height))
    seg = segment_pixels(pixels, 2, seed=3, width=img.width, height=img.height)
    assert seg.k_effective == 2
    assert seg.n_pixels == len(pixels)

    labels = label_map(seg)
    left, right = labels[:, :10], labels[:, 10:]
    assert len(np.unique(left)) == 1 and len(np.unique(right)) == 1
    assert left[0, 0] != right[0, 0]
    assert OUTSIDE_LABEL not in labels


def test_partition_with_mask():
    """
    Test the partition property on masked random images.

    - Region pixel counts sum to the masked pixel count.
    - No location is shared by two regions; outside pixels stay 255.
    """
    rng = np.random.default_rng(4)
    for seed in range(3):
        img = ColorImage(rng.uniform(size=(24, 20, 3)))
        bits = np.zeros((24, 20), dtype=bool)
        bits[3:20, 2:17] = True
        pixels = masked_pixels(img, Mask(bits))
        seg = segment_pixels(pixels, 3, seed=seed, width=20, height=24)
        assert seg.n_pixels == int(bits.sum())
        locations = np.concatenate([r.pixel_locations for r in seg.regions])
        assert len({tuple(p) for p in locations.tolist()}) == len(locations)
        assert np.all(label_map(seg)[~bits] == OUTSIDE_LABEL)


def test_gate_regions_cases():
    """
    Test the `gate_regions` function on hand-built segmentations.

    - Gating against its own model with w_min 0 keeps every region.
    - w_min 0.5 keeps only the 0.6 region.
    - When everything fails, the minimal-KL region is kept as a fallback.
    """
    seg = _two_region_segmentation()
    kept = gate_regions(seg, seg.model, tau_kl=1e-9, w_min=0.0)
    assert [r.kept for r in kept.regions] == [True, True]
    assert [r.kl_to_reference for r in kept.regions] == [0.0, 0.0]

    dense = gate_regions(seg, seg.model, tau_kl=1.0, w_min=0.5)
    assert [r.kept for r in dense.regions] == [True, False]

    far = MixtureModel((GaussianComponent(1.0, np.array([0.25, 0.3, 0.6]), 0.01 * np.eye(3)),))
    fallback = gate_regions(seg, far, tau_kl=1e-3, w_min=0.9)
    assert [r.kept for r in fallback.regions] == [False, True]
    assert fallback.regions[1].fallback
    assert keep_mask(fallback).count == 4

    summary = region_summary(fallback)
    assert [s["kept"] for s in summary] == [False, True]
    assert region_summary(None) == []

    with pytest.raises(ConfigError):
        gate_regions(seg, seg.model, tau_kl=0.0, w_min=0.0)
    with pytest.raises(ConfigError):
        gate_regions(seg, seg.model, tau_kl=1.0, w_min=1.0)


def test_gate_regions_monotone():
    """
    Test the monotonicity of `gate_regions`.

    - Raising tau_kl never drops a kept region (w_min fixed).
    - Raising w_min never keeps a dropped region, fallbacks excepted.
    """
    rng = np.random.default_rng(21)
    for seed in range(3):
        centers = rng.uniform(0.1, 0.9, size=(4, 3))
        colors = np.concatenate([rng.normal(c, 0.04, size=(n, 3)) for c, n in zip(centers, (120, 60, 30, 10))])
        pixels = _pixels(np.clip(colors, 0.0, 1.0))
        seg = segment_pixels(pixels, 4, seed=seed, width=len(colors), height=1)
        reference = _random_model(rng, 3)

        previous = set()
        for tau in (0.5, 2.0, 8.0, 32.0, 128.0):
            kept = {r.component_index for r in gate_regions(seg, reference, tau, 0.0).kept_regions}
            assert previous <= kept
            previous = kept

        previous = None
        for w_min in (0.0, 0.05, 0.1, 0.3, 0.6):
            gated = gate_regions(seg, seg.model, 1.0, w_min)
            kept = {r.component_index for r in gated.kept_regions if not r.fallback}
            if previous is not None:
                assert kept <= previous
            previous = kept


def test_validate_cluster_counts():
    """
    Test the `validate_cluster_counts` function.

    - Both orderings of a strict chain hold; equal counts do not.
    """
    assert validate_cluster_counts(1000, 3, 7, 5)
    assert validate_cluster_counts(1000, 7, 3, 5)
    assert not validate_cluster_counts(1000, 4, 4, 4)
    assert not validate_cluster_counts(6, 3, 7, 5)


def test_fit_global_model():
    """
    Test that `fit_global_model` pools the pixels of several images.
    """
    img = _two_color_image()
    pixels = masked_pixels(img, full_mask(img.width, img.height))
    model = fit_global_model([pixels, pixels], 2, seed=0)
    assert len(model) == 2
    assert sorted(model.weights.tolist()) == pytest.approx([0.5, 0.5], abs=1e-6)
