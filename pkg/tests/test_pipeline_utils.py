import numpy as np
import pytest

from ear_sift import (
    ColorImage,
    Config,
    ConfigError,
    DimensionMismatch,
    EmptyTemplate,
    ImageTooSmall,
    Mask,
    analyze_image,
    build_template,
    config_from_dict,
    ear_mask,
    enroll_image,
    match_templates,
    subject_images,
    verify_image,
)
from ear_sift.sift_utils import keypoint_pixel


@pytest.fixture(scope="module")
def images():
    """Reference and probe of two synthetic subjects, with the shared mask."""
    ref_a, (probe_a,) = subject_images(0, 0)
    _, (probe_b,) = subject_images(0, 1)
    return {
        "ref_a": ColorImage(ref_a),
        "probe_a": ColorImage(probe_a),
        "probe_b": ColorImage(probe_b),
        "mask": ear_mask(),
    }


@pytest.fixture(scope="module")
def analyses(images):
    """One full analysis per image, reused across gating decisions."""
    config = Config()
    return {
        name: analyze_image(images[name], images["mask"], config, subject_id=name)
        for name in ("ref_a", "probe_a", "probe_b")
    }


def test_prior_template_inside_mask(analyses, images):
    """
    Test the prior mode of `build_template`.

    - Every keypoint lies inside the crop mask; no color model is attached.
    """
    enrollment = build_template(analyses["ref_a"], Config(), mode="prior")
    template = enrollment.template
    assert len(template) > 0
    assert template.source_model is None and template.k_count == 1
    assert enrollment.segmentation is None
    bits = images["mask"].bits
    for kp in template.keypoints:
        x, y = keypoint_pixel(kp)
        assert bits[y, x]


def test_after_template_provenance(analyses):
    """
    Test the after mode of `build_template`.

    - Provenance only names kept regions.
    - The template is a subset of the prior-mode keypoints.
    """
    config = Config()
    enrollment = build_template(analyses["ref_a"], config, mode="after")
    kept = {r.component_index for r in enrollment.segmentation.kept_regions}
    assert set(enrollment.template.provenance) <= kept
    assert enrollment.template.k_count == len(kept)
    assert enrollment.template.source_model is analyses["ref_a"].segmentation.model

    prior = build_template(analyses["ref_a"], config, mode="prior").template
    assert set(map(id, enrollment.template.keypoints)) <= set(map(id, prior.keypoints))

    with pytest.raises(ConfigError):
        build_template(analyses["ref_a"], config, mode="during")


def _score(analysis, reference, config) -> float:
    try:
        probe = build_template(analysis, config, gate_model=reference.source_model).template
    except EmptyTemplate:
        return 0.0
    return match_templates(probe, reference, config.match).normalized_score


def test_genuine_scores_above_impostor(analyses):
    """
    Test that a subject's own probe scores above another subject's probe.

    - Both modes, both strategies.
    - A probe whose gated template is empty scores 0.
    """
    for mode in ("prior", "after"):
        for strategy in ("nn", "ed"):
            config = config_from_dict({"mode": mode, "match.strategy": strategy})
            reference = build_template(analyses["ref_a"], config).template
            genuine_score = _score(analyses["probe_a"], reference, config)
            impostor_score = _score(analyses["probe_b"], reference, config)
            assert genuine_score > impostor_score


def test_enroll_and_verify(images):
    """
    Test `enroll_image` followed by `verify_image`.

    - The genuine probe is accepted at a low psi, with a model KL reported.
    """
    config = config_from_dict({"match.psi": 0.05})
    reference = enroll_image(images["ref_a"], images["mask"], config, "s001").template
    assert reference.subject_id == "s001"

    verification = verify_image(images["probe_a"], images["mask"], reference, config)
    assert verification.decision.accept
    assert verification.result.match_count > 0
    assert verification.model_kl is not None and verification.model_kl >= 0.0
    assert verification.probe.template.subject_id == "s001"


def test_pipeline_errors(images):
    """
    Test the input checks of the pipeline.

    - A mask of another size raises DimensionMismatch.
    - A 10 x 10 image raises ImageTooSmall.
    - gate_mode "global" without a skin model raises ConfigError.
    """
    config = Config()
    with pytest.raises(DimensionMismatch):
        analyze_image(images["ref_a"], Mask(np.ones((20, 20), dtype=bool)), config)
    with pytest.raises(ImageTooSmall):
        analyze_image(ColorImage(np.full((10, 10, 3), 0.5)), None, config)

    rng = np.random.default_rng(5)
    small = ColorImage(rng.uniform(size=(32, 32, 3)))
    with pytest.raises(ConfigError):
        enroll_image(small, None, config_from_dict({"gate_mode": "global"}), "s001")
