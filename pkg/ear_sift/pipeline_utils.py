"""
Pipeline Utilities

Enrollment and verification of one ear image:

    load -> mask -> (color mixture -> slice regions -> KL gate)
         -> equalized-gray SIFT -> per-region keypoints -> fused template
         -> match against a reference -> decision

SIFT runs once over the whole equalized image; gating only decides which
keypoints are admitted, so one analysis serves every gating decision.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

from .config_utils import AFTER, GATE_GLOBAL, PRIOR, Config
from .divergence_utils import mixture_kl
from .error_utils import ConfigError, DimensionMismatch
from .image_utils import (
    ColorImage,
    Mask,
    PixelSet,
    check_pipeline_size,
    equalize_histogram,
    full_mask,
    masked_pixels,
    to_grayscale,
)
from .matching_utils import (
    Decision,
    MatchResult,
    RegionKeypoints,
    Template,
    decide,
    fuse_template,
    group_keypoints,
    match_templates,
)
from .mixture_utils import MixtureModel
from .segmentation_utils import SegmentationResult, gate_regions, segment_pixels
from .sift_utils import Keypoint, extract_sift, restrict_keypoints


@dataclass(frozen=True, eq=False)
class ImageAnalysis:
    """
    Everything computed once per image.

    Attributes
    ----------
    subject_id : str
        Identity the image belongs to (or claims).
    mask : Mask
        Crop mask (all-true when none was given).
    pixels : PixelSet
        Masked color samples.
    keypoints : tuple of Keypoint
        SIFT keypoints of the whole equalized image.
    segmentation : SegmentationResult or None
        Ungated color segmentation; None when not requested.
    """

    subject_id: str
    mask: Mask
    pixels: PixelSet
    keypoints: Tuple[Keypoint, ...]
    segmentation: Optional[SegmentationResult]


@dataclass(frozen=True, eq=False)
class Enrollment:
    """A template with the gated segmentation it came from (None in prior mode)."""

    template: Template
    segmentation: Optional[SegmentationResult]


@dataclass(frozen=True, eq=False)
class Verification:
    """
    Verification outcome.

    Attributes
    ----------
    result : MatchResult
        Probe against reference pairing.
    decision : Decision
        Accept / reject at psi.
    probe : Enrollment
        The probe's in-memory template.
    model_kl : float or None
        Mixture KL between the probe and reference color models, when both
        exist.
    """

    result: MatchResult
    decision: Decision
    probe: Enrollment
    model_kl: Optional[float]


def analyze_image(
    image: ColorImage,
    mask: Optional[Mask],
    config: Config,
    subject_id: str = "",
    segment: bool = True,
) -> ImageAnalysis:
    """
    Run the per-image stages: mask, SIFT on the equalized gray image and,
    when `segment` is set, the ungated color segmentation.

    Parameters
    ----------
    image : ColorImage
        The ear crop.
    mask : Mask or None
        Crop mask; None means the whole image.
    config : Config
        Pipeline settings.
    subject_id : str, optional
        Identity attached to the analysis.
    segment : bool, optional
        Fit the color mixture. Defaults to True.

    Returns
    -------
    ImageAnalysis
        The shared per-image results.

    Raises
    ------
    ImageTooSmall, DimensionMismatch, EmptyMask, TooFewSamples
        On unusable inputs.
    """
    check_pipeline_size(image.width, image.height)
    if mask is None:
        mask = full_mask(image.width, image.height)
    elif (mask.width, mask.height) != (image.width, image.height):
        raise DimensionMismatch(
            f"Mask is {mask.width}x{mask.height} but image is {image.width}x{image.height}"
        )
    pixels = masked_pixels(image, mask)
    gray = equalize_histogram(to_grayscale(image))
    keypoints = tuple(extract_sift(gray, None, config.sift))
    segmentation = None
    if segment:
        segmentation = segment_pixels(pixels, config.k, config.seed, image.width, image.height)
    return ImageAnalysis(subject_id, mask, pixels, keypoints, segmentation)


def build_template(
    analysis: ImageAnalysis,
    config: Config,
    mode: Optional[str] = None,
    gate_model: Optional[MixtureModel] = None,
) -> Enrollment:
    """
    Gate, group and fuse the keypoints of an analyzed image.

    In prior mode the crop mask is the single region and no color model is
    attached. In after mode the slice regions are gated against `gate_model`
    (the image's own model when None) and kept-region keypoints are fused.

    Parameters
    ----------
    analysis : ImageAnalysis
        Per-image results.
    config : Config
        Pipeline settings.
    mode : str, optional
        "prior" or "after"; defaults to config.mode.
    gate_model : MixtureModel, optional
        Reference or global skin model.

    Returns
    -------
    Enrollment
        Template and gated segmentation.

    Raises
    ------
    EmptyTemplate
        If no keypoint survives.
    """
    mode = mode or config.mode
    if mode == PRIOR:
        region = RegionKeypoints(0, tuple(restrict_keypoints(analysis.keypoints, analysis.mask)))
        return Enrollment(fuse_template([region], analysis.subject_id, None), None)
    if mode != AFTER:
        raise ConfigError(f"Unknown segmentation mode '{mode}'")
    if analysis.segmentation is None:
        raise ConfigError("After-segmentation mode needs an analysis with segmentation")

    seg = analysis.segmentation
    reference = gate_model if gate_model is not None else seg.model
    gated = gate_regions(seg, reference, config.tau_kl, config.w_min)
    regions = group_keypoints(analysis.keypoints, gated)
    logging.info(
        f"'{analysis.subject_id}': kept {len(regions)}/{seg.k_effective} regions, "
        f"{sum(len(r.keypoints) for r in regions)}/{len(analysis.keypoints)} keypoints"
    )
    return Enrollment(fuse_template(regions, analysis.subject_id, seg.model), gated)


def _gate_model(config: Config, own: Optional[MixtureModel], skin_model: Optional[MixtureModel]):
    if config.gate_mode == GATE_GLOBAL:
        if skin_model is None:
            raise ConfigError("gate_mode 'global' needs a skin model")
        return skin_model
    return own


def enroll_image(
    image: ColorImage,
    mask: Optional[Mask],
    config: Config,
    subject_id: str,
    skin_model: Optional[MixtureModel] = None,
) -> Enrollment:
    """
    Enroll one reference image: analyze it and build its template, gated
    against its own color model (or the global skin model).
    """
    segment = config.mode == AFTER
    analysis = analyze_image(image, mask, config, subject_id, segment=segment)
    return build_template(analysis, config, gate_model=_gate_model(config, None, skin_model))


def verify_image(
    image: ColorImage,
    mask: Optional[Mask],
    reference: Template,
    config: Config,
    mode: Optional[str] = None,
    skin_model: Optional[MixtureModel] = None,
) -> Verification:
    """
    Verify a probe image against an enrolled template.

    The probe is enrolled in memory under the claimed identity, gated against
    the reference template's stored color model in reference gate mode, then
    matched and thresholded at config.match.psi.

    Parameters
    ----------
    image : ColorImage
        Probe ear crop.
    mask : Mask or None
        Probe mask.
    reference : Template
        Enrolled template.
    config : Config
        Pipeline settings.
    mode : str, optional
        Segmentation mode; defaults to "after" when the reference carries a
        color model and "prior" otherwise.
    skin_model : MixtureModel, optional
        Global skin model for gate_mode "global".

    Returns
    -------
    Verification
        Match, decision and probe template.
    """
    if mode is None:
        mode = AFTER if reference.source_model is not None else PRIOR
    analysis = analyze_image(image, mask, config, reference.subject_id, segment=mode == AFTER)
    gate_model = _gate_model(config, reference.source_model, skin_model)
    probe = build_template(analysis, config, mode=mode, gate_model=gate_model)
    result = match_templates(probe.template, reference, config.match)
    decision = decide(result, config.match.psi)

    model_kl = None
    if probe.template.source_model is not None and reference.source_model is not None:
        model_kl, _ = mixture_kl(probe.template.source_model, reference.source_model)
    logging.info(
        f"Verification of '{reference.subject_id}': {result.match_count} pairs, "
        f"score {result.normalized_score:.4f}, accept={decision.accept}"
    )
    return Verification(result, decision, probe, model_kl)
