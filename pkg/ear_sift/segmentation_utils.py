"""
Segmentation Utilities

Color slice regions: masked pixels are classified to their most probable
mixture component, grouped into one region per component, and gated by
density (minimum pixel fraction) and color consistency (KL divergence to a
reference model). Regions are label sets; spatial connectivity is not
required.
"""

import dataclasses
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .divergence_utils import nearest_component, report_kl
from .error_utils import ConfigError
from .image_utils import Mask, PixelSet
from .mixture_utils import MixtureModel, fit_gmm, weighted_log_densities

OUTSIDE_LABEL = 255


@dataclass(frozen=True, eq=False)
class SliceRegion:
    """
    Pixels assigned to one mixture component.

    Attributes
    ----------
    component_index : int
        Index into the segmentation's mixture.
    pixel_locations : np.ndarray
        m x 2 array of (x, y) locations.
    weight_fraction : float
        Region pixels over masked pixels.
    kept : bool
        Gate decision.
    kl_to_reference : float
        Minimal divergence to the gating model (NaN before gating).
    fallback : bool
        True when the region is kept only because no region passed the gate.
    """

    component_index: int
    pixel_locations: np.ndarray
    weight_fraction: float
    kept: bool = False
    kl_to_reference: float = float("nan")
    fallback: bool = False

    @property
    def pixel_count(self) -> int:
        return len(self.pixel_locations)


@dataclass(frozen=True, eq=False)
class SegmentationResult:
    """
    Mixture, its slice regions and the raster they live in.

    Attributes
    ----------
    model : MixtureModel
        The fitted color mixture.
    regions : tuple of SliceRegion
        Regions ordered by component index.
    width, height : int
        Image dimensions.
    """

    model: MixtureModel
    regions: Tuple[SliceRegion, ...]
    width: int
    height: int

    @property
    def k_effective(self) -> int:
        return len(self.regions)

    @property
    def n_pixels(self) -> int:
        return sum(r.pixel_count for r in self.regions)

    @property
    def kept_regions(self) -> Tuple[SliceRegion, ...]:
        return tuple(r for r in self.regions if r.kept)


def classify_pixels(model: MixtureModel, pixels: PixelSet) -> np.ndarray:
    """
    Label every pixel with argmax_i P_i f(D | i).

    The comparison is done in the log domain; ties go to the lowest
    component index.

    Returns
    -------
    np.ndarray
        Integer label per pixel.
    """
    return np.argmax(weighted_log_densities(model, pixels.colors), axis=1)


def extract_regions(labels: np.ndarray, pixels: PixelSet, model: MixtureModel) -> Tuple[SliceRegion, ...]:
    """
    Group labeled pixels into one region per component owning pixels.

    Parameters
    ----------
    labels : np.ndarray
        Component index of every pixel.
    pixels : PixelSet
        The labeled pixels.
    model : MixtureModel
        The mixture the labels index into.

    Returns
    -------
    tuple of SliceRegion
        Regions ordered by component index, not yet gated.
    """
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= len(model)):
        raise ValueError(f"Labels must index the {len(model)} mixture components")
    n = len(pixels)
    regions = []
    for index in np.unique(labels):
        locations = pixels.locations[labels == index]
        regions.append(SliceRegion(int(index), locations, len(locations) / n))
    return tuple(regions)


def segment_pixels(pixels: PixelSet, k: int, seed: int, width: int, height: int) -> SegmentationResult:
    """
    Fit the color mixture on masked pixels and split them into slice regions.

    Parameters
    ----------
    pixels : PixelSet
        Masked pixels of the image.
    k : int
        Requested number of mixture components.
    seed : int
        Seed of the mixture initialization.
    width, height : int
        Dimensions of the source image.

    Returns
    -------
    SegmentationResult
        Ungated segmentation.
    """
    model = fit_gmm(pixels, k, seed)
    labels = classify_pixels(model, pixels)
    regions = extract_regions(labels, pixels, model)
    logging.info(f"Segmented {len(pixels)} pixels into {len(regions)} slice regions")
    return SegmentationResult(model, regions, width, height)


def gate_regions(
    seg: SegmentationResult,
    reference: MixtureModel,
    tau_kl: float,
    w_min: float,
) -> SegmentationResult:
    """
    Decide which slice regions are kept.

    A region is kept when it holds at least `w_min` of the masked pixels and
    its component is within `tau_kl` (KL divergence) of some component of
    `reference`. When no region qualifies, the one with the smallest
    divergence is kept and flagged as a fallback.

    Parameters
    ----------
    seg : SegmentationResult
        The segmentation to gate.
    reference : MixtureModel
        Reference ear model or global skin model.
    tau_kl : float
        Positive divergence threshold.
    w_min : float
        Minimum pixel fraction, in [0, 1).

    Returns
    -------
    SegmentationResult
        A copy with `kept`, `kl_to_reference` and `fallback` filled in.
    """
    if not tau_kl > 0.0:
        raise ConfigError(f"tau_kl must be positive, got {tau_kl}")
    if not 0.0 <= w_min < 1.0:
        raise ConfigError(f"w_min must lie in [0, 1), got {w_min}")

    gated = []
    for region in seg.regions:
        kl, j = nearest_component(seg.model.components[region.component_index], reference)
        kept = region.weight_fraction >= w_min and kl <= tau_kl
        logging.debug(
            f"Region {region.component_index}: fraction {region.weight_fraction:.4f}, "
            f"KL {kl:.6g} to reference component {j}, kept={kept}"
        )
        gated.append(dataclasses.replace(region, kept=kept, kl_to_reference=kl, fallback=False))

    if not any(r.kept for r in gated):
        best = int(np.argmin([r.kl_to_reference for r in gated]))
        gated[best] = dataclasses.replace(gated[best], kept=True, fallback=True)
        logging.warning(
            f"No slice region passed the gate; keeping region "
            f"{gated[best].component_index} (minimal KL) as fallback"
        )
    return dataclasses.replace(seg, regions=tuple(gated))


def validate_cluster_counts(n: int, k1: int, k2: int, k_intra: int) -> bool:
    """
    Check the intra-class cluster-count relation between two instances:

        k1, k2 < n  and  (k1 < k_intra < k2  or  k2 < k_intra < k1)

    The result is advisory: it is logged and never blocks matching.

    Example
    -------
    >>> validate_cluster_counts(1000, 3, 7, 5)
    True
    """
    if min(n, k1, k2, k_intra) < 1:
        raise ValueError("Cluster counts must be at least 1")
    holds = k1 < n and k2 < n and (k1 < k_intra < k2 or k2 < k_intra < k1)
    if not holds:
        logging.warning(
            f"Cluster-count relation does not hold: n={n}, k1={k1}, k2={k2}, k_intra={k_intra}"
        )
    return holds


def keep_mask(seg: SegmentationResult) -> Mask:
    """Mask of the pixels belonging to kept regions."""
    bits = np.zeros((seg.height, seg.width), dtype=bool)
    for region in seg.kept_regions:
        bits[region.pixel_locations[:, 1], region.pixel_locations[:, 0]] = True
    return Mask(bits)


def label_map(seg: SegmentationResult) -> np.ndarray:
    """
    8-bit raster of component indices; 255 marks pixels outside the mask.
    """
    labels = np.full((seg.height, seg.width), OUTSIDE_LABEL, dtype=np.uint8)
    for region in seg.regions:
        labels[region.pixel_locations[:, 1], region.pixel_locations[:, 0]] = region.component_index
    return labels


def fit_global_model(pixel_sets: Sequence[PixelSet], k: int, seed: int) -> MixtureModel:
    """
    Fit one skin-color mixture on the pooled pixels of several images.

    Used as the gating model when regions are compared with a global skin
    model instead of the claimed identity's reference model.
    """
    colors = np.concatenate([p.colors for p in pixel_sets], axis=0)
    logging.info(f"Fitting global skin model on {len(colors)} pooled pixels")
    return fit_gmm(colors, k, seed)


def region_summary(seg: Optional[SegmentationResult]) -> list:
    """JSON-ready description of every region (empty without segmentation)."""
    if seg is None:
        return []
    return [
        {
            "component_index": r.component_index,
            "pixel_count": r.pixel_count,
            "fraction": r.weight_fraction,
            "kept": r.kept,
            "kl_to_reference": None if np.isnan(r.kl_to_reference) else report_kl(r.kl_to_reference),
            "fallback": r.fallback,
        }
        for r in seg.regions
    ]
