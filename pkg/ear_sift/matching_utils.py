"""
Matching Utilities

Feature-level fusion and template matching:
 - per-region keypoint sets are concatenated into one augmented template
 - probe and reference descriptors are paired one-to-one, either by the
   nearest-neighbor ratio test (NN) or by mutual nearest neighbors under an
   absolute distance (ED)
 - the paired count, normalized by the smaller template, is thresholded
   against psi to accept or reject the claimed identity

Besides the paired count, every match reports the root of the summed squared
distances of its pairs (d_final).
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from .error_utils import ConfigError, EmptyTemplate
from .mixture_utils import MixtureModel
from .segmentation_utils import SegmentationResult, label_map
from .sift_utils import Keypoint, keypoint_pixel

NN = "nn"
ED = "ed"
STRATEGIES = (NN, ED)


@dataclass(frozen=True)
class MatchParams:
    """
    Matching settings.

    Attributes
    ----------
    strategy : str
        "nn" (ratio test) or "ed" (mutual nearest neighbors under d_abs).
    ratio : float
        NN ratio, in (0, 1).
    d_abs : float
        ED absolute distance bound on unit-norm descriptors, > 0.
    psi : float
        Decision threshold on the normalized score, in [0, 1].
    """

    strategy: str = NN
    ratio: float = 0.8
    d_abs: float = 0.35
    psi: float = 0.3

    def __post_init__(self):
        strategy = str(self.strategy).lower()
        if strategy not in STRATEGIES:
            raise ConfigError(f"Unknown matching strategy '{self.strategy}', expected one of {STRATEGIES}")
        object.__setattr__(self, "strategy", strategy)
        if not 0.0 < self.ratio < 1.0:
            raise ConfigError(f"match.ratio must lie in (0, 1), got {self.ratio}")
        if not self.d_abs > 0.0:
            raise ConfigError(f"match.d_abs must be positive, got {self.d_abs}")
        if not 0.0 <= self.psi <= 1.0:
            raise ConfigError(f"match.psi must lie in [0, 1], got {self.psi}")


@dataclass(frozen=True, eq=False)
class RegionKeypoints:
    """Keypoints whose rounded location falls in one kept slice region."""

    region_index: int
    keypoints: Tuple[Keypoint, ...]


@dataclass(frozen=True, eq=False)
class Template:
    """
    Augmented keypoint set of one enrolled (or probed) ear.

    Attributes
    ----------
    subject_id : str
        Claimed or enrolled identity.
    keypoints : tuple of Keypoint
        Concatenation of the kept regions' keypoints.
    provenance : tuple of int
        Region (component) index of every keypoint.
    source_model : MixtureModel or None
        Color model of the image; None when no segmentation was done.
    k_count : int
        Number of kept regions.
    """

    subject_id: str
    keypoints: Tuple[Keypoint, ...]
    provenance: Tuple[int, ...]
    source_model: Optional[MixtureModel]
    k_count: int

    def __post_init__(self):
        if len(self.keypoints) != len(self.provenance):
            raise ValueError("Every keypoint needs exactly one provenance entry")

    def __len__(self) -> int:
        return len(self.keypoints)

    @property
    def descriptors(self) -> np.ndarray:
        """n x 128 array of descriptors."""
        return np.stack([kp.descriptor for kp in self.keypoints])


@dataclass(frozen=True)
class MatchResult:
    """
    Outcome of matching a probe template against a reference template.

    Attributes
    ----------
    strategy : str
        "nn" or "ed".
    pairs : tuple of (int, int, float)
        (probe index, reference index, descriptor distance), one-to-one.
    probe_size, ref_size : int
        Template sizes.
    """

    strategy: str
    pairs: Tuple[Tuple[int, int, float], ...]
    probe_size: int
    ref_size: int

    @property
    def match_count(self) -> int:
        return len(self.pairs)

    @property
    def d_final(self) -> float:
        return math.sqrt(sum(d * d for _, _, d in self.pairs))

    @property
    def normalized_score(self) -> float:
        smallest = min(self.probe_size, self.ref_size)
        if smallest == 0:
            return 0.0
        return self.match_count / smallest

    @property
    def mean_distance(self) -> float:
        if not self.pairs:
            return 0.0
        return sum(d for _, _, d in self.pairs) / len(self.pairs)


@dataclass(frozen=True)
class Decision:
    accept: bool
    psi: float
    score_used: str = "normalized_score"


def fuse_template(
    regions: Sequence[RegionKeypoints],
    subject_id: str,
    model: Optional[MixtureModel],
) -> Template:
    """
    Concatenate kept-region keypoints into one template.

    Regions are taken in index order and each keeps its own keypoint order;
    nothing is deduplicated since regions partition the pixels.

    Parameters
    ----------
    regions : Sequence[RegionKeypoints]
        Keypoints of the kept regions.
    subject_id : str
        Identity carried by the template.
    model : MixtureModel or None
        Color model of the image.

    Returns
    -------
    Template
        The augmented template.

    Raises
    ------
    EmptyTemplate
        If no region holds a keypoint.

    Example
    -------
    >>> t = fuse_template([RegionKeypoints(0, a), RegionKeypoints(2, b)], "s001", model)
    >>> len(t) == len(a) + len(b)
    True
    """
    keypoints, provenance = [], []
    for region in sorted(regions, key=lambda r: r.region_index):
        keypoints.extend(region.keypoints)
        provenance.extend([region.region_index] * len(region.keypoints))
    if not keypoints:
        raise EmptyTemplate(
            f"No keypoint in the {len(regions)} kept region(s) of subject '{subject_id}'"
        )
    logging.info(f"Fused {len(keypoints)} keypoints from {len(regions)} regions for '{subject_id}'")
    return Template(subject_id, tuple(keypoints), tuple(provenance), model, len(regions))


def group_keypoints(keypoints: Sequence[Keypoint], seg: SegmentationResult) -> List[RegionKeypoints]:
    """
    Split keypoints by the kept slice region their rounded location falls in.

    Keypoints landing in a dropped region or outside the mask are left out.
    Every kept region gets an entry, possibly empty.
    """
    labels = label_map(seg)
    kept = [r.component_index for r in seg.kept_regions]
    groups = {index: [] for index in kept}
    for kp in keypoints:
        x, y = keypoint_pixel(kp)
        if 0 <= x < seg.width and 0 <= y < seg.height:
            label = int(labels[y, x])
            if label in groups:
                groups[label].append(kp)
    return [RegionKeypoints(index, tuple(groups[index])) for index in kept]


def _check_templates(probe: Template, ref: Template) -> None:
    for which, template in (("probe", probe), ("reference", ref)):
        if len(template) == 0:
            raise EmptyTemplate(f"The {which} template of '{template.subject_id}' has no keypoint")


def _greedy_pairs(candidates: Sequence[Tuple[int, int, float]]) -> Tuple[Tuple[int, int, float], ...]:
    """One-to-one selection by ascending (distance, probe index, reference index)."""
    used_probe, used_ref, pairs = set(), set(), []
    for i, j, d in sorted(candidates, key=lambda c: (c[2], c[0], c[1])):
        if i in used_probe or j in used_ref:
            continue
        used_probe.add(i)
        used_ref.add(j)
        pairs.append((i, j, d))
    return tuple(pairs)


def match_nn(probe: Template, ref: Template, ratio: float) -> MatchResult:
    """
    Nearest-neighbor matching with the distance-ratio test.

    A probe keypoint is a candidate when its nearest reference descriptor is
    at most `ratio` times as far as the second nearest (always, when the
    reference holds a single keypoint; never, when the second distance is 0).
    Candidates are then made one-to-one greedily by ascending distance.

    Parameters
    ----------
    probe, ref : Template
        Non-empty templates.
    ratio : float
        Ratio bound, in (0, 1).

    Returns
    -------
    MatchResult
        The selected pairs.
    """
    if not 0.0 < ratio < 1.0:
        raise ConfigError(f"NN ratio must lie in (0, 1), got {ratio}")
    _check_templates(probe, ref)
    distances = cdist(probe.descriptors, ref.descriptors)
    if len(ref) == 1:
        candidates = [(i, 0, float(distances[i, 0])) for i in range(len(probe))]
    else:
        order = np.argsort(distances, axis=1, kind="stable")
        rows = np.arange(len(probe))
        nearest = distances[rows, order[:, 0]]
        second = distances[rows, order[:, 1]]
        accepted = (second > 0.0) & (nearest <= ratio * second)
        candidates = [(int(i), int(order[i, 0]), float(nearest[i])) for i in np.flatnonzero(accepted)]
    return MatchResult(NN, _greedy_pairs(candidates), len(probe), len(ref))


def match_ed(probe: Template, ref: Template, d_abs: float) -> MatchResult:
    """
    Euclidean-distance matching: mutual nearest neighbors within `d_abs`.

    Parameters
    ----------
    probe, ref : Template
        Non-empty templates.
    d_abs : float
        Maximal descriptor distance of a pair, > 0.

    Returns
    -------
    MatchResult
        Pairs in ascending distance order.
    """
    if not d_abs > 0.0:
        raise ConfigError(f"ED distance bound must be positive, got {d_abs}")
    _check_templates(probe, ref)
    distances = cdist(probe.descriptors, ref.descriptors)
    best_ref = np.argmin(distances, axis=1)
    best_probe = np.argmin(distances, axis=0)
    candidates = [
        (i, int(j), float(distances[i, j]))
        for i, j in enumerate(best_ref)
        if best_probe[j] == i and distances[i, j] <= d_abs
    ]
    return MatchResult(ED, _greedy_pairs(candidates), len(probe), len(ref))


def match_templates(probe: Template, ref: Template, params: MatchParams = MatchParams()) -> MatchResult:
    """Match with the strategy named in `params`."""
    if params.strategy == NN:
        return match_nn(probe, ref, params.ratio)
    return match_ed(probe, ref, params.d_abs)


def decide(result: MatchResult, psi: float) -> Decision:
    """
    Accept iff the normalized score reaches `psi`.

    Example
    -------
    >>> decide(MatchResult("nn", (), 10, 10), 0.3).accept
    False
    """
    if not 0.0 <= psi <= 1.0:
        raise ConfigError(f"psi must lie in [0, 1], got {psi}")
    return Decision(result.normalized_score >= psi, psi)
