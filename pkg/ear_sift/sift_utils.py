"""
SIFT Utilities

Scale-invariant keypoints and 128-element descriptors:
 - Gaussian scale space (s + 3 levels per octave) and difference-of-Gaussian
   stacks, built with separable kernels of radius ceil(4 sigma) and reflected
   borders
 - 26-neighbor extrema detection
 - quadratic sub-pixel localization with low-contrast and edge rejection
 - orientation assignment from a 36-bin gradient histogram
 - 4 x 4 x 8 gradient-histogram descriptors, normalized, clamped and
   renormalized

Keypoint coordinates are reported in the input image frame. Pyramid
resampling is corner-aligned: an upsampled pixel (x, y) sits at (x/2, y/2) in
the input, and a pixel of octave o sits at 2^o times its index in the base.
"""

import dataclasses
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import ndimage

from .error_utils import ConfigError, ImageTooSmall, IoFailure
from .image_utils import MIN_PIPELINE_SIZE, GrayImage, Mask
from .path_utils import parent_directory

LOW_CONTRAST = "low-contrast"
EDGE_RESPONSE = "edge-response"
OUTSIDE_PYRAMID = "outside-pyramid"
UNCONVERGED = "unconverged"

_MIN_OCTAVE_SIZE = 4


@dataclass(frozen=True)
class SiftParams:
    """
    Detector and descriptor settings (Lowe's published defaults).

    Attributes
    ----------
    octaves : int
        Number of octaves; 0 means floor(log2(min dimension)) - 2.
    scales_per_octave : int
        Intervals s per octave, at least 2.
    sigma0 : float
        Blur of the first level of each octave, above 0.5.
    initial_upsample : bool
        Double the input before building the pyramid.
    contrast_threshold : float
        Keypoints with |DoG| below contrast_threshold / s are rejected.
    edge_ratio : float
        Principal-curvature ratio r above which edge responses are rejected.
    orientation_bins : int
        Bins of the orientation histogram.
    peak_ratio : float
        Secondary orientation peaks at or above this fraction of the maximum
        yield extra keypoints.
    descriptor_clamp : float
        Descriptor entries are clamped at this value before renormalization.
    descriptor_width : int
        Spatial cells per side of the descriptor grid.
    descriptor_bins : int
        Orientation bins per descriptor cell.
    assumed_blur : float
        Blur already present in the input (doubled after upsampling).
    orientation_window : float
        Orientation window sigma, in units of the keypoint scale.
    descriptor_scale : float
        Width of one descriptor cell, in units of the keypoint scale.
    max_refinements : int
        Localization steps before a candidate is given up.
    """

    octaves: int = 0
    scales_per_octave: int = 3
    sigma0: float = 1.6
    initial_upsample: bool = True
    contrast_threshold: float = 0.03
    edge_ratio: float = 10.0
    orientation_bins: int = 36
    peak_ratio: float = 0.8
    descriptor_clamp: float = 0.2
    descriptor_width: int = 4
    descriptor_bins: int = 8
    assumed_blur: float = 0.5
    orientation_window: float = 1.5
    descriptor_scale: float = 3.0
    max_refinements: int = 5

    def __post_init__(self):
        problems = []
        if self.octaves < 0:
            problems.append("octaves must be >= 0")
        if self.scales_per_octave < 2:
            problems.append("scales_per_octave must be >= 2")
        if not self.sigma0 > 0.5:
            problems.append("sigma0 must be > 0.5")
        if not self.contrast_threshold > 0.0:
            problems.append("contrast_threshold must be > 0")
        if not self.edge_ratio > 1.0:
            problems.append("edge_ratio must be > 1")
        if self.orientation_bins < 4:
            problems.append("orientation_bins must be >= 4")
        if not 0.0 < self.peak_ratio <= 1.0:
            problems.append("peak_ratio must lie in (0, 1]")
        if not 0.0 < self.descriptor_clamp <= 1.0:
            problems.append("descriptor_clamp must lie in (0, 1]")
        if self.descriptor_length != 128:
            problems.append("descriptor grid must give 128 values (4 x 4 cells x 8 bins)")
        if not self.assumed_blur >= 0.0:
            problems.append("assumed_blur must be >= 0")
        if not (self.orientation_window > 0.0 and self.descriptor_scale > 0.0):
            problems.append("orientation_window and descriptor_scale must be > 0")
        if self.max_refinements < 1:
            problems.append("max_refinements must be >= 1")
        if problems:
            raise ConfigError("Invalid SIFT parameters: " + "; ".join(problems))

    @property
    def descriptor_length(self) -> int:
        return self.descriptor_width * self.descriptor_width * self.descriptor_bins


@dataclass(frozen=True, eq=False)
class Keypoint:
    """
    An oriented, described keypoint.

    Attributes
    ----------
    x, y : float
        Location in the input image (pixels).
    scale : float
        Scale S in input pixels (sigma units).
    orientation : float
        Dominant gradient direction theta in [0, 2 pi), image axes (y down).
    descriptor : np.ndarray or None
        128 values of unit norm; None before description.
    octave, level : int
        Pyramid position (DoG level index); -1 when unknown (reloaded).
    x_octave, y_octave, sigma_octave : float
        Refined location and scale in the octave's own pixel grid.
    response : float
        Interpolated DoG value.
    """

    x: float
    y: float
    scale: float
    orientation: float = 0.0
    descriptor: Optional[np.ndarray] = None
    octave: int = -1
    level: int = -1
    x_octave: float = float("nan")
    y_octave: float = float("nan")
    sigma_octave: float = float("nan")
    response: float = 0.0

    def same_as(self, other: "Keypoint", tol: float = 0.0) -> bool:
        """Compare location, scale, orientation and descriptor within `tol`."""
        scalars = np.array([self.x, self.y, self.scale, self.orientation])
        others = np.array([other.x, other.y, other.scale, other.orientation])
        if not np.all(np.abs(scalars - others) <= tol):
            return False
        if self.descriptor is None or other.descriptor is None:
            return self.descriptor is None and other.descriptor is None
        return bool(np.all(np.abs(self.descriptor - other.descriptor) <= tol))


@dataclass(frozen=True)
class Candidate:
    """A discrete scale-space extremum: DoG `level` of `octave` at (x, y)."""

    octave: int
    level: int
    y: int
    x: int


@dataclass(frozen=True)
class Rejection:
    """A candidate discarded during localization, with its reason code."""

    candidate: Candidate
    reason: str


@dataclass(frozen=True, eq=False)
class ScaleSpace:
    """
    Gaussian and DoG pyramids.

    Attributes
    ----------
    gaussians : tuple of np.ndarray
        Per octave, an (s + 3) x h x w stack of blurred images.
    dogs : tuple of np.ndarray
        Per octave, the (s + 2) x h x w stack of adjacent differences.
    upsampled : bool
        Whether the base is the 2x upsampled input.
    width, height : int
        Input image dimensions.
    """

    gaussians: Tuple[np.ndarray, ...]
    dogs: Tuple[np.ndarray, ...]
    upsampled: bool
    width: int
    height: int
    params: SiftParams


def gaussian_kernel1d(sigma: float) -> np.ndarray:
    """Sampled, normalized Gaussian of radius ceil(4 sigma)."""
    radius = max(1, int(math.ceil(4.0 * sigma)))
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-0.5 * (offsets / sigma) ** 2)
    return kernel / kernel.sum()


def blur(image: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur with reflected borders."""
    kernel = gaussian_kernel1d(sigma)
    out = ndimage.convolve1d(image, kernel, axis=0, mode="reflect")
    return ndimage.convolve1d(out, kernel, axis=1, mode="reflect")


def level_sigmas(params: SiftParams) -> np.ndarray:
    """Blur of each Gaussian level relative to its octave: sigma0 2^(i/s)."""
    s = params.scales_per_octave
    return params.sigma0 * 2.0 ** (np.arange(s + 3) / s)


def increment_sigmas(params: SiftParams) -> np.ndarray:
    """Blur applied to level i - 1 to obtain level i (entry 0 unused)."""
    sigmas = level_sigmas(params)
    increments = np.zeros_like(sigmas)
    increments[1:] = np.sqrt(sigmas[1:] ** 2 - sigmas[:-1] ** 2)
    return increments


def base_blur(params: SiftParams) -> float:
    """Blur bringing the (possibly upsampled) input from its assumed blur to sigma0."""
    assumed = params.assumed_blur * (2.0 if params.initial_upsample else 1.0)
    return math.sqrt(max(params.sigma0 ** 2 - assumed ** 2, 0.01))


def _upsample(image: np.ndarray) -> np.ndarray:
    height, width = image.shape
    rows = np.arange(2 * height) / 2.0
    cols = np.arange(2 * width) / 2.0
    grid = np.meshgrid(rows, cols, indexing="ij")
    return ndimage.map_coordinates(image, grid, order=1, mode="nearest")


def octave_count(base_shape: Tuple[int, int], params: SiftParams) -> int:
    if params.octaves > 0:
        return params.octaves
    return max(1, int(math.floor(math.log2(min(base_shape)))) - 2)


def build_scale_space(img: GrayImage, params: SiftParams = SiftParams()) -> ScaleSpace:
    """
    Build the Gaussian and difference-of-Gaussian pyramids.

    Octave o holds s + 3 Gaussian levels at sigma0 2^(o + i/s) (input units
    before upsampling) and s + 2 DoG levels; the next octave starts from the
    level with twice the octave's base blur, decimated by 2.

    Parameters
    ----------
    img : GrayImage
        Intensity image.
    params : SiftParams, optional
        Pyramid settings.

    Returns
    -------
    ScaleSpace
        The two pyramids.

    Raises
    ------
    ImageTooSmall
        If the (possibly upsampled) image is below 16 x 16.
    """
    base = img.data
    if params.initial_upsample:
        base = _upsample(base)
    if min(base.shape) < MIN_PIPELINE_SIZE:
        raise ImageTooSmall(
            f"SIFT needs at least {MIN_PIPELINE_SIZE}x{MIN_PIPELINE_SIZE} pixels, "
            f"got {base.shape[1]}x{base.shape[0]}"
        )

    s = params.scales_per_octave
    increments = increment_sigmas(params)
    first = blur(base, base_blur(params))
    gaussians, dogs = [], []
    for octave in range(octave_count(base.shape, params)):
        if min(first.shape) < _MIN_OCTAVE_SIZE:
            logging.debug(f"Stopping pyramid at octave {octave}: image {first.shape} too small")
            break
        levels = [first]
        for sigma in increments[1:]:
            levels.append(blur(levels[-1], sigma))
        stack = np.stack(levels)
        gaussians.append(stack)
        dogs.append(stack[1:] - stack[:-1])
        first = stack[s][::2, ::2]
    return ScaleSpace(tuple(gaussians), tuple(dogs), params.initial_upsample, img.width, img.height, params)


def detect_extrema(space: ScaleSpace, params: SiftParams = SiftParams()) -> List[Candidate]:
    """
    Find samples strictly above or below all 26 scale-space neighbors.

    The outermost pixel ring and the first and last DoG levels are skipped,
    and samples with |DoG| <= 0.5 contrast_threshold are ignored.

    Returns
    -------
    List[Candidate]
        Candidates ordered by octave, level, row and column.
    """
    footprint = np.ones((3, 3, 3), dtype=bool)
    footprint[1, 1, 1] = False
    candidates = []
    for octave, dog in enumerate(space.dogs):
        if dog.shape[0] < 3 or min(dog.shape[1:]) < 3:
            continue
        neighbor_max = ndimage.maximum_filter(dog, footprint=footprint, mode="nearest")
        neighbor_min = ndimage.minimum_filter(dog, footprint=footprint, mode="nearest")
        extremum = ((dog > neighbor_max) | (dog < neighbor_min)) & (
            np.abs(dog) > 0.5 * params.contrast_threshold
        )
        extremum[0] = extremum[-1] = False
        extremum[:, 0, :] = extremum[:, -1, :] = False
        extremum[:, :, 0] = extremum[:, :, -1] = False
        for level, y, x in np.argwhere(extremum):
            candidates.append(Candidate(octave, int(level), int(y), int(x)))
    return candidates


def _derivatives(cube: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Gradient and Hessian of a 3 x 3 x 3 (level, y, x) cube, ordered (x, y, s)."""
    c = cube
    dx = 0.5 * (c[1, 1, 2] - c[1, 1, 0])
    dy = 0.5 * (c[1, 2, 1] - c[1, 0, 1])
    ds = 0.5 * (c[2, 1, 1] - c[0, 1, 1])
    center = c[1, 1, 1]
    dxx = c[1, 1, 2] - 2.0 * center + c[1, 1, 0]
    dyy = c[1, 2, 1] - 2.0 * center + c[1, 0, 1]
    dss = c[2, 1, 1] - 2.0 * center + c[0, 1, 1]
    dxy = 0.25 * (c[1, 2, 2] - c[1, 2, 0] - c[1, 0, 2] + c[1, 0, 0])
    dxs = 0.25 * (c[2, 1, 2] - c[2, 1, 0] - c[0, 1, 2] + c[0, 1, 0])
    dys = 0.25 * (c[2, 2, 1] - c[2, 0, 1] - c[0, 2, 1] + c[0, 0, 1])
    gradient = np.array([dx, dy, ds])
    hessian = np.array([[dxx, dxy, dxs], [dxy, dyy, dys], [dxs, dys, dss]])
    return gradient, hessian


def keypoint_at(
    space: ScaleSpace,
    octave: int,
    level: int,
    x_octave: float,
    y_octave: float,
    level_offset: float = 0.0,
    response: float = 0.0,
) -> Keypoint:
    """
    Build an unoriented keypoint at a (sub-pixel) pyramid position.

    Parameters
    ----------
    space : ScaleSpace
        The pyramid the position refers to.
    octave, level : int
        Octave and DoG level.
    x_octave, y_octave : float
        Location in the octave grid.
    level_offset : float, optional
        Sub-level offset of the scale.
    response : float, optional
        DoG value at the position.
    """
    params = space.params
    sigma_octave = params.sigma0 * 2.0 ** ((level + level_offset) / params.scales_per_octave)
    to_input = 2.0 ** octave / (2.0 if space.upsampled else 1.0)
    return Keypoint(
        x=x_octave * to_input,
        y=y_octave * to_input,
        scale=sigma_octave * to_input,
        octave=octave,
        level=level,
        x_octave=x_octave,
        y_octave=y_octave,
        sigma_octave=sigma_octave,
        response=response,
    )


def localize_keypoint(
    candidate: Candidate,
    space: ScaleSpace,
    params: SiftParams = SiftParams(),
) -> Union[Keypoint, Rejection]:
    """
    Refine a candidate to sub-pixel, sub-level accuracy and test its stability.

    A quadratic fit of the DoG around the sample gives the offset to the true
    extremum; the sample moves while any offset component exceeds 0.5 (at
    most `max_refinements` fits). The refined point is rejected when its
    interpolated |DoG| is below contrast_threshold / s, or when the 2 x 2
    spatial Hessian has det <= 0 or tr^2 / det >= (r + 1)^2 / r.

    Returns
    -------
    Keypoint or Rejection
        An unoriented keypoint, or the rejection with its reason code.
    """
    dog = space.dogs[candidate.octave]
    n_levels, height, width = dog.shape
    level, y, x = candidate.level, candidate.y, candidate.x
    for _ in range(params.max_refinements):
        cube = dog[level - 1:level + 2, y - 1:y + 2, x - 1:x + 2]
        gradient, hessian = _derivatives(cube)
        offset = -np.linalg.lstsq(hessian, gradient, rcond=None)[0]
        if np.all(np.abs(offset) <= 0.5):
            break
        x += int(np.round(offset[0]))
        y += int(np.round(offset[1]))
        level += int(np.round(offset[2]))
        if not (1 <= y < height - 1 and 1 <= x < width - 1 and 1 <= level <= n_levels - 2):
            return Rejection(candidate, OUTSIDE_PYRAMID)
    else:
        return Rejection(candidate, UNCONVERGED)

    response = float(cube[1, 1, 1] + 0.5 * gradient @ offset)
    if abs(response) < params.contrast_threshold / params.scales_per_octave:
        return Rejection(candidate, LOW_CONTRAST)

    trace = hessian[0, 0] + hessian[1, 1]
    det = hessian[0, 0] * hessian[1, 1] - hessian[0, 1] ** 2
    r = params.edge_ratio
    if det <= 0.0 or r * trace ** 2 >= (r + 1.0) ** 2 * det:
        return Rejection(candidate, EDGE_RESPONSE)

    return keypoint_at(
        space,
        candidate.octave,
        level,
        x + offset[0],
        y + offset[1],
        level_offset=offset[2],
        response=response,
    )


def _window(image: np.ndarray, cx: int, cy: int, radius: int):
    """
    Gradients of the square window of `radius` around (cx, cy), clipped so
    that central differences stay inside the image.

    Returns offsets (dx, dy) from the center, gradient magnitude and angle.
    """
    height, width = image.shape
    x0, x1 = max(cx - radius, 1), min(cx + radius, width - 2)
    y0, y1 = max(cy - radius, 1), min(cy + radius, height - 2)
    if x0 > x1 or y0 > y1:
        empty = np.zeros((0, 0))
        return empty, empty, empty, empty
    gx = image[y0:y1 + 1, x0 + 1:x1 + 2] - image[y0:y1 + 1, x0 - 1:x1]
    gy = image[y0 + 1:y1 + 2, x0:x1 + 1] - image[y0 - 1:y1, x0:x1 + 1]
    dy, dx = np.mgrid[y0 - cy:y1 - cy + 1, x0 - cx:x1 - cx + 1]
    magnitude = np.hypot(gx, gy)
    angle = np.mod(np.arctan2(gy, gx), 2.0 * np.pi)
    return dx, dy, magnitude, angle


def _pixel(value: float) -> int:
    return int(math.floor(value + 0.5))


def assign_orientation(
    keypoint: Keypoint,
    space: ScaleSpace,
    params: SiftParams = SiftParams(),
) -> List[Keypoint]:
    """
    Give a localized keypoint its dominant gradient orientation(s).

    Gradients in a window weighted by a Gaussian of sigma 1.5 S vote into a
    36-bin histogram (smoothed by a [1, 4, 6, 4, 1] / 16 kernel). Every local
    peak reaching peak_ratio of the maximum yields one keypoint, its angle
    refined by a parabola through the peak and its two neighbors.

    Returns
    -------
    List[Keypoint]
        One keypoint per accepted peak (empty on a flat window).
    """
    image = space.gaussians[keypoint.octave][keypoint.level]
    n_bins = params.orientation_bins
    sigma_w = params.orientation_window * keypoint.sigma_octave
    radius = int(round(3.0 * sigma_w))
    dx, dy, magnitude, angle = _window(
        image, _pixel(keypoint.x_octave), _pixel(keypoint.y_octave), radius
    )
    weight = np.exp(-(dx ** 2 + dy ** 2) / (2.0 * sigma_w ** 2))
    bins = np.mod(np.round(angle * n_bins / (2.0 * np.pi)).astype(np.int64), n_bins)
    hist = np.bincount(bins.ravel(), weights=(weight * magnitude).ravel(), minlength=n_bins)

    smooth = (
        6.0 * hist
        + 4.0 * (np.roll(hist, 1) + np.roll(hist, -1))
        + np.roll(hist, 2)
        + np.roll(hist, -2)
    ) / 16.0
    peak_value = smooth.max()
    if peak_value <= 0.0:
        return []
    left, right = np.roll(smooth, 1), np.roll(smooth, -1)
    peaks = np.flatnonzero((smooth > left) & (smooth > right) & (smooth >= params.peak_ratio * peak_value))

    oriented = []
    for p in peaks:
        l, c, r = left[p], smooth[p], right[p]
        interpolated = p + 0.5 * (l - r) / (l - 2.0 * c + r)
        theta = float(np.mod(interpolated * 2.0 * np.pi / n_bins, 2.0 * np.pi))
        if theta >= 2.0 * np.pi:
            theta = 0.0
        oriented.append(dataclasses.replace(keypoint, orientation=theta))
    return oriented


def clamp_descriptor(vector: np.ndarray, clamp: float) -> np.ndarray:
    """
    Unit vector whose entries do not exceed `clamp`.

    This is the limit of repeatedly clamping at `clamp` and renormalizing:
    clamped entries end at exactly `clamp` and the others share the remaining
    norm. When too few entries are non-zero for that to exist, the clamped
    entries share the unit norm equally.

    Parameters
    ----------
    vector : np.ndarray
        Non-negative histogram with a positive norm.
    clamp : float
        Maximum entry value.

    Returns
    -------
    np.ndarray
        The clamped unit vector.
    """
    vector = vector / np.linalg.norm(vector)
    clamped = vector > clamp
    while clamped.any():
        budget = 1.0 - clamped.sum() * clamp ** 2
        free_norm = np.linalg.norm(vector[~clamped])
        if budget <= 0.0 or free_norm <= 0.0:
            return np.where(clamped, 1.0 / math.sqrt(clamped.sum()), 0.0)
        vector = np.where(clamped, clamp, vector * math.sqrt(budget) / free_norm)
        newly = vector > clamp
        if not newly.any():
            break
        clamped |= newly
    return vector


def compute_descriptor(
    keypoint: Keypoint,
    space: ScaleSpace,
    params: SiftParams = SiftParams(),
) -> np.ndarray:
    """
    128-element gradient-histogram descriptor of an oriented keypoint.

    Window offsets are rotated by -theta and expressed in cells of width
    3 S; gradients, weighted by a Gaussian of half the window width, are
    spread trilinearly over 4 x 4 cells x 8 orientation bins. The vector is
    L2-normalized and clamped at descriptor_clamp until no entry exceeds it
    (see `clamp_descriptor`).

    Returns
    -------
    np.ndarray
        Unit-norm vector, or zeros when the window has no gradient.
    """
    image = space.gaussians[keypoint.octave][keypoint.level]
    d = params.descriptor_width
    n = params.descriptor_bins
    hist_width = params.descriptor_scale * keypoint.sigma_octave
    radius = int(round(hist_width * math.sqrt(2.0) * (d + 1) * 0.5))
    radius = min(radius, int(math.hypot(*image.shape)))
    dx, dy, magnitude, angle = _window(
        image, _pixel(keypoint.x_octave), _pixel(keypoint.y_octave), radius
    )

    cos_t, sin_t = math.cos(keypoint.orientation), math.sin(keypoint.orientation)
    u = (cos_t * dx + sin_t * dy) / hist_width
    v = (-sin_t * dx + cos_t * dy) / hist_width
    row_bin = v + 0.5 * d - 0.5
    col_bin = u + 0.5 * d - 0.5
    inside = (row_bin > -1.0) & (row_bin < d) & (col_bin > -1.0) & (col_bin < d)
    if not inside.any():
        return np.zeros(params.descriptor_length)

    weight = np.exp(-(u ** 2 + v ** 2) / (0.5 * d * d))
    values = (magnitude * weight)[inside]
    rows, cols = row_bin[inside], col_bin[inside]
    oris = np.mod(angle[inside] - keypoint.orientation, 2.0 * np.pi) * n / (2.0 * np.pi)

    r0, c0, o0 = np.floor(rows), np.floor(cols), np.floor(oris)
    fr, fc, fo = rows - r0, cols - c0, oris - o0
    r0 = r0.astype(np.int64) + 1
    c0 = c0.astype(np.int64) + 1
    o0 = o0.astype(np.int64)

    shape = (d + 2, d + 2, n)
    hist = np.zeros(int(np.prod(shape)))
    for dr, wr in ((0, 1.0 - fr), (1, fr)):
        for dc, wc in ((0, 1.0 - fc), (1, fc)):
            for do, wo in ((0, 1.0 - fo), (1, fo)):
                index = np.ravel_multi_index((r0 + dr, c0 + dc, (o0 + do) % n), shape)
                hist += np.bincount(index, weights=values * wr * wc * wo, minlength=hist.size)

    vector = hist.reshape(shape)[1:d + 1, 1:d + 1, :].ravel()
    norm = np.linalg.norm(vector)
    if norm <= 0.0:
        return np.zeros(params.descriptor_length)
    return clamp_descriptor(vector, params.descriptor_clamp)


def keypoint_pixel(keypoint: Keypoint) -> Tuple[int, int]:
    """Rounded (x, y) pixel of a keypoint (half-up rounding)."""
    return _pixel(keypoint.x), _pixel(keypoint.y)


def restrict_keypoints(keypoints: Sequence[Keypoint], mask: Mask) -> List[Keypoint]:
    """Keep the keypoints whose rounded location falls inside `mask`."""
    kept = []
    for kp in keypoints:
        x, y = keypoint_pixel(kp)
        if 0 <= x < mask.width and 0 <= y < mask.height and mask.bits[y, x]:
            kept.append(kp)
    return kept


def _canonical_key(kp: Keypoint):
    return (kp.octave, kp.level, kp.y_octave, kp.x_octave, kp.orientation)


def extract_sift(
    img: GrayImage,
    keep_mask: Optional[Mask] = None,
    params: SiftParams = SiftParams(),
) -> List[Keypoint]:
    """
    Full SIFT pipeline, optionally restricted to a mask.

    Descriptors are computed with full-image context; keypoints whose rounded
    location falls outside `keep_mask` are dropped afterwards. Candidates that
    localize to the same octave, level, sub-pixel position and orientation
    are one keypoint and are reported once; keypoints that differ in any of
    these are all kept, even with equal descriptors.

    Parameters
    ----------
    img : GrayImage
        Intensity image (histogram-equalized by the pipeline).
    keep_mask : Mask, optional
        Region restriction; None keeps every location.
    params : SiftParams, optional
        Detector and descriptor settings.

    Returns
    -------
    List[Keypoint]
        Keypoints sorted by octave, level, y, x and orientation.

    Raises
    ------
    ImageTooSmall
        If the image is below 16 x 16.
    """
    space = build_scale_space(img, params)
    candidates = detect_extrema(space, params)
    rejected = {}
    keypoints = []
    for candidate in candidates:
        located = localize_keypoint(candidate, space, params)
        if isinstance(located, Rejection):
            rejected[located.reason] = rejected.get(located.reason, 0) + 1
            continue
        for oriented in assign_orientation(located, space, params):
            descriptor = compute_descriptor(oriented, space, params)
            if not descriptor.any():
                continue
            x, y = keypoint_pixel(oriented)
            if not (0 <= x < img.width and 0 <= y < img.height):
                continue
            keypoints.append(dataclasses.replace(oriented, descriptor=descriptor))

    keypoints.sort(key=_canonical_key)
    unique = [
        kp for i, kp in enumerate(keypoints)
        if i == 0 or _canonical_key(kp) != _canonical_key(keypoints[i - 1])
    ]
    if len(unique) < len(keypoints):
        logging.info(
            f"SIFT: {len(keypoints) - len(unique)} candidates localized to an already found keypoint were merged"
        )
    keypoints = unique
    logging.info(
        f"SIFT: {len(candidates)} candidates, rejected {rejected}, {len(keypoints)} keypoints"
    )
    if keep_mask is not None:
        keypoints = restrict_keypoints(keypoints, keep_mask)
    return keypoints


def write_keypoint_dump(keypoints: Sequence[Keypoint], path: str) -> None:
    """
    Write one line per keypoint: x y S theta followed by the 128 descriptor
    values, space separated.

    Raises
    ------
    IoFailure
        If the file cannot be written.
    """
    parent_directory(path)
    try:
        with open(path, "wt") as fout:
            for kp in keypoints:
                values = [kp.x, kp.y, kp.scale, kp.orientation] + list(kp.descriptor)
                fout.write(" ".join(repr(float(v)) for v in values) + "\n")
    except OSError as e:
        raise IoFailure(f"Cannot write keypoint dump '{path}': {e}") from e
    logging.info(f"Wrote {len(keypoints)} keypoints to '{path}'")
