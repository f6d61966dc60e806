"""
Image Utilities

Decoding and encoding of ear crops (PNG, binary PPM/PGM), grayscale
conversion, histogram equalization and mask handling.

Images are immutable numpy-backed values with channels scaled to [0, 1]:
 - ColorImage: H x W x 3
 - GrayImage: H x W
 - Mask: H x W booleans (True = inside the cropped ear)
 - PixelSet: the masked color samples fed to clustering
"""

import logging
from dataclasses import dataclass

import numpy as np
from PIL import Image, UnidentifiedImageError

from .error_utils import (
    CorruptData,
    DimensionMismatch,
    EmptyMask,
    ImageTooSmall,
    IoFailure,
    UnsupportedFormat,
)
from .path_utils import checkfile, folder_name_ext, parent_directory

MIN_PIPELINE_SIZE = 16

# Rec. 601 luma
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])

_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
_NETPBM_SIGNATURES = (b"P5", b"P6")


def _frozen(array: np.ndarray, dtype) -> np.ndarray:
    array = np.array(array, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class ColorImage:
    """RGB raster, row-major, every channel a real in [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        data = _frozen(self.data, np.float64)
        if data.ndim != 3 or data.shape[2] != 3:
            raise DimensionMismatch(f"ColorImage expects an H x W x 3 array, got {data.shape}")
        if data.size and (data.min() < 0.0 or data.max() > 1.0):
            raise CorruptData("ColorImage channels must lie in [0, 1]")
        object.__setattr__(self, "data", data)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Intensity raster, row-major, values in [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        data = _frozen(self.data, np.float64)
        if data.ndim != 2:
            raise DimensionMismatch(f"GrayImage expects an H x W array, got {data.shape}")
        if data.size and (data.min() < 0.0 or data.max() > 1.0):
            raise CorruptData("GrayImage intensities must lie in [0, 1]")
        object.__setattr__(self, "data", data)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True, eq=False)
class Mask:
    """Boolean raster, True inside the cropped ear region."""

    bits: np.ndarray

    def __post_init__(self):
        bits = _frozen(self.bits, bool)
        if bits.ndim != 2:
            raise DimensionMismatch(f"Mask expects an H x W array, got {bits.shape}")
        object.__setattr__(self, "bits", bits)

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def count(self) -> int:
        return int(self.bits.sum())


@dataclass(frozen=True, eq=False)
class PixelSet:
    """
    Masked color samples.

    Attributes
    ----------
    locations : np.ndarray
        n x 2 integer array of (x, y) pixel coordinates, row-major order.
    colors : np.ndarray
        n x 3 array of RGB values in [0, 1].
    """

    locations: np.ndarray
    colors: np.ndarray

    def __post_init__(self):
        locations = _frozen(self.locations, np.int64).reshape(-1, 2)
        colors = _frozen(self.colors, np.float64).reshape(-1, 3)
        if len(locations) != len(colors):
            raise DimensionMismatch(
                f"PixelSet has {len(locations)} locations but {len(colors)} colors"
            )
        object.__setattr__(self, "locations", locations)
        object.__setattr__(self, "colors", colors)

    def __len__(self) -> int:
        return len(self.colors)


def full_mask(width: int, height: int) -> Mask:
    """Return the all-true mask used when no mask is supplied."""
    return Mask(np.ones((height, width), dtype=bool))


def check_pipeline_size(width: int, height: int) -> None:
    """
    Raise ImageTooSmall unless both dimensions reach the pipeline minimum.

    Raises
    ------
    ImageTooSmall
        If width or height is below 16 pixels.
    """
    if width < MIN_PIPELINE_SIZE or height < MIN_PIPELINE_SIZE:
        raise ImageTooSmall(
            f"Image is {width}x{height}, the pipeline needs at least "
            f"{MIN_PIPELINE_SIZE}x{MIN_PIPELINE_SIZE} pixels"
        )


def _open_raster(path: str, what: str) -> Image.Image:
    """Open a PNG or binary PPM/PGM file with Pillow after sniffing its signature."""
    path = checkfile(path, what)
    with open(path, "rb") as fin:
        head = fin.read(8)
    if not (head.startswith(_PNG_SIGNATURE) or head[:2] in _NETPBM_SIGNATURES):
        raise UnsupportedFormat(f"{what} '{path}' is neither PNG nor binary PPM/PGM")
    try:
        raster = Image.open(path)
        raster.load()
    except (UnidentifiedImageError, OSError, ValueError, SyntaxError) as e:
        raise CorruptData(f"{what} '{path}' cannot be decoded: {e}") from e
    return raster


def _raster_to_array(raster: Image.Image, path: str) -> np.ndarray:
    """Convert a Pillow raster to an H x W x 3 float array in [0, 1]."""
    if raster.mode in ("I;16", "I;16B", "I;16L", "I"):
        gray = np.asarray(raster, dtype=np.float64)
        maxval = 65535.0 if gray.max(initial=0) > 255 else 255.0
        gray = np.clip(gray / maxval, 0.0, 1.0)
        return np.repeat(gray[:, :, None], 3, axis=2)
    if raster.mode in ("RGB", "RGBA", "L", "LA", "P", "1"):
        return np.asarray(raster.convert("RGB"), dtype=np.float64) / 255.0
    raise UnsupportedFormat(f"Image '{path}' uses unsupported pixel mode {raster.mode}")


def load_image(path: str) -> ColorImage:
    """
    Load a PNG or binary PPM (P6) / PGM (P5) file as a ColorImage.

    8-bit values v map to v / 255; gray images are replicated over the three
    channels.

    Parameters
    ----------
    path : str
        The image file.

    Returns
    -------
    ColorImage
        The decoded image.

    Raises
    ------
    ImageFileNotFound
        If the file does not exist.
    UnsupportedFormat
        If the file is not PNG or binary Netpbm.
    CorruptData
        If the file cannot be decoded.

    Example
    -------
    >>> img = load_image("s001_ref.png")
    >>> img.width, img.height
    (125, 237)
    """
    raster = _open_raster(path, "Image")
    image = ColorImage(_raster_to_array(raster, path))
    logging.debug(f"Loaded image '{path}' ({image.width}x{image.height})")
    return image


def _to_bytes(data: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(data * 255.0), 0, 255).astype(np.uint8)


def save_image(img: ColorImage, path: str) -> None:
    """
    Save a ColorImage as binary PPM (``.ppm``) or PNG (any other extension).

    Channels are written as round(v * 255), so loading a saved 8-bit image and
    saving it again reproduces the same pixel bytes.

    Raises
    ------
    IoFailure
        If the file cannot be written.
    """
    _, _, ext = folder_name_ext(path)
    fmt = "PPM" if ext == "ppm" else "PNG"
    parent_directory(path)
    try:
        Image.fromarray(_to_bytes(img.data)).save(path, format=fmt)
    except OSError as e:
        raise IoFailure(f"Cannot write image '{path}': {e}") from e
    logging.debug(f"Saved image '{path}'")


def save_label_map(labels: np.ndarray, path: str) -> None:
    """
    Save an 8-bit label raster as binary PGM (``.pgm``) or PNG.

    Raises
    ------
    IoFailure
        If the file cannot be written.
    """
    _, _, ext = folder_name_ext(path)
    fmt = "PPM" if ext in ("pgm", "ppm") else "PNG"
    parent_directory(path)
    try:
        Image.fromarray(np.asarray(labels, dtype=np.uint8)).save(path, format=fmt)
    except OSError as e:
        raise IoFailure(f"Cannot write label map '{path}': {e}") from e


def save_mask(mask: Mask, path: str) -> None:
    """Save a Mask as 8-bit gray (255 inside, 0 outside)."""
    save_label_map(np.where(mask.bits, 255, 0), path)


def load_mask(path: str) -> Mask:
    """
    Load a mask from a PGM (P5) or PNG file; values >= 128 mean inside.

    Raises
    ------
    ImageFileNotFound, UnsupportedFormat, CorruptData
        As for load_image.
    """
    raster = _open_raster(path, "Mask")
    gray = np.asarray(raster.convert("L"), dtype=np.uint8)
    return Mask(gray >= 128)


def to_grayscale(img: ColorImage) -> GrayImage:
    """
    Convert to intensity with Rec. 601 luma: 0.299 R + 0.587 G + 0.114 B.

    Example
    -------
    >>> to_grayscale(ColorImage(np.ones((1, 1, 3)))).data[0, 0]
    1.0
    """
    return GrayImage(np.clip(img.data @ LUMA_WEIGHTS, 0.0, 1.0))


def equalize_histogram(img: GrayImage) -> GrayImage:
    """
    256-bin histogram equalization.

    Intensities are quantized to bins b = round(255 v); each pixel becomes
    (cdf(b) - cdf_min) / (n - cdf_min) where cdf_min is the cumulative count
    of the lowest occupied bin. When every pixel falls in one bin
    (n == cdf_min) the image is returned unchanged.

    Parameters
    ----------
    img : GrayImage
        The image to normalize.

    Returns
    -------
    GrayImage
        The equalized image, values in [0, 1].
    """
    bins = np.clip(np.rint(img.data * 255.0), 0, 255).astype(np.int64)
    n_pixels = bins.size
    if n_pixels == 0:
        return img
    cdf = np.cumsum(np.bincount(bins.ravel(), minlength=256))
    cdf_min = cdf[bins.min()]
    if n_pixels <= cdf_min:
        return img
    lut = (cdf - cdf_min) / float(n_pixels - cdf_min)
    return GrayImage(np.clip(lut[bins], 0.0, 1.0))


def masked_pixels(img: ColorImage, mask: Mask) -> PixelSet:
    """
    Collect the colors of the pixels inside the mask, in row-major order.

    Parameters
    ----------
    img : ColorImage
        The color image.
    mask : Mask
        The crop mask, same dimensions as the image.

    Returns
    -------
    PixelSet
        One sample per true mask bit.

    Raises
    ------
    DimensionMismatch
        If the mask and image sizes differ.
    EmptyMask
        If the mask has no true bit.
    """
    if (mask.width, mask.height) != (img.width, img.height):
        raise DimensionMismatch(
            f"Mask is {mask.width}x{mask.height} but image is {img.width}x{img.height}"
        )
    ys, xs = np.nonzero(mask.bits)
    if len(xs) == 0:
        raise EmptyMask("Mask has no pixel inside the ear region")
    return PixelSet(np.stack([xs, ys], axis=1), img.data[ys, xs])
