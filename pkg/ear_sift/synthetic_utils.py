"""
Synthetic Utilities

Deterministic ear-like datasets for tests and desk-scale evaluation.

Every subject gets a 125 x 237 (width x height) color crop made of smooth
color blobs over a subject-specific base tint, overlaid with band-limited
luminance texture, plus an elliptical crop mask. Probes are the reference
slightly rotated (at most 5 degrees) and shifted (at most 3 pixels), with a
brightness jitter of at most 5% and fresh sensor noise.
"""

import colorsys
import logging
import os
from typing import Tuple

import numpy as np
from scipy import ndimage

from .error_utils import ConfigError
from .evaluation_utils import Dataset, SubjectRecord, write_manifest
from .image_utils import ColorImage, Mask, save_image, save_mask
from .path_utils import make_directory

WIDTH = 125
HEIGHT = 237

MAX_ROTATION_DEG = 5.0
MAX_SHIFT_PX = 3.0
MAX_BRIGHTNESS_JITTER = 0.05
NOISE_STD = 0.01
TEXTURE_SIGMA = 2.0
TEXTURE_AMPLITUDE = 0.08

# golden-ratio hue stepping keeps consecutive subjects' tints apart
_HUE_STEP = 0.6180339887498949


def _palette(rng: np.random.Generator, subject_index: int) -> np.ndarray:
    """Base tint followed by 1 to 3 blob colors."""
    base_hue = (0.05 + subject_index * _HUE_STEP) % 1.0
    n_colors = int(rng.integers(2, 5))
    colors = [colorsys.hsv_to_rgb(base_hue, rng.uniform(0.3, 0.6), rng.uniform(0.5, 0.8))]
    for _ in range(n_colors - 1):
        hue = (base_hue + rng.uniform(-0.15, 0.15)) % 1.0
        colors.append(colorsys.hsv_to_rgb(hue, rng.uniform(0.25, 0.75), rng.uniform(0.3, 0.9)))
    return np.array(colors)


def ear_mask(width: int = WIDTH, height: int = HEIGHT) -> Mask:
    """Centered ellipse covering most of the crop."""
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
    inside = ((xx - cx) / (0.46 * width)) ** 2 + ((yy - cy) / (0.46 * height)) ** 2 <= 1.0
    return Mask(inside)


def synthetic_reference(rng: np.random.Generator, subject_index: int) -> np.ndarray:
    """
    Reference raster of one subject, H x W x 3 in [0, 1].

    Parameters
    ----------
    rng : np.random.Generator
        Subject-specific generator.
    subject_index : int
        Position of the subject, which sets its base tint.
    """
    palette = _palette(rng, subject_index)
    yy, xx = np.mgrid[0:HEIGHT, 0:WIDTH].astype(np.float64)
    image = np.broadcast_to(palette[0], (HEIGHT, WIDTH, 3)).copy()
    for color in palette[1:]:
        cx = rng.uniform(0.25 * WIDTH, 0.75 * WIDTH)
        cy = rng.uniform(0.2 * HEIGHT, 0.8 * HEIGHT)
        sigma = rng.uniform(12.0, 30.0)
        weight = np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2.0 * sigma ** 2))[:, :, None]
        image = image * (1.0 - weight) + color * weight
    texture = ndimage.gaussian_filter(rng.standard_normal((HEIGHT, WIDTH)), TEXTURE_SIGMA, mode="reflect")
    texture *= TEXTURE_AMPLITUDE / texture.std()
    return np.clip(image + texture[:, :, None], 0.0, 1.0)


def synthetic_probe(reference: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """
    Probe raster: the reference rotated about its center, shifted, with a
    brightness jitter and additive noise.
    """
    angle = np.deg2rad(rng.uniform(-MAX_ROTATION_DEG, MAX_ROTATION_DEG))
    shift = rng.uniform(-MAX_SHIFT_PX, MAX_SHIFT_PX, size=2)
    brightness = 1.0 + rng.uniform(-MAX_BRIGHTNESS_JITTER, MAX_BRIGHTNESS_JITTER)

    # output (row, col) -> input (row, col)
    cos_a, sin_a = np.cos(angle), np.sin(angle)
    matrix = np.array([[cos_a, -sin_a], [sin_a, cos_a]])
    center = np.array([(HEIGHT - 1) / 2.0, (WIDTH - 1) / 2.0])
    offset = center - matrix @ (center + shift)
    warped = np.stack(
        [
            ndimage.affine_transform(reference[:, :, c], matrix, offset=offset, order=1, mode="reflect")
            for c in range(3)
        ],
        axis=2,
    )
    noise = rng.normal(0.0, NOISE_STD, size=warped.shape)
    return np.clip(warped * brightness + noise, 0.0, 1.0)


def subject_images(seed: int, subject_index: int, n_probes: int = 1) -> Tuple[np.ndarray, Tuple[np.ndarray, ...]]:
    """Reference and probe rasters of one subject, independent of the others."""
    reference = synthetic_reference(np.random.default_rng([seed, subject_index]), subject_index)
    probes = tuple(
        synthetic_probe(reference, np.random.default_rng([seed, subject_index, 1 + k]))
        for k in range(n_probes)
    )
    return reference, probes


def generate_synthetic_dataset(n_subjects: int, out_dir: str, seed: int = 0, n_probes: int = 1) -> Dataset:
    """
    Write a synthetic dataset and its manifest.

    Layout: ``images/<id>_ref.png``, ``images/<id>_probe<k>.png``,
    ``masks/<id>_mask.png`` and ``manifest.json`` (paths relative to
    `out_dir`). The same seed always produces byte-identical files.

    Parameters
    ----------
    n_subjects : int
        Number of subjects, at least 2.
    out_dir : str
        Destination folder.
    seed : int, optional
        Dataset seed. Defaults to 0.
    n_probes : int, optional
        Probes per subject. Defaults to 1.

    Returns
    -------
    Dataset
        The dataset with absolute paths.

    Raises
    ------
    IoFailure
        If a file cannot be written.

    Example
    -------
    >>> ds = generate_synthetic_dataset(2, "synth", seed=7)
    >>> [s.subject_id for s in ds.subjects]
    ['s001', 's002']
    """
    if n_subjects < 2:
        raise ConfigError(f"A synthetic dataset needs at least 2 subjects, got {n_subjects}")
    if n_probes < 1:
        raise ConfigError(f"Every subject needs at least 1 probe, got {n_probes}")
    out_dir = make_directory(out_dir)
    image_dir = make_directory(os.path.join(out_dir, "images"))
    mask_dir = make_directory(os.path.join(out_dir, "masks"))
    mask = ear_mask()

    subjects = []
    for index in range(n_subjects):
        subject_id = f"s{index + 1:03d}"
        reference, probes = subject_images(seed, index, n_probes)
        ref_path = os.path.join(image_dir, f"{subject_id}_ref.png")
        save_image(ColorImage(reference), ref_path)
        probe_paths = []
        for k, probe in enumerate(probes):
            probe_path = os.path.join(image_dir, f"{subject_id}_probe{k + 1}.png")
            save_image(ColorImage(probe), probe_path)
            probe_paths.append(probe_path)
        mask_path = os.path.join(mask_dir, f"{subject_id}_mask.png")
        save_mask(mask, mask_path)
        subjects.append(SubjectRecord(subject_id, ref_path, tuple(probe_paths), mask_path))

    dataset = Dataset(tuple(subjects))
    write_manifest(dataset, os.path.join(out_dir, "manifest.json"), relative_to=out_dir)
    logging.info(f"Generated {n_subjects} synthetic subjects in '{out_dir}'")
    return dataset
