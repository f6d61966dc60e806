"""
Template Utilities

Persistence of enrolled templates as a single version-tagged JSON document:

    {
      "format_version": 1,
      "subject_id": "s001",
      "config_fingerprint": "3f0c...",
      "mode": "after",
      "model": {"components": [...]} | null,
      "regions": [{"component_index": 0, "pixel_count": 812, ...}, ...],
      "k_count": 3,
      "keypoints": [{"x": .., "y": .., "scale": .., "orientation": ..,
                     "region": 0, "descriptor": [128 values]}, ...]
    }

Floats are written with their shortest round-trip representation, so a
reloaded template compares equal to the saved one.
"""

import json
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .error_utils import IoFailure, ParseFailure
from .matching_utils import Template
from .mixture_utils import MixtureModel
from .path_utils import checkfile, parent_directory
from .sift_utils import Keypoint

FORMAT_VERSION = 1
DESCRIPTOR_LENGTH = 128


@dataclass(frozen=True)
class TemplateFile:
    """Metadata stored alongside a template."""

    format_version: int
    subject_id: str
    config_fingerprint: str
    mode: str
    regions: Tuple[dict, ...]


def template_to_dict(
    template: Template,
    fingerprint: str,
    mode: str,
    regions: Sequence[dict] = (),
) -> dict:
    """JSON-ready form of a template and its metadata."""
    model = template.source_model
    return {
        "format_version": FORMAT_VERSION,
        "subject_id": template.subject_id,
        "config_fingerprint": fingerprint,
        "mode": mode,
        "model": None if model is None else model.to_dict(),
        "regions": list(regions),
        "k_count": template.k_count,
        "keypoints": [
            {
                "x": kp.x,
                "y": kp.y,
                "scale": kp.scale,
                "orientation": kp.orientation,
                "region": region,
                "descriptor": [float(v) for v in kp.descriptor],
            }
            for kp, region in zip(template.keypoints, template.provenance)
        ],
    }


def save_template(
    template: Template,
    path: str,
    fingerprint: str,
    mode: str,
    regions: Sequence[dict] = (),
) -> None:
    """
    Write a template file.

    Parameters
    ----------
    template : Template
        The template.
    path : str
        Destination JSON file.
    fingerprint : str
        Fingerprint of the configuration that produced the template.
    mode : str
        Segmentation mode ("prior" or "after").
    regions : Sequence[dict], optional
        Region summaries (see segmentation_utils.region_summary).

    Raises
    ------
    IoFailure
        If the file cannot be written.
    """
    document = template_to_dict(template, fingerprint, mode, regions)
    parent_directory(path)
    try:
        with open(path, "wt") as fout:
            json.dump(document, fout, indent=1, sort_keys=True)
    except OSError as e:
        raise IoFailure(f"Cannot write template '{path}': {e}") from e
    logging.info(f"Template of '{template.subject_id}' ({len(template)} keypoints) saved to '{path}'")


def _keypoint(record: dict) -> Tuple[Keypoint, int]:
    descriptor = np.array(record["descriptor"], dtype=np.float64)
    if descriptor.shape != (DESCRIPTOR_LENGTH,):
        raise ValueError(f"descriptor has {descriptor.size} values, expected {DESCRIPTOR_LENGTH}")
    descriptor.setflags(write=False)
    keypoint = Keypoint(
        x=float(record["x"]),
        y=float(record["y"]),
        scale=float(record["scale"]),
        orientation=float(record["orientation"]),
        descriptor=descriptor,
    )
    return keypoint, int(record["region"])


def template_from_dict(document: dict) -> Tuple[Template, TemplateFile]:
    """
    Rebuild a template from its JSON form.

    Raises
    ------
    ParseFailure
        On a wrong version or any missing or malformed field.
    """
    try:
        version = int(document["format_version"])
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported format_version {version}")
        model: Optional[MixtureModel] = None
        if document["model"] is not None:
            model = MixtureModel.from_dict(document["model"])
        records = [_keypoint(r) for r in document["keypoints"]]
        template = Template(
            subject_id=str(document["subject_id"]),
            keypoints=tuple(kp for kp, _ in records),
            provenance=tuple(region for _, region in records),
            source_model=model,
            k_count=int(document["k_count"]),
        )
        meta = TemplateFile(
            format_version=version,
            subject_id=template.subject_id,
            config_fingerprint=str(document["config_fingerprint"]),
            mode=str(document["mode"]),
            regions=tuple(document.get("regions", ())),
        )
    except (KeyError, TypeError, ValueError, AttributeError) as e:
        raise ParseFailure(f"Malformed template: {e}") from e
    return template, meta


def load_template(path: str) -> Tuple[Template, TemplateFile]:
    """
    Read a template file.

    Parameters
    ----------
    path : str
        JSON template written by save_template.

    Returns
    -------
    Tuple[Template, TemplateFile]
        The template and its metadata.

    Raises
    ------
    ImageFileNotFound
        If the file does not exist.
    ParseFailure
        If the file is truncated or malformed.
    """
    path = checkfile(path, "Template")
    try:
        with open(path, "rt") as fin:
            document = json.load(fin)
    except (ValueError, UnicodeDecodeError) as e:
        raise ParseFailure(f"Template '{path}' is not valid JSON: {e}") from e
    if not isinstance(document, dict):
        raise ParseFailure(f"Template '{path}' must hold a JSON object")
    template, meta = template_from_dict(document)
    logging.info(f"Loaded template of '{template.subject_id}' ({len(template)} keypoints) from '{path}'")
    return template, meta


def save_mixture(model: MixtureModel, path: str) -> None:
    """
    Write a color mixture as JSON (e.g. a global skin model).

    Raises
    ------
    IoFailure
        If the file cannot be written.
    """
    parent_directory(path)
    try:
        with open(path, "wt") as fout:
            json.dump({"format_version": FORMAT_VERSION, "model": model.to_dict()}, fout, indent=1, sort_keys=True)
    except OSError as e:
        raise IoFailure(f"Cannot write model '{path}': {e}") from e
    logging.info(f"Saved {len(model)}-component mixture to '{path}'")


def load_mixture(path: str) -> MixtureModel:
    """
    Read a color mixture written by save_mixture.

    Raises
    ------
    ParseFailure
        If the file is malformed.
    """
    path = checkfile(path, "Model")
    try:
        with open(path, "rt") as fin:
            document = json.load(fin)
        return MixtureModel.from_dict(document["model"])
    except (ValueError, KeyError, TypeError, AttributeError, UnicodeDecodeError) as e:
        raise ParseFailure(f"Malformed model file '{path}': {e}") from e
