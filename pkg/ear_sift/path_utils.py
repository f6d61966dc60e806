"""
Path Utilities

Helpers for checking, decomposing and creating the paths the pipeline reads
from and writes to: images, masks, templates, manifests and report folders.
"""

import os
import logging

from .error_utils import ImageFileNotFound, IoFailure


def file_exists(file_path: str, check_empty: bool = False) -> bool:
    """
    Check if a file exists, with an option to verify it's not empty.

    Parameters
    ----------
    file_path : str
        The path to the file.
    check_empty : bool, optional
        If True, also checks that the file is not empty. Defaults to False.

    Returns
    -------
    bool
        True if the file exists (and is not empty if `check_empty` is True).

    Example
    -------
    >>> file_exists("ear_001.png")
    True
    """
    exists = os.path.isfile(file_path)
    if check_empty and exists:
        exists = os.path.getsize(file_path) > 0
    return exists


def dir_exists(path: str) -> bool:
    """Return True if `path` is an existing directory."""
    return os.path.isdir(path)


def checkfile(file_path: str, what: str = "File") -> str:
    """
    Make sure an input file exists and return its absolute path.

    Parameters
    ----------
    file_path : str
        The path to check.
    what : str, optional
        Kind of file, used in the error message (e.g. "Image", "Mask").

    Returns
    -------
    str
        The absolute path.

    Raises
    ------
    ImageFileNotFound
        If the file does not exist.
    """
    if not file_exists(file_path):
        raise ImageFileNotFound(f"{what} '{file_path}' does not exist.")
    return os.path.abspath(file_path)


def folder_name_ext(path: str) -> tuple:
    """
    Decompose a file path into folder, basename and lowercase extension.

    Only the last suffix counts as the extension, so ``probe.v2.png`` gives
    ``("...", "probe.v2", "png")``.

    Parameters
    ----------
    path : str
        The path to decompose.

    Returns
    -------
    tuple
        A tuple (folder, basename, extension).

    Example
    -------
    >>> folder_name_ext("/data/ears/s001_ref.PPM")
    ('/data/ears', 's001_ref', 'ppm')
    """
    path = os.path.abspath(path)
    folder = os.path.dirname(path)
    name, ext = os.path.splitext(os.path.basename(path))
    return folder, name, ext.lstrip(".").lower()


def resolve_path(base_dir: str, path: str) -> str:
    """
    Resolve a manifest entry against the manifest's own folder.

    Absolute paths are returned unchanged (normalized).

    Example
    -------
    >>> resolve_path("/data/synth", "images/s001_ref.png")
    '/data/synth/images/s001_ref.png'
    """
    if os.path.isabs(path):
        return os.path.normpath(path)
    return os.path.normpath(os.path.join(base_dir, path))


def make_directory(folder_path: str) -> str:
    """
    Create a directory (and parents) if needed and return its absolute path.

    Raises
    ------
    IoFailure
        If the directory cannot be created.
    """
    try:
        os.makedirs(folder_path, exist_ok=True)
    except OSError as e:
        raise IoFailure(f"Cannot create directory '{folder_path}': {e}") from e
    logging.debug(f"Directory ready: '{folder_path}'")
    return os.path.abspath(folder_path)


def parent_directory(file_path: str) -> str:
    """Create the folder that will hold `file_path`, if any, and return it."""
    folder = os.path.dirname(os.path.abspath(file_path))
    return make_directory(folder)
