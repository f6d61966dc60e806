"""
Hashing Utilities

Fingerprints for configurations and image files. Configuration fingerprints
are stored in templates so that a probe processed with different settings is
flagged; file fingerprints detect images shared between a calibration and an
evaluation manifest.
"""

import hashlib

from .path_utils import checkfile


def _hash_engine():
    """Create a new SHA-256 hash engine."""
    return hashlib.sha256()


def hash_string(s: str, size: int = -1) -> str:
    """
    Generate a hash of a given string and optionally return a truncated version.

    Parameters
    ----------
    s : str
        The input string to hash.
    size : int, optional
        If positive, truncates the hex digest to this length. Defaults to -1.

    Returns
    -------
    str
        The hex digest, optionally truncated.

    Example
    -------
    >>> len(hash_string('{"k": 5}', size=16))
    16
    """
    h = _hash_engine()
    h.update(s.encode("utf-8"))
    full_hash = h.hexdigest()
    if size > 0:
        full_hash = full_hash[:size]
    return full_hash


def hashfile(path: str, chunk_size: int = 1 << 20) -> str:
    """
    Hash the content of a file.

    Parameters
    ----------
    path : str
        The file to hash.
    chunk_size : int, optional
        Read size in bytes. Defaults to 1 MiB.

    Returns
    -------
    str
        The hex digest of the file content.

    Raises
    ------
    ImageFileNotFound
        If the file does not exist.
    """
    checkfile(path)
    h = _hash_engine()
    with open(path, "rb") as fin:
        for chunk in iter(lambda: fin.read(chunk_size), b""):
            h.update(chunk)
    return h.hexdigest()
