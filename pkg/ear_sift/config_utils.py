"""
Configuration Utilities

Loading and validation of the pipeline settings, with a fallback approach in
decreasing order of precedence:
    1. an explicit configuration file (JSON, YAML or flat ``key = value`` text)
    2. the file named by ``EARSIFT_CONFIG``, after merging .env files into
       os.environ
    3. built-in defaults
Command-line overrides are applied last.

Nested sections are addressed with dotted keys (``sift.sigma0 = 1.6``,
``match.psi = 0.3``) in every format.
"""

import dataclasses
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, Mapping, Optional

import yaml
from dotenv import dotenv_values, load_dotenv

from .error_utils import ConfigError
from .hash_utils import hash_string
from .matching_utils import MatchParams
from .mixture_utils import MAX_COMPONENTS
from .path_utils import checkfile, file_exists, folder_name_ext
from .sift_utils import SiftParams

ENV_CONFIG_KEY = "EARSIFT_CONFIG"

PRIOR = "prior"
AFTER = "after"
MODES = (PRIOR, AFTER)

GATE_REFERENCE = "reference"
GATE_GLOBAL = "global"
GATE_MODES = (GATE_REFERENCE, GATE_GLOBAL)

_SECTIONS = {"sift": SiftParams, "match": MatchParams}
_TRUE = ("1", "true", "yes", "on")
_FALSE = ("0", "false", "no", "off")


@dataclass(frozen=True)
class Config:
    """
    Every open parameter of the pipeline.

    Attributes
    ----------
    k : int
        Mixture components, 1..32.
    tau_kl : float
        KL gate threshold, > 0.
    w_min : float
        Minimum region pixel fraction, in [0, 1).
    sift : SiftParams
        Detector and descriptor settings.
    match : MatchParams
        Strategy, NN ratio, ED distance bound and psi.
    seed : int
        Seed of every randomized step, 0..2^64 - 1.
    gate_mode : str
        "reference" (gate against the claimed identity's model) or "global"
        (gate against a pooled skin model).
    mode : str
        "after" (color segmentation) or "prior" (whole crop as one region).
    workers : int
        Worker processes of the evaluation harness (scikit-learn convention).
    """

    k: int = 5
    tau_kl: float = 2.0
    w_min: float = 0.05
    sift: SiftParams = field(default_factory=SiftParams)
    match: MatchParams = field(default_factory=MatchParams)
    seed: int = 0
    gate_mode: str = GATE_REFERENCE
    mode: str = AFTER
    workers: int = 1

    def __post_init__(self):
        problems = []
        if not 1 <= self.k <= MAX_COMPONENTS:
            problems.append(f"k must lie in 1..{MAX_COMPONENTS}, got {self.k}")
        if not self.tau_kl > 0.0:
            problems.append(f"tau_kl must be positive, got {self.tau_kl}")
        if not 0.0 <= self.w_min < 1.0:
            problems.append(f"w_min must lie in [0, 1), got {self.w_min}")
        if not 0 <= self.seed < 2 ** 64:
            problems.append(f"seed must fit in 64 unsigned bits, got {self.seed}")
        if self.gate_mode not in GATE_MODES:
            problems.append(f"gate_mode must be one of {GATE_MODES}, got '{self.gate_mode}'")
        if self.mode not in MODES:
            problems.append(f"mode must be one of {MODES}, got '{self.mode}'")
        if problems:
            raise ConfigError("Invalid configuration: " + "; ".join(problems))

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


def _flatten(values: Mapping[str, Any], prefix: str = "") -> Dict[str, Any]:
    flat = {}
    for key, value in values.items():
        name = f"{prefix}{str(key).strip().lower()}"
        if isinstance(value, Mapping):
            flat.update(_flatten(value, f"{name}."))
        else:
            flat[name] = value
    return flat


def _coerce(value: Any, kind: type, key: str) -> Any:
    """Convert a raw (text or parsed) value to the type of its field."""
    try:
        if kind is bool:
            if isinstance(value, bool):
                return value
            text = str(value).strip().lower()
            if text in _TRUE:
                return True
            if text in _FALSE:
                return False
            raise ValueError(text)
        if kind is int:
            if isinstance(value, bool):
                raise ValueError(value)
            if isinstance(value, float):
                if not value.is_integer():
                    raise ValueError(value)
                return int(value)
            return int(str(value).strip())
        if kind is float:
            if isinstance(value, bool):
                raise ValueError(value)
            return float(value)
        return str(value).strip()
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Invalid value for '{key}': {value!r} is not a valid {kind.__name__}") from e


def config_from_dict(values: Mapping[str, Any]) -> Config:
    """
    Build a Config from nested or dotted keys.

    Parameters
    ----------
    values : Mapping[str, Any]
        Settings such as ``{"k": 4, "sift": {"sigma0": 1.6}}`` or
        ``{"k": "4", "sift.sigma0": "1.6"}``.

    Returns
    -------
    Config
        Defaults overridden by `values`.

    Raises
    ------
    ConfigError
        On unknown keys, unparsable values or out-of-range values.

    Example
    -------
    >>> config_from_dict({"match.strategy": "ed"}).match.strategy
    'ed'
    """
    top_fields = {f.name: f.type for f in dataclasses.fields(Config) if f.name not in _SECTIONS}
    section_fields = {
        name: {f.name: f.type for f in dataclasses.fields(cls)} for name, cls in _SECTIONS.items()
    }
    top, sections = {}, {name: {} for name in _SECTIONS}
    for key, raw in _flatten(values).items():
        section, _, name = key.rpartition(".")
        if section == "" and name in top_fields:
            top[name] = _coerce(raw, top_fields[name], key)
        elif section in section_fields and name in section_fields[section]:
            sections[section][name] = _coerce(raw, section_fields[section][name], key)
        else:
            raise ConfigError(f"Unknown configuration key '{key}'")
    nested = {name: cls(**sections[name]) for name, cls in _SECTIONS.items()}
    return Config(**top, **nested)


def read_config_file(path: str) -> Dict[str, Any]:
    """
    Read a configuration file into a (possibly nested) dictionary.

    ``.json`` and ``.yaml`` / ``.yml`` files are parsed as such; any other
    extension is read as flat ``key = value`` lines with ``#`` comments.

    Raises
    ------
    ImageFileNotFound
        If the file does not exist.
    ConfigError
        If the file cannot be parsed.
    """
    path = checkfile(path, "Configuration file")
    _, _, ext = folder_name_ext(path)
    try:
        if ext == "json":
            with open(path, "rt") as fin:
                values = json.load(fin)
        elif ext in ("yaml", "yml"):
            with open(path, "rt") as fin:
                values = yaml.load(fin, Loader=yaml.SafeLoader)
        else:
            values = dotenv_values(path)
    except (ValueError, yaml.YAMLError) as e:
        raise ConfigError(f"Configuration file '{path}' cannot be parsed: {e}") from e
    if values is None:
        values = {}
    if not isinstance(values, Mapping):
        raise ConfigError(f"Configuration file '{path}' must hold key/value pairs")
    logging.info(f"Configuration loaded from '{path}'")
    return dict(values)


def load_config(
    path: Optional[str] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    env_files: Iterable[str] = (".env",),
) -> Config:
    """
    Load the pipeline configuration with a fallback approach.

    Parameters
    ----------
    path : str, optional
        Explicit configuration file. When missing, .env files are merged into
        os.environ and ``EARSIFT_CONFIG`` (upper or lower case) names the
        file, if set.
    overrides : Mapping[str, Any], optional
        Dotted keys applied last (command-line flags); None values are
        ignored.
    env_files : Iterable[str], optional
        .env files to merge. Defaults to (".env",).

    Returns
    -------
    Config
        The validated configuration.

    Example
    -------
    >>> load_config(overrides={"seed": 7}).seed
    7
    """
    if not path:
        for env_file in env_files:
            if file_exists(env_file):
                load_dotenv(env_file)
                logging.info(f"Loaded env file: {env_file}")
        path = os.environ.get(ENV_CONFIG_KEY) or os.environ.get(ENV_CONFIG_KEY.lower())
        if path:
            logging.info(f"Using configuration file from {ENV_CONFIG_KEY}: {path}")

    values = _flatten(read_config_file(path)) if path else {}
    if not path:
        logging.info("No configuration file, using defaults")
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key.lower()] = value
    return config_from_dict(values)


def config_fingerprint(config: Config) -> str:
    """
    Short hash of the canonical JSON form of a configuration.

    Any field change changes the fingerprint.
    """
    return hash_string(json.dumps(config.to_dict(), sort_keys=True), size=16)
