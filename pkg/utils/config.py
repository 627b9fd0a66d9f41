"""
Config loading - YAML/JSON files into plain dicts, strict key checking for dataclasses.
"""

import logging
from dataclasses import fields
from pathlib import Path
from typing import Dict, Mapping, Union

import yaml

from utils.errors import ContractError

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = Path(__file__).resolve().parent.parent / 'config.yaml'


def load_config(path: Union[str, Path, None] = None) -> dict:
    """Load a YAML (or JSON) mapping; the repository config.yaml when no path is given."""
    config_path = Path(path) if path is not None else DEFAULT_CONFIG_PATH
    if not config_path.exists():
        if path is None:
            return {}
        raise ContractError(f"config file not found: {config_path}")
    try:
        with open(config_path) as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ContractError(f"could not parse config {config_path}: {e}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ContractError(f"config {config_path} must contain a mapping, got {type(data).__name__}")
    logger.debug(f"Loaded config from {config_path}")
    return data


def check_keys(cls, mapping: Mapping, context: str) -> Dict:
    """Reject keys that are not fields of the dataclass cls."""
    if not isinstance(mapping, Mapping):
        raise ContractError(f"{context} must be a mapping, got {type(mapping).__name__}")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(mapping) - known)
    if unknown:
        raise ContractError(f"unknown {context} keys: {', '.join(unknown)} "
                            f"(allowed: {', '.join(sorted(known))})")
    return dict(mapping)
