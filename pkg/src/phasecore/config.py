"""
Config Module
Loads the layered YAML configuration and sets up logging.

Resolution order, highest first: command-line flags (applied by the CLI),
the user file passed with --config, PHASECORE_SEED, packaged defaults.
"""

import copy
import logging
import os
from pathlib import Path
from typing import Any, Dict, Optional

import yaml

from .errors import ConfigError

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = Path(__file__).parent / "config.yaml"
SEED_ENV_VAR = "PHASECORE_SEED"

_POINT_KEYS = {"seed", "n", "N", "I_size", "sigma", "nu", "methods", "trials"}

# Keys a user file may set, per section
SCHEMA: Dict[str, Any] = {
    "logging": {"level", "format", "file"},
    "output": {"out", "include_timing", "workers"},
    "bound": {"n", "N", "I_size", "sigma", "nu", "eps", "delta", "t", "c"},
    "trial": _POINT_KEYS,
    "certify": _POINT_KEYS,
    "sweep": _POINT_KEYS | {"eps", "delta", "t", "c"},
    "validate": {
        "seed": None,
        "checks": None,
        "order_stats": {"n", "N", "sigma", "I_size", "delta", "eps", "trials"},
        "weak_energy": {"n", "N", "sigma", "I_size", "eps", "delta", "t", "c", "trials"},
        "wishart": {"n", "I_size", "t", "trials"},
        "subcolumn": {"n", "N", "I_size", "trials"},
    },
}


def get_default_config() -> Dict[str, Any]:
    """
    Get built-in defaults, used when the packaged config.yaml is unreadable.

    Returns:
        Default configuration dictionary
    """
    return {
        'logging': {
            'level': 'INFO',
            'format': '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
            'file': None
        },
        'output': {'out': 'output', 'include_timing': False, 'workers': None},
        'bound': {'c': 1.0},
        'trial': {
            'seed': 0, 'n': 32, 'N': 2048,
            'methods': ['null', 'spectral'], 'trials': 1
        },
        'certify': {'seed': 0, 'n': 32, 'N': 2048, 'trials': 100},
        'sweep': {
            'seed': 0, 'n': 64, 'N': [512, 1024, 2048, 4096], 'nu': 0.5,
            'methods': ['null', 'spectral'], 'trials': 50,
            'eps': 0.5, 'delta': 1.0, 't': 0.1, 'c': 1.0
        },
        'validate': {
            'seed': 0,
            'checks': ['order_stats', 'weak_energy', 'wishart', 'subcolumn'],
            'order_stats': {
                'n': 2, 'N': 4096, 'sigma': 0.25, 'delta': 0.5, 'eps': 0.25, 'trials': 1000
            },
            'weak_energy': {
                'n': 2, 'N': 4096, 'sigma': 0.25, 'eps': 0.5, 'delta': 1.0, 't': 1.0,
                'c': 1.0, 'trials': 500
            },
            'wishart': {'n': 64, 'I_size': 1024, 't': 0.5, 'trials': 500},
            'subcolumn': {'n': 4, 'N': 32, 'I_size': 8, 'trials': 2000},
        }
    }


def _read_yaml(path: Path) -> Dict[str, Any]:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = yaml.safe_load(f)
    except yaml.MarkedYAMLError as e:
        mark = e.problem_mark
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "unknown position"
        raise ConfigError(f"Malformed config {path} at {where}: {e.problem}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"Malformed config {path}: {e}") from e
    except OSError as e:
        raise ConfigError(f"Cannot read config {path}: {e}") from e

    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"Config {path} must be a mapping of sections, got {type(data).__name__}")
    return data


def _check_schema(data: Dict[str, Any], schema: Dict[str, Any], where: str) -> None:
    for key, value in data.items():
        if key not in schema:
            raise ConfigError(f"Unknown field '{key}' in {where}")
        allowed = schema[key]
        if allowed is None:
            continue
        if not isinstance(value, dict):
            raise ConfigError(f"Section '{key}' in {where} must be a mapping")
        if isinstance(allowed, dict):
            _check_schema(value, allowed, f"section '{key}'")
        else:
            for field in value:
                if field not in allowed:
                    raise ConfigError(f"Unknown field '{field}' in section '{key}'")


def deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """
    Merge override into a copy of base, recursing into nested mappings.

    Args:
        base: Lower-precedence configuration
        override: Higher-precedence configuration

    Returns:
        Merged configuration dictionary
    """
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _apply_seed_env(config: Dict[str, Any]) -> None:
    raw = os.environ.get(SEED_ENV_VAR)
    if raw is None or raw.strip() == "":
        return
    try:
        seed = int(raw)
    except ValueError as e:
        raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got '{raw}'") from e
    if not 0 <= seed < 2 ** 64:
        raise ConfigError(f"{SEED_ENV_VAR} must be a 64-bit unsigned integer, got {seed}")
    for section in config.values():
        if isinstance(section, dict) and 'seed' in section:
            section['seed'] = seed
    logger.debug(f"Master seed {seed} taken from {SEED_ENV_VAR}")


def load_config(user_path: Optional[str] = None) -> Dict[str, Any]:
    """
    Load packaged defaults, apply PHASECORE_SEED, then merge the user file.

    Args:
        user_path: Optional path to a user YAML file

    Returns:
        Configuration dictionary

    Raises:
        ConfigError: If the user file is malformed or has unknown fields
    """
    try:
        config = _read_yaml(DEFAULT_CONFIG_PATH)
        logger.debug(f"Configuration loaded from {DEFAULT_CONFIG_PATH}")
    except ConfigError as e:
        logger.warning(f"Could not load packaged config: {str(e)}")
        logger.info("Using default configuration")
        config = get_default_config()

    _apply_seed_env(config)

    if user_path:
        user = _read_yaml(Path(user_path))
        _check_schema(user, SCHEMA, f"config {user_path}")
        config = deep_merge(config, user)
        logger.info(f"Configuration loaded from {user_path}")

    return config


def setup_logging(config: Dict[str, Any], verbose: bool = False) -> None:
    """
    Set up logging from the 'logging' section.

    Args:
        config: Configuration dictionary
        verbose: Force DEBUG level
    """
    log_config = config.get('logging', {})
    log_level = 'DEBUG' if verbose else str(log_config.get('level', 'INFO')).upper()
    log_format = log_config.get('format', '%(asctime)s - %(name)s - %(levelname)s - %(message)s')
    log_file = log_config.get('file')

    handlers = [logging.StreamHandler()]
    if log_file:
        log_path = Path(log_file)
        log_path.parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_file))

    logging.basicConfig(
        level=getattr(logging, log_level, logging.INFO),
        format=log_format,
        handlers=handlers,
        force=True
    )
