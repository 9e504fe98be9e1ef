"""
Configuration Management System

Learning Notes:
- Experiment settings come from three layers: built-in defaults, an
  optional flat key=value file (parsed with python-dotenv), and CLI flags
- File values are strings; each one is coerced to the type of its default
- Unknown keys are rejected so typos never pass silently
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

from dotenv import dotenv_values

from cli.experiments import ExperimentConfig
from utils.errors import DataFileError, UsageError

TRUE_WORDS = {"1", "true", "yes", "on"}
FALSE_WORDS = {"0", "false", "no", "off"}


def _normalise_key(key: str) -> str:
    return key.strip().lower().replace("-", "_")


class Config:
    """
    Configuration manager for RoseSpec experiments.

    This class handles:
    1. Default values for every experiment setting
    2. Loading a key=value experiment file over the defaults
    3. Applying command-line overrides
    4. Producing a validated ExperimentConfig
    """

    def __init__(self, config_file: Optional[Union[str, Path]] = None):
        """Initialize configuration with default values."""
        self.logger = logging.getLogger(__name__)
        self.config_file = Path(config_file) if config_file else None

        # Default configuration values
        self.defaults: Dict[str, Any] = {
            'graph': 'dirac-rose',
            'bonds': 101,
            'eigenvalues': 20000,
            'realisations': 20,
            'seed': 1,
            'bin_width': 0.05,
            'x_max': 10.0,
            'out': 'rosespec',
            'resample_lengths': False,
            'threads': 0,
            'lengths': '',
            'angles': '',
            'poisson': False,
            'tau_min': 0.01,
            'tau_max': 2.0,
            'tau_step': 0.01,
            'window': 0.45,
            'family': 'rose-large',
            'start': 1.0,
            'stop': 10.0,
            'step': 0.05,
            'samples': 1_000_000,
            'tolerance': 1.0e-8,
            'mode': 'bonds',
            'compare_bonds': '21,61,101',
        }

        self.config_data = self.load()

    def _coerce(self, key: str, raw: Any) -> Any:
        default = self.defaults[key]
        if raw is None:
            raise UsageError(f"config key {key!r} has no value")
        if isinstance(default, bool):
            if isinstance(raw, bool):
                return raw
            word = str(raw).strip().lower()
            if word in TRUE_WORDS:
                return True
            if word in FALSE_WORDS:
                return False
            raise UsageError(f"config key {key!r} expects a boolean, got {raw!r}")
        try:
            if isinstance(default, int):
                return int(raw)
            if isinstance(default, float):
                return float(raw)
        except (TypeError, ValueError) as e:
            raise UsageError(f"config key {key!r} expects {type(default).__name__}, got {raw!r}") from e
        if isinstance(raw, (list, tuple)):
            return ",".join(str(v) for v in raw)
        return str(raw).strip()

    def merge(self, values: Mapping[str, Any]) -> None:
        """Coerce and apply values over the current configuration."""
        for raw_key, raw in values.items():
            key = _normalise_key(raw_key)
            if key not in self.defaults:
                raise UsageError(f"unknown config key {raw_key!r}")
            self.config_data[key] = self._coerce(key, raw)

    def load(self) -> Dict[str, Any]:
        """
        Load configuration from file.

        Learning Notes:
        - dotenv_values parses the file without touching os.environ
        - Missing keys keep their defaults
        """
        self.config_data = self.defaults.copy()
        if self.config_file is None:
            return self.config_data
        if not self.config_file.is_file():
            raise DataFileError(self.config_file, "config file not found")

        self.merge(dotenv_values(self.config_file))
        self.logger.info(f"Loaded experiment config from {self.config_file}")
        return self.config_data

    def apply_overrides(self, overrides: Mapping[str, Any]) -> None:
        """Apply CLI values; None means the flag was not given."""
        self.merge({k: v for k, v in overrides.items() if v is not None and _normalise_key(k) in self.defaults})

    def get(self, key: str, default: Any = None) -> Any:
        """Get configuration value by key."""
        return self.config_data.get(key, default)

    def set(self, key: str, value: Any) -> None:
        """Set configuration value."""
        self.merge({key: value})

    def to_experiment(self) -> ExperimentConfig:
        """Validated, immutable experiment description."""
        return ExperimentConfig.from_mapping(self.config_data)

    def export_config(self, export_path: Union[str, Path]) -> Path:
        """Export configuration as JSON."""
        path = Path(export_path)
        try:
            with open(path, 'w', encoding='utf-8') as f:
                json.dump(self.config_data, f, indent=2, ensure_ascii=False)
        except OSError as e:
            raise DataFileError(path, str(e)) from e
        return path
