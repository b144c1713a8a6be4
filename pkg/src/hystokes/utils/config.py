import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any

import yaml

from .logger import get_logger

logger = get_logger(__name__)

THREADS_ENV_VAR = "HYSTOKES_THREADS"


@dataclass
class HyStokesConfig:
    """Main hystokes configuration"""

    # Registry and outputs
    methods_config_path: Path | None = None
    results_db_path: Path | None = None

    # Quadrature policy (extra degrees on top of the defaults)
    quad_bump: int = 0
    error_degree: int = 16
    forcing_extra: int = 9

    # Discretization defaults
    sigma: str = "matrix"
    eta: float | None = None
    condense: bool = True

    # Solver
    residual_tolerance: float = 1e-10
    dense_fallback_limit: int = 5000

    # Reproducibility
    seed: int = 42

    # Performance settings
    threads: int | None = None

    # Logging
    log_level: str = "INFO"
    log_file: Path | None = None

    def resolved_threads(self) -> int:
        """Worker count: explicit setting, then HYSTOKES_THREADS, then 1."""
        if self.threads:
            return max(1, int(self.threads))
        env_value = os.environ.get(THREADS_ENV_VAR)
        if env_value:
            try:
                return max(1, int(env_value))
            except ValueError:
                logger.warning(f"Ignoring non-integer {THREADS_ENV_VAR}={env_value!r}")
        return 1


_PATH_KEYS = {"methods_config_path", "results_db_path", "log_file"}


class ConfigManager:
    """Configuration management for hystokes"""

    def __init__(self, config_path: Path | None = None):
        self.config_path = config_path
        self._config: HyStokesConfig | None = None

    @property
    def config(self) -> HyStokesConfig:
        """Get current configuration (load if not cached)"""
        if self._config is None:
            self._config = self.load_config()
        return self._config

    def load_config(self, config_path: Path | None = None) -> HyStokesConfig:
        """Load configuration from file or create default"""
        path = config_path or self.config_path

        if path and path.exists():
            try:
                with open(path, encoding="utf-8") as f:
                    config_data = yaml.safe_load(f) or {}
                for key in _PATH_KEYS:
                    if config_data.get(key) is not None:
                        config_data[key] = Path(config_data[key])
                return HyStokesConfig(**config_data)
            except Exception as e:
                logger.warning(f"Could not load config from {path}: {e}")
                logger.warning("Using default configuration")

        return HyStokesConfig()

    def save_config(self, config: HyStokesConfig | None = None, path: Path | None = None) -> None:
        """Save configuration to file"""
        config_to_save = config or self.config
        save_path = path or self.config_path

        if not save_path:
            error_msg = "No config path specified"
            raise ValueError(error_msg)

        save_path.parent.mkdir(parents=True, exist_ok=True)

        config_dict = asdict(config_to_save)
        for key, value in config_dict.items():
            if isinstance(value, Path):
                config_dict[key] = str(value)

        with open(save_path, "w", encoding="utf-8") as f:
            yaml.dump(config_dict, f, default_flow_style=False, indent=2)

    def update_config(self, **kwargs: Any) -> None:
        """Update configuration values; None values leave the current setting untouched"""
        if self._config is None:
            self._config = self.load_config()

        known = {f.name for f in fields(HyStokesConfig)}
        for key, value in kwargs.items():
            if key not in known:
                error_msg = f"Invalid config key: {key}"
                raise ValueError(error_msg)
            if value is not None:
                setattr(self._config, key, value)

    @staticmethod
    def create_default_config_file(path: Path) -> None:
        """Create a default configuration file"""
        default_config = HyStokesConfig(
            methods_config_path=path.parent / "methods.yaml",
            results_db_path=path.parent.parent / "data" / "results.duckdb",
            log_file=path.parent.parent / "logs" / "hystokes.log",
        )

        manager = ConfigManager()
        manager.save_config(default_config, path)
