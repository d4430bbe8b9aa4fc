"""
Process-wide settings read from the environment (and an optional .env file).
"""
import logging
import os
from contextlib import contextmanager
from dataclasses import dataclass, fields, replace
from typing import Any, Dict, Iterator, Optional

from dotenv import load_dotenv

from src.coneweyl.errors import ConfigError

load_dotenv()

logger = logging.getLogger(__name__)

WORKERS = int(os.getenv("CONEWEYL_WORKERS", "4"))
LOG_LEVEL = os.getenv("CONEWEYL_LOG_LEVEL", "INFO")
MAX_UNKNOWNS = int(os.getenv("CONEWEYL_MAX_UNKNOWNS", "2000000"))
DENSE_INERTIA_MAX_DIM = int(os.getenv("CONEWEYL_DENSE_INERTIA_MAX_DIM", "2000"))
DENSE_ORACLE_MAX_DIM = int(os.getenv("CONEWEYL_DENSE_ORACLE_MAX_DIM", "4000"))
LATTICE_BUDGET = int(float(os.getenv("CONEWEYL_LATTICE_BUDGET", "1e8")))
EDGE_GRID = int(os.getenv("CONEWEYL_EDGE_GRID", "4096"))


@dataclass(frozen=True)
class Settings:
    """Numerical defaults and resource caps used across the services."""

    workers: int = WORKERS
    log_level: str = LOG_LEVEL
    max_unknowns: int = MAX_UNKNOWNS
    dense_inertia_max_dim: int = DENSE_INERTIA_MAX_DIM
    dense_oracle_max_dim: int = DENSE_ORACLE_MAX_DIM
    lattice_budget: int = LATTICE_BUDGET
    edge_grid: int = EDGE_GRID
    unit_norm_tol: float = 1e-12
    chord_tol: float = 1e-8
    raw_norm_tol: float = 1e-6
    root_tol: float = 1e-13
    pivot_tol: float = 1e-13
    residual_tol: float = 1e-8
    arpack_maxiter: int = 5000
    a_min: float = 0.05
    b_min: float = 0.05
    limit_radius: float = 1e6
    limit_tol: float = 1e-2
    extrema_samples: int = 1000
    quadrature_nodes: int = 64
    dr_norm_threshold: float = 10.0
    dr_norm_constant: float = 10.0


_settings: Optional[Settings] = None


def get_settings() -> Settings:
    """Return the cached settings, building them from the environment on first use."""
    global _settings
    if _settings is None:
        _settings = Settings()
        logger.debug("Loaded settings: %s", _settings)
    return _settings


def configure(**overrides: Any) -> Settings:
    """Replace selected settings for the rest of the process."""
    global _settings
    known = {f.name for f in fields(Settings)}
    unknown = sorted(set(overrides) - known)
    if unknown:
        raise ConfigError(f"Unknown numerics setting(s): {', '.join(unknown)}", field="numerics")
    _settings = replace(get_settings(), **overrides)
    return _settings


@contextmanager
def override_settings(**overrides: Any) -> Iterator[Settings]:
    """Apply overrides inside a block; the previous settings come back on exit."""
    global _settings
    previous = _settings
    try:
        yield configure(**overrides)
    finally:
        _settings = previous


def reset_settings() -> None:
    """Forget overrides; the next get_settings() call rereads the defaults."""
    global _settings
    _settings = None


def settings_dict() -> Dict[str, Any]:
    settings = get_settings()
    return {f.name: getattr(settings, f.name) for f in fields(settings)}
