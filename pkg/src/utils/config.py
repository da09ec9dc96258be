import logging
import os
from dataclasses import dataclass, fields, replace

from dotenv import dotenv_values

from utils.errors import ConfigError

logger = logging.getLogger(__name__)

ENV_PREFIX = 'CSEP_'
SOLVERS = ('CLARABEL', 'SCS')


@dataclass(frozen=True)
class Settings:
    """Process-wide numerical and runtime settings."""
    solver: str = 'CLARABEL'
    feas_tol: float = 1e-8
    gap_tol: float = 1e-8
    psd_tol: float = 1e-10
    size_cap: int = 5000
    workers: int = 1
    log_level: str = 'INFO'
    max_tensor_side: int = 1_000_000
    clarabel_max_bytes: int = 268_435_456

    def validate(self):
        if self.solver not in SOLVERS:
            raise ConfigError(f"Unknown solver {self.solver!r}; expected one of {', '.join(SOLVERS)}")
        for name in ('feas_tol', 'gap_tol', 'psd_tol'):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if min(self.size_cap, self.workers, self.max_tensor_side, self.clarabel_max_bytes) < 1:
            raise ConfigError("size_cap, workers, max_tensor_side and clarabel_max_bytes must be at least 1")
        return self

    def with_overrides(self, **overrides):
        """Return a copy with the non-None overrides applied."""
        changes = {key: value for key, value in overrides.items() if value is not None}
        return replace(self, **changes).validate()


def _coerce(name, raw, kind):
    try:
        if kind is str:
            return raw.strip().upper()
        return kind(float(raw)) if kind is int else kind(raw)
    except ValueError:
        raise ConfigError(f"{ENV_PREFIX}{name.upper()}={raw!r} is not a valid {kind.__name__}") from None


def load_settings(env_file='.env'):
    """Load settings from a .env file, with the process environment taking precedence."""
    values = {}
    if os.path.exists(env_file):
        values.update({k: v for k, v in dotenv_values(env_file).items() if v is not None})
    else:
        logger.debug("%s not found, using environment and defaults", env_file)
    values.update(os.environ)

    kwargs = {}
    for field in fields(Settings):
        key = ENV_PREFIX + field.name.upper()
        if key in values and values[key] != '':
            kind = type(field.default)
            kwargs[field.name] = _coerce(field.name, values[key], kind)
    return Settings(**kwargs).validate()


_settings = None


def get_settings():
    """Return the cached process settings, loading them on first use."""
    global _settings
    if _settings is None:
        _settings = load_settings()
    return _settings


def set_settings(settings):
    global _settings
    _settings = settings.validate()


def reset_settings():
    """Forget cached settings (tests)."""
    global _settings
    _settings = None
