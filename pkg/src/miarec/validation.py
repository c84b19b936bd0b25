"""Small input-validation helpers used by the public API surfaces."""

import numpy as np

from .errors import ConfigError, DimensionError


def check_positive(name, value):
    if value <= 0:
        raise ConfigError(f"{name} must be positive, got {value!r}")
    return value


def check_non_negative(name, value):
    if value < 0:
        raise ConfigError(f"{name} must be >= 0, got {value!r}")
    return value


def check_probability(name, value):
    if not 0.0 <= value <= 1.0:
        raise ConfigError(f"{name} must lie in [0, 1], got {value!r}")
    return value


def check_choice(name, value, options):
    if value not in options:
        raise ConfigError(f"{name} must be one of {sorted(options)}, got {value!r}")
    return value


def check_matrix(name, a, rows=None, cols=None):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise DimensionError(f"{name} must be 2-dimensional, got shape {a.shape}")
    if rows is not None and a.shape[0] != rows:
        raise DimensionError(f"{name} must have {rows} rows, got {a.shape[0]}")
    if cols is not None and a.shape[1] != cols:
        raise DimensionError(f"{name} must have {cols} columns, got {a.shape[1]}")
    return a


def check_same_shape(name_a, a, name_b, b):
    if a.shape != b.shape:
        raise DimensionError(
            f"{name_a} and {name_b} must share a shape, got {a.shape} vs {b.shape}"
        )
