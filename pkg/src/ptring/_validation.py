"""Input validation helpers shared by the estimators and the functional API."""

import numbers

import numpy as np
from sklearn.utils.validation import column_or_1d


def check_nonneg(name, value):
    if not isinstance(value, numbers.Real) or not np.isfinite(value) or value < 0:
        raise ValueError(f"{name} must be a finite non-negative number, got {value!r}")
    return float(value)


def check_positive(name, value):
    if not isinstance(value, numbers.Real) or not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a finite positive number, got {value!r}")
    return float(value)


def check_fraction(name, value):
    value = check_nonneg(name, value)
    if value > 1:
        raise ValueError(f"{name} must lie in [0, 1], got {value!r}")
    return value


def check_grid(freqs, min_points=2):
    """Return ``freqs`` as a float 1-D array, requiring strictly increasing values."""
    freqs = column_or_1d(np.asarray(freqs, dtype=float), warn=False)
    if freqs.size < min_points:
        raise ValueError(f"grid needs at least {min_points} points, got {freqs.size}")
    if not np.all(np.isfinite(freqs)):
        raise ValueError("grid contains non-finite values")
    if np.any(np.diff(freqs) <= 0):
        raise ValueError("grid must be strictly increasing")
    return freqs


def check_xy(x, y, min_points=2):
    x = check_grid(x, min_points=min_points)
    y = column_or_1d(np.asarray(y, dtype=float), warn=False)
    if y.shape != x.shape:
        raise ValueError(f"x and y lengths differ: {x.size} != {y.size}")
    if not np.all(np.isfinite(y)):
        raise ValueError("y contains non-finite values")
    return x, y


def check_sorted_times(times):
    times = np.asarray(times, dtype=np.int64).ravel()
    if times.size > 1 and np.any(np.diff(times) < 0):
        raise ValueError("timestamps must be sorted ascending")
    return times
