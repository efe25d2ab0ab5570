"""Input validation helpers shared across the package."""

import numbers

import numpy as np


class ParameterError(ValueError):
    """Raised when an argument violates a documented precondition."""


class SingularityError(np.linalg.LinAlgError):
    """Raised when a linear system or matrix inverse is numerically singular."""


def check_square(m, name="matrix", min_size=1):
    """Return ``m`` as a 2-D float array, checking it is square."""
    arr = np.asarray(m, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ParameterError(f"{name} must be a square matrix, got shape {arr.shape}")
    if arr.shape[0] < min_size:
        raise ParameterError(f"{name} must have dimension >= {min_size}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ParameterError(f"{name} contains non-finite entries")
    return arr


def check_same_shape(a, b, names=("a", "b")):
    if a.shape != b.shape:
        raise ParameterError(
            f"dimension mismatch: {names[0]} has shape {a.shape}, {names[1]} has shape {b.shape}"
        )


def check_probability(p, name="p"):
    if not isinstance(p, numbers.Real) or not 0.0 <= float(p) <= 1.0:
        raise ParameterError(f"{name} must be a probability in [0, 1], got {p!r}")
    return float(p)


def check_nonnegative(x, name):
    if not isinstance(x, numbers.Real) or not np.isfinite(x) or x < 0:
        raise ParameterError(f"{name} must be a finite non-negative number, got {x!r}")
    return float(x)


def check_positive(x, name):
    if not isinstance(x, numbers.Real) or not np.isfinite(x) or x <= 0:
        raise ParameterError(f"{name} must be a finite positive number, got {x!r}")
    return float(x)


def check_int(x, name, minimum):
    if isinstance(x, bool) or not isinstance(x, numbers.Integral) or x < minimum:
        raise ParameterError(f"{name} must be an integer >= {minimum}, got {x!r}")
    return int(x)


def check_random_state(rng):
    """Accept a ``numpy.random.Generator`` or an integer seed.

    There is deliberately no ``None`` default: callers must pass a seeded source.
    """
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, numbers.Integral) and not isinstance(rng, bool):
        return np.random.default_rng(int(rng))
    raise ParameterError(f"expected a numpy Generator or an integer seed, got {type(rng).__name__}")
