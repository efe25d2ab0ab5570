"""Polynomial graph filters, signal generation and covariance estimation."""

from dataclasses import dataclass

import numpy as np

from ._validation import (
    ParameterError,
    SingularityError,
    check_int,
    check_nonnegative,
    check_random_state,
    check_same_shape,
    check_square,
)
from .graph import Gso

COMMUTE_RTOL = 1e-10


def commutation_residual(a, b):
    """Frobenius norm of ``A B - B A``."""
    a = check_square(a, "a")
    b = check_square(b, "b")
    check_same_shape(a, b, ("a", "b"))
    return float(np.linalg.norm(a @ b - b @ a))


@dataclass(frozen=True, eq=False)
class FilterCoeffs:
    """Coefficients ``h_0 ... h_K`` of a polynomial graph filter."""

    h: np.ndarray
    unit_norm: bool = False

    def __post_init__(self):
        h = np.atleast_1d(np.asarray(self.h, dtype=float)).copy()
        if h.ndim != 1 or h.size == 0:
            raise ParameterError("filter coefficients must be a non-empty vector")
        if self.unit_norm and abs(np.linalg.norm(h) - 1.0) > 1e-12:
            raise ParameterError("coefficients flagged unit-norm do not have unit l2 norm")
        h.setflags(write=False)
        object.__setattr__(self, "h", h)

    @property
    def k(self):
        return self.h.size - 1

    def __mul__(self, a):
        return FilterCoeffs(a * self.h)

    __rmul__ = __mul__

    def __add__(self, other):
        if not isinstance(other, FilterCoeffs):
            return NotImplemented
        k = max(self.k, other.k)
        return FilterCoeffs(np.pad(self.h, (0, k - self.k)) + np.pad(other.h, (0, k - other.k)))


@dataclass(frozen=True, eq=False)
class GraphFilter:
    """A dense graph filter ``H``.

    ``coeffs`` and ``source`` record how the filter was generated, when known.
    ``model`` is ``"polynomial"``, ``"sem"`` or ``None`` for estimates.
    Filters with a recorded source must commute with it.
    """

    matrix: np.ndarray
    coeffs: FilterCoeffs | None = None
    source: Gso | None = None
    model: str | None = None

    def __post_init__(self):
        h = check_square(self.matrix, "filter").copy()
        h.setflags(write=False)
        object.__setattr__(self, "matrix", h)
        if self.source is not None:
            s = self.source.entries
            if s.shape != h.shape:
                raise ParameterError("filter and source GSO dimensions differ")
            if commutation_residual(s, h) > COMMUTE_RTOL * max(np.linalg.norm(h), 1.0) * max(
                1.0, np.linalg.norm(s)
            ):
                raise ParameterError("filter with a recorded source GSO must commute with it")

    @property
    def n(self):
        return self.matrix.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.array(self.matrix, dtype=dtype)


@dataclass(frozen=True, eq=False)
class SignalBatch:
    """Paired ``n x m`` input and output signal matrices (one signal per column)."""

    x: np.ndarray
    y: np.ndarray
    noise_power: float = 0.0

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x, dtype=float)).copy()
        y = np.atleast_2d(np.asarray(self.y, dtype=float)).copy()
        check_same_shape(x, y, ("x", "y"))
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def m(self):
        return self.x.shape[1]


@dataclass(frozen=True, eq=False)
class Covariance:
    """Symmetric positive semidefinite covariance matrix."""

    c: np.ndarray

    def __post_init__(self):
        c = check_square(self.c, "covariance")
        scale = max(1.0, float(np.abs(c).max()))
        if np.abs(c - c.T).max() > 1e-12 * scale:
            raise ParameterError("covariance must be symmetric")
        c = (c + c.T) / 2.0
        if np.linalg.eigvalsh(c).min() < -1e-10 * scale:
            raise ParameterError("covariance must be positive semidefinite")
        c.setflags(write=False)
        object.__setattr__(self, "c", c)

    def __array__(self, dtype=None, copy=None):
        return np.array(self.c, dtype=dtype)


def build_filter(s, coeffs):
    """``H = sum_k h_k S^k`` evaluated with Horner's rule."""
    if not isinstance(coeffs, FilterCoeffs):
        coeffs = FilterCoeffs(coeffs)
    gso = s if isinstance(s, Gso) else None
    s = check_square(np.asarray(s, dtype=float), "S")
    n = s.shape[0]
    h = coeffs.h
    out = h[-1] * np.eye(n)
    for c in h[-2::-1]:
        out = s @ out
        out[np.diag_indices(n)] += c
    return GraphFilter(out, coeffs=coeffs, source=gso, model="polynomial")


def random_coeffs(k, unit_norm, rng):
    """i.i.d. uniform ``[-1, 1]`` coefficients, optionally scaled to unit l2 norm."""
    k = check_int(k, "k", 0)
    rng = check_random_state(rng)
    while True:
        h = rng.uniform(-1.0, 1.0, size=k + 1)
        norm = np.linalg.norm(h)
        if norm > 0:
            break
    if unit_norm:
        h = h / norm
    return FilterCoeffs(h, unit_norm=unit_norm)


def generate_white_inputs(n, m, rng):
    """``n x m`` matrix of i.i.d. standard normal entries."""
    n = check_int(n, "n", 1)
    m = check_int(m, "m", 1)
    return check_random_state(rng).standard_normal((n, m))


def add_awgn(signal, normalized_power, rng):
    """Add white Gaussian noise whose energy is ``normalized_power`` times the
    mean squared column norm of ``signal`` (per column, in expectation)."""
    signal = np.atleast_2d(np.asarray(signal, dtype=float))
    power = check_nonnegative(normalized_power, "normalized_power")
    rng = check_random_state(rng)
    if power == 0:
        return signal.copy()
    n, m = signal.shape
    col_energy = float((signal**2).sum()) / m
    sigma = np.sqrt(power * col_energy / n)
    return signal + sigma * rng.standard_normal((n, m))


def generate_io_pairs(h, m, noise_power, rng):
    """White inputs ``X`` and outputs ``Y = H X`` plus normalized AWGN on ``Y``."""
    rng = check_random_state(rng)
    hm = np.asarray(h, dtype=float)
    x = generate_white_inputs(hm.shape[0], m, rng)
    y = add_awgn(hm @ x, noise_power, rng)
    return SignalBatch(x, y, noise_power=float(noise_power))


def sem_filter(s):
    """SEM graph filter ``(I - S)^{-1}``."""
    gso = s if isinstance(s, Gso) else None
    s = check_square(np.asarray(s, dtype=float), "S")
    a = np.eye(s.shape[0]) - s
    smin = np.linalg.svd(a, compute_uv=False).min()
    if smin <= 1e-10:
        raise SingularityError(f"I - S is singular (smallest singular value {smin:.3e})")
    h = np.linalg.solve(a, np.eye(s.shape[0]))
    return GraphFilter(h, source=gso, model="sem")


def sample_covariance(y):
    """Zero-mean sample covariance ``Y Y^T / m``."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if y.shape[1] < 1:
        raise ParameterError("need at least one signal to estimate a covariance")
    c = y @ y.T / y.shape[1]
    return Covariance((c + c.T) / 2.0)
