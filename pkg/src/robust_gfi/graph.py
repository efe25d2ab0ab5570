"""Graph-shift operators: construction, random perturbation and projection."""

from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from ._validation import (
    ParameterError,
    check_probability,
    check_random_state,
    check_same_shape,
    check_square,
)

KINDS = ("adjacency", "laplacian", "generic")

_LAPLACIAN_ATOL = 1e-10


@dataclass(frozen=True, eq=False)
class Gso:
    """An immutable graph-shift operator.

    Parameters
    ----------
    entries : array-like of shape (n, n)
        The matrix. A read-only copy is stored.
    kind : {"adjacency", "laplacian", "generic"}
        ``"generic"`` only asserts squareness and is used for estimates whose
        admissible set does not pin the diagonal.
    directed : bool
    weighted : bool
    """

    entries: np.ndarray
    kind: str = "adjacency"
    directed: bool = False
    weighted: bool = False

    def __post_init__(self):
        m = check_square(self.entries, "GSO", min_size=2).copy()
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)
        if self.kind not in KINDS:
            raise ParameterError(f"kind must be one of {KINDS}, got {self.kind!r}")
        self._check_invariants()

    @classmethod
    def from_array(cls, entries, kind="adjacency", directed=None, weighted=None):
        """Build a GSO, inferring ``directed``/``weighted`` when not given."""
        m = check_square(entries, "GSO", min_size=2)
        if directed is None:
            directed = not np.array_equal(m, m.T)
        if weighted is None:
            off = m[~np.eye(m.shape[0], dtype=bool)]
            if kind == "laplacian":
                off = -off
            weighted = not np.all((off == 0) | (off == 1))
        return cls(m, kind=kind, directed=bool(directed), weighted=bool(weighted))

    def _check_invariants(self):
        m = self.entries
        n = m.shape[0]
        off_mask = ~np.eye(n, dtype=bool)
        if not self.directed and not np.array_equal(m, m.T):
            raise ParameterError("undirected GSO must equal its transpose")
        if self.kind == "adjacency":
            if np.any(np.diag(m) != 0):
                raise ParameterError("adjacency GSO must have an all-zero diagonal")
            if not self.weighted and not np.all(np.isin(m[off_mask], (0.0, 1.0))):
                raise ParameterError("unweighted adjacency GSO must have 0/1 off-diagonal entries")
        elif self.kind == "laplacian":
            scale = max(1.0, float(np.abs(m).max()))
            if np.any(np.abs(m.sum(axis=1)) > _LAPLACIAN_ATOL * scale * n):
                raise ParameterError("Laplacian GSO rows must sum to zero")
            if np.any(m[off_mask] > 0):
                raise ParameterError("Laplacian GSO off-diagonal entries must be <= 0")

    @property
    def n(self):
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.array(self.entries, dtype=dtype)

    def adjacency(self):
        """Adjacency matrix underlying this GSO (``-L`` off the diagonal for Laplacians)."""
        if self.kind == "laplacian":
            a = -self.entries.copy()
            np.fill_diagonal(a, 0.0)
            return a
        return self.entries.copy()

    def n_edges(self):
        """Number of links; unordered pairs for undirected graphs."""
        a = self.adjacency()
        np.fill_diagonal(a, 0.0)
        nnz = int(np.count_nonzero(a))
        return nnz if self.directed else nnz // 2


def laplacian_from_adjacency(a, directed=False, weighted=None):
    """``L = diag(A 1) - A`` as a Laplacian :class:`Gso`."""
    a = check_square(a, "adjacency", min_size=2)
    lap = np.diag(a.sum(axis=1)) - a
    if weighted is None:
        off = a[~np.eye(a.shape[0], dtype=bool)]
        weighted = not np.all((off == 0) | (off == 1))
    return Gso(lap, kind="laplacian", directed=directed, weighted=bool(weighted))


@dataclass(frozen=True)
class GsoConstraintSet:
    """Convex admissible set for GSO estimates.

    The default is the set of symmetric matrices with zero diagonal.
    """

    symmetric: bool = True
    zero_diagonal: bool = True
    nonnegative: bool = False
    entry_upper_bound: float | None = None

    def __post_init__(self):
        if self.entry_upper_bound is not None:
            if self.nonnegative and self.entry_upper_bound < 0:
                raise ParameterError("entry_upper_bound must be >= 0 when nonnegative is set")


@dataclass(frozen=True)
class PerturbationSpec:
    """Independent Bernoulli link creation/destruction.

    ``weight_sampler`` is ``"fixed"`` (created links get ``weight_value``) or
    ``"uniform"`` (created links get a weight drawn from ``weight_interval``).
    Weights only matter for weighted GSOs.
    """

    p_create: float = 0.1
    p_destroy: float = 0.1
    weight_sampler: str = "fixed"
    weight_value: float = 1.0
    weight_interval: tuple = field(default=(0.5, 1.5))

    def __post_init__(self):
        check_probability(self.p_create, "p_create")
        check_probability(self.p_destroy, "p_destroy")
        if self.weight_sampler not in ("fixed", "uniform"):
            raise ParameterError(f"unknown weight_sampler {self.weight_sampler!r}")
        lo, hi = self.weight_interval
        if not lo <= hi:
            raise ParameterError("weight_interval must satisfy low <= high")

    @classmethod
    def symmetric(cls, p, **kwargs):
        """Equal creation and destruction probability ``p``."""
        return cls(p_create=p, p_destroy=p, **kwargs)


def generate_er(n, p, rng):
    """Undirected, unweighted Erdos-Renyi adjacency GSO on ``n`` nodes."""
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 2:
        raise ParameterError(f"n must be an integer >= 2, got {n!r}")
    p = check_probability(p, "p")
    rng = check_random_state(rng)
    upper = np.triu(rng.random((n, n)) < p, k=1)
    a = (upper | upper.T).astype(float)
    return Gso(a, kind="adjacency", directed=False, weighted=False)


def _created_weights(spec, size, rng):
    if spec.weight_sampler == "fixed":
        return np.full(size, float(spec.weight_value))
    lo, hi = spec.weight_interval
    return rng.uniform(lo, hi, size=size)


def perturb_links(s, spec, rng):
    """Randomly create and destroy links of ``s``.

    Undirected graphs draw one decision per unordered pair and mirror it.
    Self-loops are never touched. Laplacians are perturbed through their
    adjacency and then rebuilt.
    """
    if not isinstance(s, Gso):
        raise ParameterError("s must be a Gso")
    if not isinstance(spec, PerturbationSpec):
        raise ParameterError("spec must be a PerturbationSpec")
    if s.kind == "generic":
        raise ParameterError("cannot perturb a generic GSO; links are undefined")
    rng = check_random_state(rng)
    a = s.adjacency()
    n = a.shape[0]
    u = rng.random((n, n))
    present = a != 0
    flip = np.where(present, u < spec.p_destroy, u < spec.p_create)
    if s.directed:
        np.fill_diagonal(flip, False)
    else:
        flip = np.triu(flip, k=1)
        flip = flip | flip.T
    create = flip & ~present
    new = a.copy()
    new[flip & present] = 0.0
    if s.weighted:
        weights = _created_weights(spec, n * n, rng).reshape(n, n)
        if not s.directed:
            weights = np.triu(weights, k=1)
            weights = weights + weights.T
        new[create] = weights[create]
    else:
        new[create] = 1.0
    if s.kind == "laplacian":
        return laplacian_from_adjacency(new, directed=s.directed, weighted=s.weighted)
    return Gso(new, kind="adjacency", directed=s.directed, weighted=s.weighted)


def load_karate():
    """Zachary's karate-club graph (34 nodes, 78 undirected links)."""
    text = resources.files("robust_gfi").joinpath("data/karate.txt").read_text()
    edges = np.array([line.split() for line in text.splitlines() if line.strip()], dtype=int)
    n = int(edges.max()) + 1
    a = np.zeros((n, n))
    a[edges[:, 0], edges[:, 1]] = 1.0
    a[edges[:, 1], edges[:, 0]] = 1.0
    return Gso(a, kind="adjacency", directed=False, weighted=False)


def project_onto_constraints(m, c):
    """Euclidean projection of ``m`` onto the admissible set ``c``.

    Each constraint acts on a separate coordinate family, so applying them in
    sequence gives the exact projection: symmetrize, zero the diagonal, then
    clip entries.
    """
    m = check_square(m, "m")
    out = (m + m.T) / 2.0 if c.symmetric else m.copy()
    if c.zero_diagonal:
        np.fill_diagonal(out, 0.0)
    if c.nonnegative or c.entry_upper_bound is not None:
        lo = 0.0 if c.nonnegative else None
        out = np.clip(out, lo, c.entry_upper_bound)
    return out


def gso_from_estimate(m, c):
    """Wrap a solver iterate lying in ``c`` as a weighted :class:`Gso`."""
    kind = "adjacency" if c.zero_diagonal else "generic"
    return Gso(m, kind=kind, directed=not c.symmetric, weighted=True)


def graph_l1_error(s_hat, s_true):
    """Entrywise l1 distance normalized by ``n (n - 1)``."""
    a = check_square(np.asarray(s_hat, dtype=float), "s_hat", min_size=2)
    b = check_square(np.asarray(s_true, dtype=float), "s_true", min_size=2)
    check_same_shape(a, b, ("s_hat", "s_true"))
    n = a.shape[0]
    return float(np.abs(a - b).sum() / (n * (n - 1)))
