"""Joint graph denoising and graph-filter identification.

All algorithms work on the relaxed problem

    min_{S in C, H}  ||Y - H X||_F^2 + lam ||S - S_bar||_1 + beta ||S||_1
                     + gamma ||S H - H S||_F^2

either by alternating its two blocks (``rfi_iter``) or by two-step
approximations that use output covariances (``rfi_d``, ``rfi_r``).
"""

import logging
import warnings
from dataclasses import dataclass, field, fields, replace

import numpy as np
import scipy.linalg
from sklearn.exceptions import ConvergenceWarning

from ._validation import (
    ParameterError,
    SingularityError,
    check_int,
    check_nonnegative,
    check_positive,
    check_same_shape,
    check_square,
)
from .filters import Covariance, GraphFilter, SignalBatch
from .graph import Gso, GsoConstraintSet, gso_from_estimate, project_onto_constraints

logger = logging.getLogger(__name__)

_RCOND_MIN = 1e-14
# below this an unregularized solve falls back to the default ridge
_RCOND_AUTO = 1e-10


@dataclass(frozen=True)
class GammaSchedule:
    """Geometric schedule ``gamma_t = min(initial * growth**t, cap)``."""

    initial: float = 0.1
    growth: float = 2.0
    cap: float = 100.0

    def __post_init__(self):
        check_nonnegative(self.initial, "gamma_schedule.initial")
        check_positive(self.growth, "gamma_schedule.growth")
        check_nonnegative(self.cap, "gamma_schedule.cap")

    @classmethod
    def fixed(cls, gamma):
        return cls(initial=gamma, growth=1.0, cap=gamma)

    def value(self, t):
        if self.initial == 0:
            return 0.0
        return float(min(self.initial * self.growth**t, self.cap))

    def at_cap(self, t):
        return self.value(t) == self.value(t + 1)


@dataclass(frozen=True)
class InnerConfig:
    """Proximal-gradient settings for the graph-denoising step.

    ``step_size=None`` uses ``1/L`` with ``L`` the Lipschitz constant of the
    smooth terms, estimated by power iteration.
    """

    step_size: float | None = None
    max_iters: int = 5000
    tol: float = 1e-6

    def __post_init__(self):
        if self.step_size is not None:
            check_positive(self.step_size, "inner.step_size")
        check_int(self.max_iters, "inner.max_iters", 1)
        check_positive(self.tol, "inner.tol")


@dataclass(frozen=True)
class RfiConfig:
    """Hyperparameters shared by the robust identification algorithms.

    ``lambda_`` weighs the distance to the observed GSO and ``beta`` the
    sparsity of the estimate. The stationarity weights penalize
    ``||C S - S C||_F^2`` for the (Frobenius-normalized) output and input
    covariances. ``ridge=None`` regularizes only ill-conditioned filter solves.
    """

    lambda_: float = 0.03
    beta: float = 0.006
    gamma_schedule: GammaSchedule = field(default_factory=GammaSchedule)
    stationarity_weight_x: float = 0.0
    stationarity_weight_y: float = 100.0
    max_outer_iters: int = 50
    outer_tol: float = 1e-4
    inner: InnerConfig = field(default_factory=InnerConfig)
    ridge: float | None = None

    def __post_init__(self):
        check_nonnegative(self.lambda_, "lambda")
        check_nonnegative(self.beta, "beta")
        check_nonnegative(self.stationarity_weight_x, "stationarity_weight_x")
        check_nonnegative(self.stationarity_weight_y, "stationarity_weight_y")
        check_int(self.max_outer_iters, "max_outer_iters", 1)
        check_positive(self.outer_tol, "outer_tol")
        if self.ridge is not None:
            check_nonnegative(self.ridge, "ridge")
        if isinstance(self.gamma_schedule, dict):
            object.__setattr__(self, "gamma_schedule", GammaSchedule(**self.gamma_schedule))
        if isinstance(self.inner, dict):
            object.__setattr__(self, "inner", InnerConfig(**self.inner))

    def to_dict(self):
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name in ("gamma_schedule", "inner"):
                v = {g.name: getattr(v, g.name) for g in fields(v)}
            out["lambda" if f.name == "lambda_" else f.name] = v
        return out

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        known = {f.name for f in fields(cls)} | {"lambda"}
        unknown = set(d) - known
        if unknown:
            raise ParameterError(f"unknown solver config keys: {sorted(unknown)}")
        if "lambda" in d:
            d["lambda_"] = d.pop("lambda")
        return cls(**d)


@dataclass(frozen=True, eq=False)
class RfiResult:
    """Output of a robust identification run."""

    s_hat: Gso
    h_hat: GraphFilter
    objective_trajectory: tuple
    outer_iters: int
    converged: bool
    method: str = ""


@dataclass(frozen=True, eq=False)
class DenoiseResult:
    """Output of :func:`graph_denoise_step`."""

    s_hat: Gso
    converged: bool
    n_iter: int
    objective: float


def _matrix(m, name):
    if isinstance(m, (Gso, GraphFilter, Covariance)):
        m = np.asarray(m)
    return check_square(m, name)


def _unit_frobenius(c):
    c = np.asarray(c, dtype=float)
    norm = np.linalg.norm(c)
    return c / norm if norm > 0 else c


def _check_batch(batch, n):
    if not isinstance(batch, SignalBatch):
        raise ParameterError("batch must be a SignalBatch")
    if batch.n != n:
        raise ParameterError(f"dimension mismatch: signals live on {batch.n} nodes, GSO has {n}")


def objective_eval(s, h, s_bar, batch, cfg, gamma):
    """Value of the relaxed joint objective at ``(S, H)``."""
    s = _matrix(s, "S")
    h = _matrix(h, "H")
    sb = _matrix(s_bar, "S_bar")
    check_same_shape(s, h, ("S", "H"))
    check_same_shape(s, sb, ("S", "S_bar"))
    _check_batch(batch, s.shape[0])
    fit = np.linalg.norm(batch.y - h @ batch.x) ** 2
    comm = np.linalg.norm(s @ h - h @ s) ** 2
    return float(
        fit + cfg.lambda_ * np.abs(s - sb).sum() + cfg.beta * np.abs(s).sum() + gamma * comm
    )


def default_ridge(x):
    """``1e-8 * trace(X X^T kron I) / n^2``."""
    x = np.asarray(x, dtype=float)
    return 1e-8 * float((x**2).sum()) / x.shape[0]


def _cholesky(system, ridge):
    a = system.copy()
    a[np.diag_indices_from(a)] += ridge
    try:
        factor = scipy.linalg.cho_factor(a, lower=False, check_finite=False)
    except np.linalg.LinAlgError:
        return None, 0.0
    anorm = np.abs(a).sum(axis=0).max()
    rcond, _ = scipy.linalg.lapack.dpocon(factor[0], anorm)
    return factor, rcond


def filter_id_step(s_hat, batch, gamma, ridge=None):
    """Closed-form minimizer of ``||Y - H X||^2 + gamma ||S H - H S||^2``.

    Solves the ``n^2 x n^2`` normal equations

        (X X^T kron I + gamma (S S^T kron I + I kron S^T S
         - S^T kron S^T - S kron S) + ridge I) vec(H) = vec(Y X^T)

    with column-major ``vec``. With ``ridge=None`` the system is solved
    unregularized when it is well conditioned and with
    :func:`default_ridge` otherwise.
    """
    s = _matrix(s_hat, "S_hat")
    n = s.shape[0]
    _check_batch(batch, n)
    gamma = check_nonnegative(gamma, "gamma")
    x, y = batch.x, batch.y

    eye = np.eye(n)
    system = np.kron(x @ x.T, eye)
    if gamma > 0:
        comm = np.kron(s @ s.T, eye) + np.kron(eye, s.T @ s) - np.kron(s.T, s.T) - np.kron(s, s)
        system += gamma * comm
    rhs = (y @ x.T).ravel(order="F")

    if ridge is None:
        factor, rcond = _cholesky(system, 0.0)
        if factor is None or rcond < _RCOND_AUTO:
            ridge = default_ridge(x)
            factor, rcond = _cholesky(system, ridge)
        else:
            ridge = 0.0
    else:
        ridge = check_nonnegative(ridge, "ridge")
        factor, rcond = _cholesky(system, ridge)
    if factor is None or rcond < _RCOND_MIN:
        hint = " use a positive ridge" if ridge == 0 else " increase the ridge"
        raise SingularityError(
            f"filter-identification system is singular (n={n}, m={batch.m}, gamma={gamma});{hint}"
        )
    vec_h = scipy.linalg.cho_solve(factor, rhs, check_finite=False)
    return GraphFilter(vec_h.reshape((n, n), order="F"))


def filter_id_gradient(h, s_hat, batch, gamma):
    """Gradient in ``H`` of ``||Y - H X||^2 + gamma ||S H - H S||^2``."""
    h = np.asarray(h, dtype=float)
    s = np.asarray(s_hat, dtype=float)
    x, y = batch.x, batch.y
    comm = s @ h - h @ s
    return 2.0 * ((h @ x - y) @ x.T + gamma * (s.T @ comm - comm @ s.T))


def _prox_pair(v, step, lam, beta, anchor):
    lo = np.minimum(anchor, 0.0)
    hi = np.maximum(anchor, 0.0)
    total = step * (lam + beta)
    left = v + total
    right = v - total
    # slope of the nonsmooth part strictly between 0 and the anchor
    mid = np.clip(v - step * (beta - lam) * np.sign(anchor), lo, hi)
    return np.where(left < lo, left, np.where(right > hi, right, mid))


def prox_double_l1(v, step, lam, beta, anchor):
    """Elementwise ``argmin_s lam|s - anchor| + beta|s| + (s - v)^2 / (2 step)``.

    The objective is convex and piecewise quadratic with breakpoints at 0 and
    ``anchor``. If the stationary point of the left (right) outer piece lies
    inside that piece it is the minimizer; otherwise the minimizer is the
    stationary point of the middle piece clipped to ``[min(0, anchor),
    max(0, anchor)]``. Accepts scalars or broadcastable arrays.
    """
    step = check_positive(step, "step")
    lam = check_nonnegative(lam, "lambda")
    beta = check_nonnegative(beta, "beta")
    v, anchor = np.broadcast_arrays(np.asarray(v, dtype=float), np.asarray(anchor, dtype=float))
    out = _prox_pair(v, step, lam, beta, anchor)
    return out if out.ndim else float(out)


def _smooth_terms(h_hat, gamma, cfg, cov_y, cov_x):
    terms = []
    if gamma > 0:
        terms.append((gamma, h_hat))
    if cov_y is not None and cfg.stationarity_weight_y > 0:
        terms.append((cfg.stationarity_weight_y, _unit_frobenius(cov_y)))
    if cov_x is not None and cfg.stationarity_weight_x > 0:
        terms.append((cfg.stationarity_weight_x, _unit_frobenius(cov_x)))
    return terms


def _smooth_value(s, terms):
    return sum(w * np.linalg.norm(s @ a - a @ s) ** 2 for w, a in terms)


def _smooth_grad(s, terms):
    g = np.zeros_like(s)
    for w, a in terms:
        c = s @ a - a @ s
        g += 2.0 * w * (c @ a.T - a.T @ c)
    return g


def _lipschitz(terms, n, cset, iters=100, rtol=1e-4):
    """Largest eigenvalue of the Hessian of the smooth terms on the admissible subspace."""
    if not terms:
        return 0.0
    # deterministic start with no special symmetry
    v = np.cos(np.arange(n * n, dtype=float).reshape(n, n) * 1.3 + 0.7)
    cset_lin = GsoConstraintSet(symmetric=cset.symmetric, zero_diagonal=cset.zero_diagonal)
    v = project_onto_constraints(v, cset_lin)
    est = 0.0
    for _ in range(iters):
        norm = np.linalg.norm(v)
        if norm == 0:
            return 0.0
        v = v / norm
        w = project_onto_constraints(_smooth_grad(v, terms), cset_lin)
        new = float(np.vdot(v, w))
        v = w
        if abs(new - est) <= rtol * max(abs(new), 1e-300):
            est = new
            break
        est = new
    return est


def _project(m, cset, symmetrize=True):
    """Unchecked :func:`project_onto_constraints` for inner loops."""
    out = (m + m.T) / 2.0 if cset.symmetric and symmetrize else m.copy()
    if cset.zero_diagonal:
        np.fill_diagonal(out, 0.0)
    if cset.nonnegative or cset.entry_upper_bound is not None:
        out = np.clip(out, 0.0 if cset.nonnegative else None, cset.entry_upper_bound)
    return out


def _prox_feasible(v, step, cfg, anchor, cset):
    """Exact prox of the two l1 terms plus the indicator of ``cset``.

    For symmetric sets with a symmetric anchor, each mirrored pair sees the
    same separable objective around the pair average, so symmetrizing first
    and clipping last is exact.
    """
    if cset.symmetric:
        v = (v + v.T) / 2.0
    out = _prox_pair(v, step, cfg.lambda_, cfg.beta, anchor)
    return _project(out, cset, symmetrize=False)


def denoise_objective(s, h_hat, s_bar, cfg, gamma, cov_y=None, cov_x=None):
    """Objective minimized by :func:`graph_denoise_step`."""
    s = np.asarray(s, dtype=float)
    sb = np.asarray(s_bar, dtype=float)
    terms = _smooth_terms(np.asarray(h_hat, dtype=float), gamma, cfg, cov_y, cov_x)
    return float(
        cfg.lambda_ * np.abs(s - sb).sum() + cfg.beta * np.abs(s).sum() + _smooth_value(s, terms)
    )


def graph_denoise_step(
    h_hat, s_bar, cset, cfg, gamma, cov_y=None, cov_x=None, s_init=None
):
    """Sparse graph denoising given a filter estimate.

    Minimizes ``lam ||S - S_bar||_1 + beta ||S||_1 + gamma ||S H - H S||^2``
    (plus covariance-commutation penalties when covariances are given) over
    ``cset`` with monotone FISTA, warm-started at ``s_init`` (default
    ``S_bar``).
    """
    sb = _matrix(s_bar, "S_bar")
    n = sb.shape[0]
    h = _matrix(h_hat, "H_hat")
    check_same_shape(h, sb, ("H_hat", "S_bar"))
    gamma = check_nonnegative(gamma, "gamma")
    if not isinstance(cset, GsoConstraintSet):
        raise ParameterError("cset must be a GsoConstraintSet")
    covs = []
    for c, name in ((cov_y, "cov_y"), (cov_x, "cov_x")):
        if c is not None:
            c = _matrix(c, name)
            check_same_shape(c, sb, (name, "S_bar"))
        covs.append(c)
    cov_y, cov_x = covs

    terms = _smooth_terms(h, gamma, cfg, cov_y, cov_x)
    anchor = (sb + sb.T) / 2.0 if cset.symmetric else sb
    if cfg.inner.step_size is not None:
        step = cfg.inner.step_size
    else:
        lip = _lipschitz(terms, n, cset)
        step = 1.0 / lip if lip > 0 else 1.0

    def total(s):
        return (
            cfg.lambda_ * np.abs(s - sb).sum() + cfg.beta * np.abs(s).sum() + _smooth_value(s, terms)
        )

    s = project_onto_constraints(sb if s_init is None else _matrix(s_init, "s_init"), cset)
    f_s = total(s)
    z = s
    t = 1.0
    converged = False
    it = 0
    for it in range(1, cfg.inner.max_iters + 1):
        cand = _prox_feasible(z - step * _smooth_grad(z, terms), step, cfg, anchor, cset)
        f_cand = total(cand)
        t_next = (1.0 + np.sqrt(1.0 + 4.0 * t * t)) / 2.0
        if f_cand <= f_s:
            s_next, f_next = cand, f_cand
        else:
            s_next, f_next = s, f_s
        z = s_next + (t / t_next) * (cand - s_next) + ((t - 1.0) / t_next) * (s_next - s)
        change = np.linalg.norm(cand - s) / max(np.linalg.norm(s), 1.0)
        s, f_s, t = s_next, f_next, t_next
        if change < cfg.inner.tol:
            converged = True
            break
    if not converged:
        warnings.warn(
            f"graph denoising did not converge in {cfg.inner.max_iters} iterations",
            ConvergenceWarning,
            stacklevel=2,
        )
    return DenoiseResult(gso_from_estimate(s, cset), converged, it, float(f_s))


def fi_baseline(s_bar, batch, gamma=1e3, ridge=None):
    """Filter identification that trusts the observed GSO."""
    return filter_id_step(s_bar, batch, gamma, ridge)


def rfi_iter(s_bar, batch, cset, cfg):
    """Alternate filter identification and graph denoising from ``S_hat = S_bar``.

    ``gamma`` follows ``cfg.gamma_schedule``; the loop stops once gamma has
    reached its cap and the relative objective change of an outer iteration
    drops below ``cfg.outer_tol``.
    """
    sb = _matrix(s_bar, "S_bar")
    _check_batch(batch, sb.shape[0])
    s = project_onto_constraints(sb, cset)
    trajectory = []
    converged = False
    inner_ok = True
    h = None
    for it in range(cfg.max_outer_iters):
        gamma = cfg.gamma_schedule.value(it)
        h = filter_id_step(s, batch, gamma, cfg.ridge)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            res = graph_denoise_step(h, sb, cset, cfg, gamma, s_init=s)
        inner_ok &= res.converged
        s = np.asarray(res.s_hat)
        trajectory.append(objective_eval(s, h, sb, batch, cfg, gamma))
        logger.debug("rfi_iter %d gamma=%g objective=%.6g", it, gamma, trajectory[-1])
        if it > 0 and cfg.gamma_schedule.value(it - 1) == gamma:
            prev = trajectory[-2]
            if abs(prev - trajectory[-1]) <= cfg.outer_tol * max(abs(prev), 1e-300):
                converged = True
                break
    if not converged:
        warnings.warn("rfi_iter reached max_outer_iters", ConvergenceWarning, stacklevel=2)
    return RfiResult(
        s_hat=gso_from_estimate(s, cset),
        h_hat=h,
        objective_trajectory=tuple(trajectory),
        outer_iters=len(trajectory),
        converged=converged and inner_ok,
        method="rfi_iter",
    )


def rfi_d(s_bar, batch, cset, cfg, cov_y, cov_x=None):
    """Denoise the GSO using covariance stationarity, then identify a filter
    that commutes with the denoised GSO."""
    sb = _matrix(s_bar, "S_bar")
    _check_batch(batch, sb.shape[0])
    if cov_y is None:
        raise ParameterError("rfi_d needs an output covariance")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        res = graph_denoise_step(np.zeros_like(sb), sb, cset, cfg, 0.0, cov_y=cov_y, cov_x=cov_x)
    gamma = cfg.gamma_schedule.cap
    s = np.asarray(res.s_hat)
    h = filter_id_step(s, batch, gamma, cfg.ridge)
    obj = objective_eval(s, h, sb, batch, cfg, gamma)
    return RfiResult(res.s_hat, h, (obj,), 1, res.converged, method="rfi_d")


def rfi_r(s_bar, batch, cset, cfg, cov_y):
    """Replace the GSO by the output covariance in both commutation terms.

    The problem becomes separable: the filter commutes with ``C_Y`` and the
    GSO is denoised against ``C_Y``. Both use ``gamma`` at the schedule cap.
    """
    sb = _matrix(s_bar, "S_bar")
    _check_batch(batch, sb.shape[0])
    if cov_y is None:
        raise ParameterError("rfi_r needs an output covariance")
    c = _unit_frobenius(_matrix(cov_y, "cov_y"))
    gamma = cfg.gamma_schedule.cap
    h = filter_id_step(c, batch, gamma, cfg.ridge)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        res = graph_denoise_step(c, sb, cset, cfg, gamma)
    s = np.asarray(res.s_hat)
    obj = objective_eval(s, h, sb, batch, cfg, gamma)
    return RfiResult(res.s_hat, h, (obj,), 1, res.converged, method="rfi_r")


def _soft_threshold(v, thresh):
    return np.sign(v) * np.maximum(np.abs(v) - thresh, 0.0)


def tls_sem_alpha_max(s_bar, batch, fit_weight=1.0):
    """Smallest sparsity weight for which ``Delta = 0`` solves the first
    perturbation update of :func:`tls_sem_baseline` (started at ``Y_c = Y``)."""
    sb = _matrix(s_bar, "S_bar")
    _check_batch(batch, sb.shape[0])
    resid = (np.eye(sb.shape[0]) - sb) @ batch.y - batch.x
    grad = 2.0 * fit_weight * resid @ batch.y.T
    np.fill_diagonal(grad, 0.0)
    return float(np.abs(grad).max())


def tls_sem_baseline(s_bar, batch, alpha=1.0, max_iters=100, tol=1e-5, fit_weight=1.0,
                     inner_iters=2000, inner_tol=1e-7):
    """Total-least-squares SEM baseline.

    Alternates between cleaned endogenous signals ``Y_c`` and a sparse
    perturbation ``Delta`` (zero diagonal) for the model
    ``(I - S_bar + Delta) Y_c = X``:

        min  ||Y - Y_c||^2 + fit_weight ||(I - S_bar + Delta) Y_c - X||^2
             + alpha ||Delta||_1

    The estimate is ``S_hat = S_bar - Delta`` with filter ``(I - S_hat)^{-1}``.
    """
    sb = _matrix(s_bar, "S_bar")
    n = sb.shape[0]
    _check_batch(batch, n)
    alpha = check_nonnegative(alpha, "alpha")
    mu = check_positive(fit_weight, "fit_weight")
    max_iters = check_int(max_iters, "max_iters", 1)
    tol = check_positive(tol, "tol")
    x, y = batch.x, batch.y
    eye = np.eye(n)
    offdiag = ~np.eye(n, dtype=bool)
    base = eye - sb

    def objective(delta, yc):
        resid = (base + delta) @ yc - x
        return float(
            np.linalg.norm(y - yc) ** 2 + mu * np.linalg.norm(resid) ** 2
            + alpha * np.abs(delta).sum()
        )

    delta = np.zeros((n, n))
    yc = y.copy()
    trajectory = []
    converged = False
    for it in range(max_iters):
        b = base + delta
        yc = np.linalg.solve(eye + mu * b.T @ b, y + mu * b.T @ x)

        gram = yc @ yc.T
        step = 1.0 / (2.0 * mu * np.linalg.eigvalsh(gram).max() + 1e-300)
        target = (x - base @ yc) @ yc.T
        d, z, t = delta, delta, 1.0
        for _ in range(inner_iters):
            grad = 2.0 * mu * (z @ gram - target)
            d_next = _soft_threshold(z - step * grad, step * alpha) * offdiag
            t_next = (1.0 + np.sqrt(1.0 + 4.0 * t * t)) / 2.0
            z = d_next + ((t - 1.0) / t_next) * (d_next - d)
            small = np.linalg.norm(d_next - d) <= inner_tol * max(np.linalg.norm(d), 1.0)
            d, t = d_next, t_next
            if small:
                break
        change = np.linalg.norm(d - delta) / max(np.linalg.norm(delta), 1.0)
        delta = d
        trajectory.append(objective(delta, yc))
        if change < tol:
            converged = True
            break

    s_hat = sb - delta
    a = eye - s_hat
    smin = np.linalg.svd(a, compute_uv=False).min()
    if smin <= 1e-10:
        raise SingularityError(f"I - S_hat is singular (smallest singular value {smin:.3e})")
    h_hat = np.linalg.solve(a, eye)
    if not converged:
        warnings.warn("tls_sem_baseline reached max_iters", ConvergenceWarning, stacklevel=2)
    directed = not np.array_equal(s_hat, s_hat.T)
    return RfiResult(
        Gso(s_hat, kind="adjacency", directed=directed, weighted=True),
        GraphFilter(h_hat, model="sem"),
        tuple(trajectory),
        len(trajectory),
        converged,
        method="tls_sem",
    )


def with_gamma(cfg, gamma):
    """Copy of ``cfg`` with the schedule pinned at ``gamma``."""
    return replace(cfg, gamma_schedule=GammaSchedule.fixed(gamma))
