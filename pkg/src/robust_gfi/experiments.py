"""Monte-Carlo harness for the three benchmark scenarios.

* test case 1: ER graphs, median filter error vs. observation-noise power
* test case 2: karate graph, filter and graph error vs. number of signals
* test case 3: ER graphs, filter error vs. link-perturbation probability for
  filter-generated ("H") and SEM-generated ("SEM") data
"""

import csv
import logging
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
from sklearn.exceptions import ConvergenceWarning

from ._validation import ParameterError, check_int, check_probability
from .filters import (
    Covariance,
    SignalBatch,
    add_awgn,
    build_filter,
    generate_white_inputs,
    random_coeffs,
    sample_covariance,
    sem_filter,
)
from .graph import (
    GsoConstraintSet,
    PerturbationSpec,
    generate_er,
    graph_l1_error,
    load_karate,
    perturb_links,
)
from .solvers import (
    RfiConfig,
    fi_baseline,
    rfi_d,
    rfi_iter,
    rfi_r,
    tls_sem_alpha_max,
    tls_sem_baseline,
)

logger = logging.getLogger(__name__)

ALGORITHMS = ("FI", "RFI_ITER", "RFI_D_EXACT", "RFI_D_SAMPLE", "RFI_R", "TLS_SEM")
TEST_CASES = ("tc1", "tc2", "tc3", "custom")
SWEEP_PARAM = {"tc1": "noise_power", "tc2": "m", "tc3": "p_pert", "custom": "noise_power"}
CSV_HEADER = (
    "algorithm",
    "sweep_param",
    "sweep_value",
    "median_filter_error",
    "median_graph_error",
    "trials",
    "failures",
)

_DEFAULTS = {
    "tc1": dict(
        m=10,
        noise_power=(0.0, 0.025, 0.05, 0.1, 0.2),
        algorithms=("FI", "RFI_ITER", "RFI_D_EXACT", "RFI_D_SAMPLE"),
    ),
    "tc2": dict(
        m=(10, 25, 50, 100, 200),
        noise_power=0.1,
        algorithms=("FI", "RFI_ITER", "RFI_D_SAMPLE", "RFI_R"),
    ),
    "tc3": dict(
        m=200,
        noise_power=0.1,
        p_pert=(0.05, 0.1, 0.15, 0.2, 0.3),
        algorithms=("RFI_D_SAMPLE", "RFI_R", "TLS_SEM"),
    ),
    "custom": dict(),
}


def _as_tuple(v):
    return tuple(v) if isinstance(v, (list, tuple)) else (v,)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce a sweep.

    ``m``, ``noise_power`` and ``p_pert`` may be scalars or sweep lists; the
    test case decides which one is swept. ``p_pert``, when set, overrides the
    perturbation probabilities of ``perturbation``.
    """

    test_case: str = "tc1"
    n_graphs: int = 100
    n: int = 20
    p: float = 0.25
    perturbation: PerturbationSpec = field(default_factory=PerturbationSpec)
    m: object = 10
    k: int = 4
    noise_power: object = 0.1
    p_pert: object = None
    algorithms: tuple = ("FI", "RFI_ITER", "RFI_D_EXACT", "RFI_D_SAMPLE")
    regimes: tuple = ("H", "SEM")
    solver: RfiConfig = field(default_factory=RfiConfig)
    constraints: GsoConstraintSet = field(default_factory=GsoConstraintSet)
    tls_alpha: float = 0.1
    tls_fit_weight: float = 1.0
    sem_radius: float = 0.5
    normalize_outputs: bool = True
    trial_timeout: float = 60.0
    seed: int = 0

    def __post_init__(self):
        if self.test_case not in TEST_CASES:
            raise ParameterError(f"test_case must be one of {TEST_CASES}, got {self.test_case!r}")
        check_int(self.n_graphs, "n_graphs", 1)
        check_int(self.n, "n", 2)
        check_probability(self.p, "p")
        check_int(self.k, "k", 0)
        check_int(self.seed, "seed", 0)
        if self.seed >= 2**64:
            raise ParameterError("seed must fit in 64 bits")
        algs = tuple(self.algorithms)
        bad = [a for a in algs if a not in ALGORITHMS]
        if bad or not algs:
            raise ParameterError(f"algorithms must be a non-empty subset of {ALGORITHMS}, got {bad}")
        object.__setattr__(self, "algorithms", algs)
        object.__setattr__(self, "regimes", tuple(self.regimes))
        if any(r not in ("H", "SEM") for r in self.regimes) or not self.regimes:
            raise ParameterError("regimes must be a non-empty subset of ('H', 'SEM')")
        for name in ("m", "noise_power", "p_pert"):
            v = getattr(self, name)
            if v is None:
                continue
            vals = _as_tuple(v)
            if not vals:
                raise ParameterError(f"{name} sweep list must be non-empty")
            if any(b <= a for a, b in zip(vals, vals[1:])):
                raise ParameterError(f"{name} sweep list must be strictly increasing")
            if name == "m":
                for x in vals:
                    check_int(x, "m", 1)
            if name == "p_pert":
                for x in vals:
                    check_probability(x, "p_pert")
            if name == "noise_power" and any(x < 0 for x in vals):
                raise ParameterError("noise_power must be non-negative")
            object.__setattr__(self, name, vals if isinstance(v, (list, tuple)) else v)

    @property
    def sweep_param(self):
        return SWEEP_PARAM[self.test_case]

    @property
    def sweep_values(self):
        v = getattr(self, self.sweep_param)
        if v is None:
            v = self.perturbation.p_create
        return _as_tuple(v)

    def point(self, sweep_value):
        """Scalar (m, noise_power, perturbation) for one sweep point."""
        values = {
            "m": _as_tuple(self.m)[0],
            "noise_power": _as_tuple(self.noise_power)[0],
            "p_pert": None if self.p_pert is None else _as_tuple(self.p_pert)[0],
        }
        values[self.sweep_param] = sweep_value
        pert = self.perturbation
        if values["p_pert"] is not None:
            pert = replace(pert, p_create=values["p_pert"], p_destroy=values["p_pert"])
        return int(values["m"]), float(values["noise_power"]), pert

    def to_dict(self):
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, RfiConfig):
                v = v.to_dict()
            elif isinstance(v, (PerturbationSpec, GsoConstraintSet)):
                v = {g.name: getattr(v, g.name) for g in fields(v)}
                v = {k: list(x) if isinstance(x, tuple) else x for k, x in v.items()}
            elif isinstance(v, tuple):
                v = list(v)
            out[f.name] = v
        return out

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ParameterError(f"unknown experiment config keys: {sorted(unknown)}")
        if isinstance(d.get("solver"), dict):
            d["solver"] = RfiConfig.from_dict(d["solver"])
        if isinstance(d.get("perturbation"), dict):
            pert = dict(d["perturbation"])
            if "weight_interval" in pert:
                pert["weight_interval"] = tuple(pert["weight_interval"])
            d["perturbation"] = PerturbationSpec(**pert)
        if isinstance(d.get("constraints"), dict):
            d["constraints"] = GsoConstraintSet(**d["constraints"])
        for name in ("algorithms", "regimes"):
            if isinstance(d.get(name), list):
                d[name] = tuple(d[name])
        return cls(**d)


def default_config(test_case, **overrides):
    """Configuration reproducing one of the benchmark scenarios."""
    if test_case not in TEST_CASES:
        raise ParameterError(f"test_case must be one of {TEST_CASES}, got {test_case!r}")
    params = dict(_DEFAULTS[test_case])
    params.update(overrides)
    return ExperimentConfig(test_case=test_case, **params)


@dataclass(frozen=True)
class MetricRecord:
    """Median errors of one algorithm at one sweep point."""

    algorithm: str
    sweep_param: str
    sweep_value: float
    median_filter_error: float
    median_graph_error: float
    trials: int
    failures: int = 0


def trial_rng(seed, sweep_index, trial_index):
    """Independent generator for one trial, stable under changes of ``n_graphs``."""
    return np.random.default_rng(np.random.SeedSequence([seed, sweep_index, trial_index]))


def _filter_error(h_hat, h):
    h = np.asarray(h)
    return float(np.linalg.norm(np.asarray(h_hat) - h) / np.linalg.norm(h))


def _scaled(batch, normalize):
    """Rescale outputs so the implied filter has unit Frobenius norm."""
    if not normalize:
        return batch, 1.0
    scale = float(np.linalg.norm(batch.y) / np.sqrt(batch.m))
    if scale == 0:
        return batch, 1.0
    return SignalBatch(batch.x, batch.y / scale, batch.noise_power), scale


def sem_coupling(s_bar, radius):
    """Scale ``a`` giving ``a * S_bar`` spectral radius ``radius``."""
    rho = float(np.abs(np.linalg.eigvals(np.asarray(s_bar))).max())
    return radius / rho if rho > 0 else radius


def _run_algorithm(alg, cfg, s_bar, batch, h_true):
    """Return ``(S_hat, H_hat)`` for one algorithm."""
    solver = cfg.solver
    cset = cfg.constraints
    if alg == "TLS_SEM":
        # the SEM model works on the coupling-scaled graph
        a = sem_coupling(s_bar, cfg.sem_radius)
        sb = a * np.asarray(s_bar)
        alpha = cfg.tls_alpha * tls_sem_alpha_max(sb, batch, cfg.tls_fit_weight)
        res = tls_sem_baseline(sb, batch, alpha=alpha, fit_weight=cfg.tls_fit_weight)
        return np.asarray(res.s_hat) / a, res.h_hat
    if alg == "FI":
        return s_bar, fi_baseline(s_bar, batch, solver.gamma_schedule.cap, solver.ridge)
    scaled, scale = _scaled(batch, cfg.normalize_outputs)
    if alg == "RFI_ITER":
        res = rfi_iter(s_bar, scaled, cset, solver)
    elif alg == "RFI_D_EXACT":
        h = np.asarray(h_true)
        res = rfi_d(s_bar, scaled, cset, solver, Covariance(h @ h.T))
    elif alg == "RFI_D_SAMPLE":
        res = rfi_d(s_bar, scaled, cset, solver, sample_covariance(scaled.y))
    elif alg == "RFI_R":
        res = rfi_r(s_bar, scaled, cset, solver, sample_covariance(scaled.y))
    else:  # pragma: no cover - guarded by ExperimentConfig
        raise ParameterError(f"unknown algorithm {alg!r}")
    return res.s_hat, scale * np.asarray(res.h_hat)


@dataclass(frozen=True)
class TrialOutcome:
    """Per-label ``(filter_error, graph_error)`` and per-label failure messages."""

    trial_index: int
    errors: dict
    failures: dict


def _draw_instance(cfg, rng, base_graph, pert):
    s = base_graph if base_graph is not None else generate_er(cfg.n, cfg.p, rng)
    coeffs = random_coeffs(cfg.k, True, rng)
    s_bar = perturb_links(s, pert, rng)
    return s, coeffs, s_bar


def run_trial(cfg, trial_index, sweep_value, rng):
    """Generate one instance and run every selected algorithm on it.

    Returns a :class:`TrialOutcome` keyed by record label: the algorithm name,
    suffixed with ``-H``/``-SEM`` in test case 3.
    """
    m, noise, pert = cfg.point(sweep_value)
    base = load_karate() if cfg.test_case == "tc2" else None
    s, coeffs, s_bar = _draw_instance(cfg, rng, base, pert)
    x = generate_white_inputs(s.n, m, rng)

    regimes = cfg.regimes if cfg.test_case == "tc3" else ("H",)
    errors, failures = {}, {}
    for regime in regimes:
        label = (lambda a: f"{a}-{regime}") if cfg.test_case == "tc3" else (lambda a: a)
        try:
            if regime == "H":
                h = build_filter(s, coeffs)
            else:
                h = sem_filter(sem_coupling(s_bar, cfg.sem_radius) * np.asarray(s))
        except np.linalg.LinAlgError as exc:
            for alg in cfg.algorithms:
                failures[label(alg)] = f"trial {trial_index}: {exc}"
            continue
        y = add_awgn(h.matrix @ x, noise, rng)
        batch = SignalBatch(x, y, noise)
        for alg in cfg.algorithms:
            start = time.perf_counter()
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", ConvergenceWarning)
                    s_hat, h_hat = _run_algorithm(alg, cfg, s_bar, batch, h)
            except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
                failures[label(alg)] = f"trial {trial_index}: {type(exc).__name__}: {exc}"
                logger.warning("%s failed on trial %d: %s", alg, trial_index, exc)
                continue
            elapsed = time.perf_counter() - start
            if elapsed > cfg.trial_timeout:
                failures[label(alg)] = f"trial {trial_index}: timeout after {elapsed:.1f}s"
                continue
            fe = _filter_error(h_hat, h.matrix)
            ge = graph_l1_error(s_hat, s)
            if not (math.isfinite(fe) and math.isfinite(ge)):
                failures[label(alg)] = f"trial {trial_index}: non-finite error"
                continue
            errors[label(alg)] = (fe, ge)
    return TrialOutcome(trial_index, errors, failures)


def _trial_task(args):
    cfg, sweep_index, trial_index, sweep_value = args
    return run_trial(cfg, trial_index, sweep_value, trial_rng(cfg.seed, sweep_index, trial_index))


def median(values):
    """Median with the mean of the central pair for even-length inputs."""
    vals = sorted(values)
    if not vals:
        return float("nan")
    mid = len(vals) // 2
    if len(vals) % 2:
        return float(vals[mid])
    return float((vals[mid - 1] + vals[mid]) / 2.0)


def _labels(cfg):
    if cfg.test_case == "tc3":
        return [f"{a}-{r}" for r in cfg.regimes for a in cfg.algorithms]
    return list(cfg.algorithms)


def run_sweep(cfg, jobs=1):
    """Run every sweep point of ``cfg`` and aggregate median errors."""
    records = []
    tasks = [
        (cfg, si, ti, v)
        for si, v in enumerate(cfg.sweep_values)
        for ti in range(cfg.n_graphs)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_trial_task, tasks, chunksize=1))
    else:
        outcomes = [_trial_task(t) for t in tasks]
    for si, v in enumerate(cfg.sweep_values):
        chunk = outcomes[si * cfg.n_graphs : (si + 1) * cfg.n_graphs]
        for label in _labels(cfg):
            ok = [o.errors[label] for o in chunk if label in o.errors]
            failed = sum(label in o.failures for o in chunk)
            records.append(
                MetricRecord(
                    algorithm=label,
                    sweep_param=cfg.sweep_param,
                    sweep_value=float(v),
                    median_filter_error=median(e[0] for e in ok),
                    median_graph_error=median(e[1] for e in ok),
                    trials=len(ok),
                    failures=failed,
                )
            )
        logger.info("finished %s=%s", cfg.sweep_param, v)
    return sort_records(records)


def _check_case(cfg, expected):
    if cfg.test_case != expected:
        raise ParameterError(f"expected a {expected} configuration, got {cfg.test_case}")


def run_test_case_1(cfg, jobs=1):
    """Median filter error vs. observation-noise power on ER graphs."""
    _check_case(cfg, "tc1")
    return run_sweep(cfg, jobs)


def run_test_case_2(cfg, jobs=1):
    """Graph and filter error vs. number of signals on the karate graph."""
    _check_case(cfg, "tc2")
    return run_sweep(cfg, jobs)


def run_test_case_3(cfg, jobs=1):
    """Filter error vs. link-perturbation probability, H and SEM data."""
    _check_case(cfg, "tc3")
    return run_sweep(cfg, jobs)


def sort_records(records):
    return sorted(records, key=lambda r: (r.algorithm, r.sweep_value))


def write_csv(records, path):
    """Write records with a fixed header, ordered by algorithm then sweep value."""
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for r in sort_records(records):
                writer.writerow(
                    [
                        r.algorithm,
                        r.sweep_param,
                        repr(float(r.sweep_value)),
                        repr(float(r.median_filter_error)),
                        repr(float(r.median_graph_error)),
                        r.trials,
                        r.failures,
                    ]
                )
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc


def read_csv(path):
    """Parse a file written by :func:`write_csv`."""
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_HEADER:
            raise ParameterError(f"unexpected CSV header in {path}: {header}")
        return [
            MetricRecord(
                algorithm=row[0],
                sweep_param=row[1],
                sweep_value=float(row[2]),
                median_filter_error=float(row[3]),
                median_graph_error=float(row[4]),
                trials=int(row[5]),
                failures=int(row[6]),
            )
            for row in reader
        ]


def write_plot_data(records, directory):
    """One whitespace-separated two-column file per algorithm and error type."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    by_alg = {}
    for r in sort_records(records):
        by_alg.setdefault(r.algorithm, []).append(r)
    for alg, rows in by_alg.items():
        for metric in ("filter", "graph"):
            path = directory / f"{alg}_{metric}.dat"
            attr = f"median_{metric}_error"
            path.write_text("".join(f"{r.sweep_value!r} {getattr(r, attr)!r}\n" for r in rows))
            written.append(path)
    return written
