"""Plain-text formats for matrices, signal batches, configs and results.

Dense matrices are written as a line holding the row count followed by one
whitespace-separated line per row. Configs and result reports are JSON.
"""

import json
from pathlib import Path

import numpy as np

from ._validation import ParameterError
from .filters import SignalBatch
from .graph import Gso
from .solvers import RfiConfig


def _write_block(fh, m):
    m = np.atleast_2d(np.asarray(m, dtype=float))
    fh.write(f"{m.shape[0]}\n")
    for row in m:
        fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def _read_block(lines, pos):
    try:
        n = int(lines[pos].strip())
    except (IndexError, ValueError) as exc:
        raise ParameterError(f"expected a row count on line {pos + 1}") from exc
    rows = lines[pos + 1 : pos + 1 + n]
    if len(rows) != n:
        raise ParameterError(f"expected {n} matrix rows, found {len(rows)}")
    try:
        data = [[float(tok) for tok in row.split()] for row in rows]
    except ValueError as exc:
        raise ParameterError(f"non-numeric matrix entry: {exc}") from exc
    if len({len(r) for r in data}) > 1:
        raise ParameterError("matrix rows have different lengths")
    return np.array(data, dtype=float).reshape(n, -1), pos + 1 + n


def _lines(source):
    if isinstance(source, (str, Path)):
        text = Path(source).read_text()
    else:
        text = source.read()
    return [line for line in text.splitlines() if line.strip()]


def write_matrix(m, target):
    if isinstance(target, (str, Path)):
        with open(target, "w") as fh:
            _write_block(fh, m)
    else:
        _write_block(target, m)


def read_matrix(source):
    m, _ = _read_block(_lines(source), 0)
    return m


def write_gso(s, target):
    write_matrix(np.asarray(s), target)


def read_gso(source, kind="adjacency"):
    """Read a GSO, inferring symmetry and weighting from the entries."""
    return Gso.from_array(read_matrix(source), kind=kind)


def write_signal_batch(batch, target):
    """Inputs block followed by outputs block."""
    if isinstance(target, (str, Path)):
        with open(target, "w") as fh:
            write_signal_batch(batch, fh)
        return
    _write_block(target, batch.x)
    _write_block(target, batch.y)


def read_signal_batch(source, noise_power=0.0):
    lines = _lines(source)
    x, pos = _read_block(lines, 0)
    y, _ = _read_block(lines, pos)
    return SignalBatch(x, y, noise_power)


def load_rfi_config(path):
    """Read an :class:`RfiConfig` from JSON; keys are the config field names."""
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParameterError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ParameterError(f"{path}: expected a JSON object")
    return RfiConfig.from_dict(data)


def save_rfi_config(cfg, path):
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")


def result_to_dict(result):
    return {
        "method": result.method,
        "converged": bool(result.converged),
        "outer_iters": int(result.outer_iters),
        "objective_trajectory": [float(v) for v in result.objective_trajectory],
        "s_hat": np.asarray(result.s_hat).tolist(),
        "h_hat": np.asarray(result.h_hat).tolist(),
    }


def write_result_report(result, path):
    """JSON report of an :class:`~robust_gfi.solvers.RfiResult`."""
    Path(path).write_text(json.dumps(result_to_dict(result), indent=2) + "\n")


def read_result_report(path):
    data = json.loads(Path(path).read_text())
    data["s_hat"] = np.array(data["s_hat"])
    data["h_hat"] = np.array(data["h_hat"])
    return data
