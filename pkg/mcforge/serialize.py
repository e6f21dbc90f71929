"""CSV and key=value summary files.

Floats are written with repr so that every value parses back to the same
float. Lines end in a bare newline and nothing depends on the locale.
"""
import csv
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np

from .abc import AbcResult
from .errors import ErrorShape
from .mcmc_kernels import Trace

PathLike = Union[str, Path]


def format_value(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (list, tuple, np.ndarray)):
        return ",".join(format_value(v) for v in value)
    if value is None:
        return "none"
    return str(value)


def write_table(path: PathLike, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(v) for v in row])
    return path


def read_table(path: PathLike) -> Tuple[List[str], np.ndarray]:
    """header and an (n, columns) float array"""
    with Path(path).open("r", newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    values = np.array(rows, dtype=np.float64).reshape(len(rows), len(header))
    return header, values


def trace_header(dim: int, divergent: bool = False) -> List[str]:
    header = ["step", "accepted"] + ["x{}".format(i + 1) for i in range(dim)]
    if divergent:
        header.append("divergent")
    return header


def write_trace(path: PathLike, trace: Trace, divergent: bool = False) -> Path:
    """one row per step: step,accepted,x1..xd[,divergent]"""
    flags = trace.divergent if trace.divergent is not None else np.zeros_like(trace.accept_flags)

    def rows():
        for t, (state, accepted) in enumerate(zip(trace.states, trace.accept_flags)):
            row = [t, bool(accepted)] + [float(v) for v in state]
            if divergent:
                row.append(bool(flags[t]))
            yield row

    return write_table(path, trace_header(trace.dim, divergent), rows())


def read_trace(path: PathLike) -> Trace:
    header, values = read_table(path)
    if header[:2] != ["step", "accepted"]:
        raise ErrorShape("{} is not a trace file".format(path))
    has_divergent = header[-1] == "divergent"
    stop = len(header) - 1 if has_divergent else len(header)
    return Trace(
        states=values[:, 2:stop],
        accept_flags=values[:, 1].astype(bool),
        seed=(None, None),
        kernel_label="",
        divergent=values[:, -1].astype(bool) if has_divergent else None,
    )


def write_abc_result(path: PathLike, result: AbcResult) -> Path:
    """theta1..thetak,distance"""
    k = result.accepted_thetas.shape[1]
    header = ["theta{}".format(i + 1) for i in range(k)] + ["distance"]
    rows = (
        [float(v) for v in theta] + [float(d)]
        for theta, d in zip(result.accepted_thetas, result.distances)
    )
    return write_table(path, header, rows)


def abc_summary(result: AbcResult) -> List[Tuple[str, object]]:
    return [
        ("epsilon_used", result.epsilon_used),
        ("acceptance_rate", result.acceptance_rate),
        ("n_simulated", result.n_simulated),
        ("n_accepted", int(result.accepted_thetas.shape[0])),
    ]


def write_summary(path: PathLike, pairs: Iterable[Tuple[str, object]]) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as f:
        for key, value in pairs:
            f.write("{}={}\n".format(key, format_value(value)))
    return path


def read_summary(path: PathLike) -> Dict[str, str]:
    summary = {}
    with Path(path).open("r", encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line:
                continue
            key, _, value = line.partition("=")
            summary[key] = value
    return summary
