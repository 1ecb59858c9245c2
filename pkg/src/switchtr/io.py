"""CSV and JSON artifacts.

Floats are written with ``repr`` (shortest round-trip form), so rerunning a
deterministic computation reproduces the files byte for byte.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .grid import ControlGrid, TimeGrid
from .pricing import PricingFunction
from .subproblem import ModelInstance, ValueTables, table_rows
from .trust_region import IterationRecord

__all__ = [
    "ITERATION_COLUMNS",
    "SWEEP_COLUMNS",
    "fmt",
    "write_iterations",
    "write_control",
    "read_control",
    "write_state",
    "write_summary",
    "write_sweep",
    "write_tables",
    "load_instance",
    "save_instance",
]

ITERATION_COLUMNS = ("iter", "J", "pred", "ared", "ratio", "delta", "budget", "flips",
                     "c_prox", "c_switch", "accepted", "ms")
SWEEP_COLUMNS = ("N_T", "budget_max", "iterations", "time", "J", "c_prox", "c_switch")


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_rows(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_iterations(path, records: Sequence[IterationRecord]) -> None:
    _write_rows(path, ITERATION_COLUMNS,
                ([getattr(r, c) for c in ITERATION_COLUMNS] for r in records))


def write_control(path, u: ControlGrid) -> None:
    """One row per cell: the cell's start time and the control values."""
    n = u.n_controls
    header = ["t"] + [f"u{i + 1}" for i in range(n)]
    t = u.grid.cell_starts
    _write_rows(path, header, ([t[j], *u.values[:, j]] for j in range(u.grid.n_steps)))


def read_control(path, grid: TimeGrid) -> ControlGrid:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0] != "t":
        raise ValueError(f"{path}: expected a header starting with 't'")
    data = np.array([[float(x) for x in row] for row in rows[1:]], dtype=float)
    if data.ndim != 2 or data.shape[0] != grid.n_steps:
        raise ValueError(f"{path}: expected {grid.n_steps} rows, got {data.shape[0] if data.ndim else 0}")
    return ControlGrid(grid, data[:, 1:].T)


def write_state(path, grid: TimeGrid, states: np.ndarray, names: Sequence[str]) -> None:
    """Trajectory at the grid nodes; ``states`` has shape ``(n_state, N_T + 1)``."""
    t = grid.nodes
    _write_rows(path, ["t", *names], ([t[j], *states[:, j]] for j in range(len(t))))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def write_summary(path, summary: dict) -> None:
    with Path(path).open("w") as fh:
        json.dump(_jsonable(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_sweep(path, rows: Sequence[dict]) -> None:
    _write_rows(path, SWEEP_COLUMNS, ([r[c] for c in SWEEP_COLUMNS] for r in rows))


def write_tables(path, tables: ValueTables) -> None:
    _write_rows(path, ("l", "alpha", "B", "phi"), table_rows(tables))


def load_instance(path) -> tuple[ModelInstance, int]:
    """Read a subproblem instance; returns the instance and the queried budget.

    The JSON object holds ``tau``, ``u`` and ``grad`` (lists of rows, one
    per control), ``delta``, ``budget``, ``sigma_sgn`` and ``pricing`` in the
    config format.
    """
    with Path(path).open() as fh:
        data = json.load(fh)
    missing = {"tau", "u", "grad", "delta", "budget", "pricing"} - set(data)
    if missing:
        raise ValueError(f"{path}: missing field(s) {sorted(missing)}")
    u = np.array(data["u"], dtype=float, ndmin=2)
    n_t = u.shape[1]
    tau = float(data["tau"])
    grid = TimeGrid(0.0, tau * n_t, n_t)
    pricing = tuple(PricingFunction.from_config(p) for p in data["pricing"])
    budget = int(data["budget"])
    uc = ControlGrid(grid, u)
    uc.check(pricing)
    inst = ModelInstance(uc, np.array(data["grad"], dtype=float, ndmin=2), float(data["delta"]),
                         pricing, float(data.get("sigma_sgn", 1.0)), budget)
    return inst, budget


def save_instance(path, inst: ModelInstance, budget: int) -> None:
    data = {
        "tau": inst.tau,
        "u": inst.u.values.tolist(),
        "grad": np.asarray(inst.grad).tolist(),
        "delta": inst.delta,
        "budget": int(budget),
        "sigma_sgn": inst.sigma_sgn,
        "pricing": [g.to_config() for g in inst.pricing],
    }
    with Path(path).open("w") as fh:
        json.dump(data, fh, indent=1)
        fh.write("\n")
