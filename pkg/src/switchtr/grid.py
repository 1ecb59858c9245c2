"""Piecewise constant controls on a uniform time grid.

Controls are stored as ``(N, N_T)`` arrays: row ``i`` is control component
``i`` and column ``j`` (0-based) holds the value on the cell
``[t0 + j*tau, t0 + (j+1)*tau)``.  Sign patterns are extended by zero on
both sides, so switching on at ``t0`` or being active at ``T`` counts as a
jump.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .pricing import PricingFunction, eval_g

__all__ = [
    "TimeGrid",
    "ControlGrid",
    "Jump",
    "snap_admissible",
    "is_admissible",
    "sign_pattern",
    "total_variation",
    "jump_set",
    "pattern_from_jumps",
    "minimal_gap",
    "masked_sq_norm",
    "sign_l1_distance",
    "running_cost_G",
]

SNAP_TOL = 1e-12


@dataclass(frozen=True)
class TimeGrid:
    t0: float
    T: float
    n_steps: int

    def __post_init__(self) -> None:
        if not self.T > self.t0:
            raise ValueError(f"need T > t0, got t0={self.t0}, T={self.T}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps}")

    @property
    def tau(self) -> float:
        return (self.T - self.t0) / self.n_steps

    @property
    def nodes(self) -> np.ndarray:
        """Times ``t_0, ..., t_{N_T}``."""
        return self.t0 + self.tau * np.arange(self.n_steps + 1)

    @property
    def cell_starts(self) -> np.ndarray:
        return self.nodes[:-1]

    @property
    def cell_mids(self) -> np.ndarray:
        return self.nodes[:-1] + 0.5 * self.tau

    def boundary_time(self, j: int) -> float:
        return self.t0 + j * self.tau


@dataclass(frozen=True, eq=False)
class ControlGrid:
    """Control values on a time grid; ``values`` has shape ``(N, N_T)``."""

    grid: TimeGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        vals = np.array(self.values, dtype=float, ndmin=2)
        if vals.ndim != 2 or vals.shape[1] != self.grid.n_steps:
            raise ValueError(f"values must have shape (N, {self.grid.n_steps}), got {vals.shape}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def zeros(cls, grid: TimeGrid, n_controls: int) -> "ControlGrid":
        return cls(grid, np.zeros((n_controls, grid.n_steps)))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def n_controls(self) -> int:
        return self.values.shape[0]

    def with_values(self, values: np.ndarray) -> "ControlGrid":
        return ControlGrid(self.grid, values)

    def check(self, pricing: Sequence[PricingFunction]) -> None:
        """Raise ``ValueError`` unless every entry lies in ``{0} u [a_i, b_i]``."""
        if len(pricing) != self.n_controls:
            raise ValueError(f"{len(pricing)} pricing functions for {self.n_controls} controls")
        if not is_admissible(self.values, pricing):
            raise ValueError("control has entries outside {0} u [a_i, b_i]")


@dataclass(frozen=True)
class Jump:
    component: int
    index: int  # boundary j in 0..N_T, between cells j and j+1 (1-based)
    time: float
    on: bool


def snap_admissible(values: np.ndarray, pricing: Sequence[PricingFunction],
                    tol: float = SNAP_TOL) -> np.ndarray:
    """Remove float noise: snap entries within ``tol`` of 0, ``a_i`` or ``b_i``."""
    out = np.array(values, dtype=float, copy=True)
    for i, g in enumerate(pricing):
        row = out[i]
        row[np.abs(row) <= tol] = 0.0
        row[(row < g.a) & (row >= g.a - tol)] = g.a
        row[(row > g.b) & (row <= g.b + tol)] = g.b
    return out


def is_admissible(values: np.ndarray, pricing: Sequence[PricingFunction]) -> bool:
    vals = np.asarray(values)
    for i, g in enumerate(pricing):
        row = vals[i]
        ok = (row == 0.0) | ((row >= g.a) & (row <= g.b))
        if not ok.all():
            return False
    return True


def _values(u) -> np.ndarray:
    return u.values if isinstance(u, ControlGrid) else np.atleast_2d(np.asarray(u, dtype=float))


def sign_pattern(u) -> np.ndarray:
    """Entrywise indicator ``u > 0`` as an ``int8`` array."""
    return (_values(u) > 0.0).astype(np.int8)


def _padded(p: np.ndarray) -> np.ndarray:
    p = np.atleast_2d(np.asarray(p, dtype=np.int8))
    z = np.zeros((p.shape[0], 1), dtype=np.int8)
    return np.concatenate([z, p, z], axis=1)


def total_variation(pattern, per_component: bool = False):
    """Number of on/off transitions including the artificial ones at ``t0`` and ``T``."""
    d = np.abs(np.diff(_padded(pattern).astype(np.int64), axis=1)).sum(axis=1)
    return d if per_component else int(d.sum())


def jump_set(u) -> list[list[Jump]]:
    """Per component, the sorted jumps of the sign pattern (the minimal representation)."""
    if isinstance(u, ControlGrid):
        grid, pattern = u.grid, sign_pattern(u)
    else:
        grid, pattern = u
        pattern = np.atleast_2d(np.asarray(pattern, dtype=np.int8))
    d = np.diff(_padded(pattern).astype(np.int64), axis=1)
    out = []
    for i in range(d.shape[0]):
        idx = np.flatnonzero(d[i])
        out.append([Jump(i, int(j), grid.boundary_time(int(j)), bool(d[i, j] > 0)) for j in idx])
    return out


def pattern_from_jumps(jumps: list[list[Jump]], n_steps: int) -> np.ndarray:
    p = np.zeros((len(jumps), n_steps), dtype=np.int8)
    for i, comp in enumerate(jumps):
        for on, off in zip(comp[::2], comp[1::2]):
            p[i, on.index:off.index] = 1
    return p


def minimal_gap(u, r: float) -> float:
    """``min(r, smallest distance between consecutive jumps of any component)``."""
    if not r > 0:
        raise ValueError("r must be positive")
    best = r
    for comp in jump_set(u):
        for first, second in zip(comp, comp[1:]):
            best = min(best, second.time - first.time)
    return best


def _pair(u, w) -> tuple[np.ndarray, np.ndarray, float]:
    uv, wv = _values(u), _values(w)
    if uv.shape != wv.shape:
        raise ValueError(f"shape mismatch: {uv.shape} vs {wv.shape}")
    tau = u.grid.tau if isinstance(u, ControlGrid) else (w.grid.tau if isinstance(w, ControlGrid) else 1.0)
    return uv, wv, tau


def masked_sq_norm(u, w, tau: float | None = None) -> float:
    """``tau * sum over cells active in both of (u - w)**2``."""
    uv, wv, t = _pair(u, w)
    t = t if tau is None else tau
    mask = (uv > 0.0) & (wv > 0.0)
    return float(t * np.sum(np.where(mask, (uv - wv) ** 2, 0.0)))


def sign_l1_distance(u, w) -> int:
    """Number of cells whose on/off state differs."""
    uv, wv, _ = _pair(u, w)
    return int(np.count_nonzero((uv > 0.0) != (wv > 0.0)))


def running_cost_G(u, pricing: Sequence[PricingFunction], tau: float | None = None) -> float:
    """``tau * sum_ij g_i(u_ij)``; ``inf`` if any entry is inadmissible."""
    vals = _values(u)
    t = u.grid.tau if tau is None else tau
    total = 0.0
    for i, g in enumerate(pricing):
        for x in vals[i]:
            if x != 0.0:
                v = eval_g(g, float(x))
                if math.isinf(v):
                    return math.inf
                total += v
    return float(t * total)
