"""Two-part criticality measure on the time grid.

``c_prox`` is the scaled squared prox-gradient residual on the active set,
``c_switch`` scores every jump of the sign pattern by how far the continuation
value ``V = min_w q*w + g(w)`` is from zero, where ``q`` is the gradient next
to the jump.  Negative ``V`` is damped by the distance to the horizon ends.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .grid import ControlGrid, TimeGrid, jump_set
from .pricing import PricingFunction, continuation_min, prox_scalar

__all__ = ["JumpScore", "CriticalityReport", "c_prox", "c_switch", "criticality", "jump_slope"]


@dataclass(frozen=True)
class JumpScore:
    component: int
    time: float
    index: int
    on: bool
    slope: float
    v: float
    V: float
    score: float


@dataclass(frozen=True)
class CriticalityReport:
    c_prox: float
    c_switch: float
    jumps: tuple[JumpScore, ...] = field(default=(), repr=False)

    @property
    def c(self) -> float:
        return max(self.c_prox, self.c_switch)


def c_prox(u: ControlGrid, grad: np.ndarray, pricing: Sequence[PricingFunction], r: float = 1.0) -> float:
    """``1/(2 r^2) * tau * sum over active cells of (u - prox_r(u - r*grad))**2``."""
    if not r > 0:
        raise ValueError("r must be positive")
    uv = u.values
    total = 0.0
    for i, g in enumerate(pricing):
        for j in np.flatnonzero(uv[i] > 0.0):
            x = uv[i, j]
            d = x - prox_scalar(g, r, x - r * grad[i, j])
            total += d * d
    return u.grid.tau * total / (2.0 * r * r)


def jump_slope(grad_row: np.ndarray, index: int, on: bool, n_steps: int, sampling: str = "active") -> float:
    """Gradient value used at the jump between cells ``index`` and ``index+1`` (1-based).

    ``"active"`` takes the cell on the active side; ``"average"`` averages
    the cells on both sides that exist.
    """
    if sampling == "active":
        return float(grad_row[index] if on else grad_row[index - 1])
    if sampling == "average":
        cells = [c for c in (index - 1, index) if 0 <= c < n_steps]
        return float(np.mean(grad_row[cells]))
    raise ValueError(f"unknown gradient sampling rule {sampling!r}")


def c_switch(u: ControlGrid, grad: np.ndarray, pricing: Sequence[PricingFunction],
             grid: TimeGrid | None = None, sampling: str = "active") -> tuple[float, tuple[JumpScore, ...]]:
    grid = u.grid if grid is None else grid
    span = grid.T - grid.t0
    scores = []
    for comp in jump_set(u):
        for jp in comp:
            i = jp.component
            q = jump_slope(grad[i], jp.index, jp.on, grid.n_steps, sampling)
            v, V = continuation_min(pricing[i], q)
            damp = min(jp.time - grid.t0, grid.T - jp.time) / span
            score = max(V, -V * max(damp, 0.0))
            scores.append(JumpScore(i, jp.time, jp.index, jp.on, q, v, V, score))
    best = max((s.score for s in scores), default=0.0)
    return best, tuple(scores)


def criticality(u: ControlGrid, grad: np.ndarray, pricing: Sequence[PricingFunction],
                grid: TimeGrid | None = None, r: float = 1.0, sampling: str = "active") -> CriticalityReport:
    cp = c_prox(u, grad, pricing, r)
    cs, jumps = c_switch(u, grad, pricing, grid, sampling)
    return CriticalityReport(cp, cs, jumps)
