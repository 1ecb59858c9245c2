"""Exact trust-region subproblem over sign patterns by dynamic programming.

The discretized model

    m(w) = tau * sum_ij (grad_ij w_ij + g_i(w_ij) + s(u_ij) s(w_ij) (u_ij - w_ij)**2 / (2 delta))
           + sigma * (number of on/off transitions of sgn(w), boundaries included)

is minimized over admissible ``w`` whose sign pattern differs from that of
``u`` in at most ``budget`` cells.  Given the pattern, the optimal value of
each cell is independent of all others (``stage_candidate``), so the search
reduces to a shortest path over ``(time step, sign vector, flips used)``.

Sign vectors ``alpha in {0,1}^N`` are encoded as integers
``sum_i alpha_i 2**i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import ControlGrid, sign_l1_distance, sign_pattern, total_variation
from .pricing import PricingFunction, continuation_min, eval_g, prox_scalar

__all__ = [
    "ModelInstance",
    "ValueTables",
    "Solution",
    "BudgetError",
    "stage_candidate",
    "build_tables",
    "extract_solution",
    "model_value",
    "model_offset",
    "brute_force_subproblem",
    "brute_force_profile",
    "table_rows",
]

BRUTE_FORCE_MAX_CELLS = 24


class BudgetError(ValueError):
    """Requested budget exceeds what the tables were built for."""


@dataclass(frozen=True, eq=False)
class ModelInstance:
    """Data of one trust-region subproblem."""

    u: ControlGrid
    grad: np.ndarray
    delta: float
    pricing: tuple[PricingFunction, ...]
    sigma_sgn: float = 1.0
    budget_cap: int = 0

    def __post_init__(self) -> None:
        grad = np.array(self.grad, dtype=float, ndmin=2)
        if grad.shape != self.u.shape:
            raise ValueError(f"gradient shape {grad.shape} does not match control {self.u.shape}")
        if not self.delta > 0:
            raise ValueError(f"prox parameter must be positive, got {self.delta}")
        if len(self.pricing) != self.u.n_controls:
            raise ValueError("one pricing function per control component required")
        n, n_t = self.u.shape
        if not 0 <= self.budget_cap <= n * n_t:
            raise ValueError(f"budget cap must lie in [0, {n * n_t}], got {self.budget_cap}")
        grad.setflags(write=False)
        object.__setattr__(self, "grad", grad)
        object.__setattr__(self, "pricing", tuple(self.pricing))

    @property
    def tau(self) -> float:
        return self.u.grid.tau


def stage_candidate(inst: ModelInstance, i: int, j: int, on: int) -> tuple[float, float]:
    """Optimal value of cell ``(i, j)`` given its sign, and its stage cost."""
    if not on:
        return 0.0, 0.0
    g = inst.pricing[i]
    uij = float(inst.u.values[i, j])
    q = float(inst.grad[i, j])
    if uij > 0.0:
        w = prox_scalar(g, inst.delta, uij - inst.delta * q)
        cost = q * w + eval_g(g, w) + (uij - w) ** 2 / (2.0 * inst.delta)
    else:
        w, cost = continuation_min(g, q)
    return w, inst.tau * cost


def _popcount(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    out = np.zeros_like(x)
    while np.any(x):
        out += x & 1
        x = x >> 1
    return out


def _stage_arrays(inst: ModelInstance) -> tuple[np.ndarray, np.ndarray]:
    n, n_t = inst.u.shape
    w_on = np.empty((n, n_t))
    cost_on = np.empty((n, n_t))
    for i in range(n):
        for j in range(n_t):
            w_on[i, j], cost_on[i, j] = stage_candidate(inst, i, j, 1)
    return w_on, cost_on


@dataclass(frozen=True, eq=False)
class ValueTables:
    """Value function ``phi[l, alpha, B]`` and predecessor pointers ``psi``.

    ``l`` is 0-based here (cell ``l+1``); ``phi`` is ``inf`` where no pattern
    ending in ``alpha`` uses exactly ``B`` flips.
    """

    phi: np.ndarray
    psi: np.ndarray
    w_on: np.ndarray
    cost_on: np.ndarray
    flips: np.ndarray  # flips[l, alpha] = |sgn(u_l) - alpha|_1
    budget_cap: int
    sigma_sgn: float

    @property
    def n_steps(self) -> int:
        return self.phi.shape[0]


@dataclass(frozen=True, eq=False)
class Solution:
    w: ControlGrid
    value: float
    flips: int
    pattern: np.ndarray


def build_tables(inst: ModelInstance) -> ValueTables:
    """Forward Bellman recursion up to the instance's budget cap."""
    n, n_t = inst.u.shape
    cap = int(inst.budget_cap)
    n_alpha = 1 << n
    alphas = np.arange(n_alpha)
    bits = ((alphas[:, None] >> np.arange(n)) & 1).astype(float)  # (A, N)
    sigma = float(inst.sigma_sgn)

    w_on, cost_on = _stage_arrays(inst)
    stage = cost_on.T @ bits.T  # (N_T, A); alpha=0 gives exactly 0
    code_u = (sign_pattern(inst.u).astype(np.int64) << np.arange(n)[:, None]).sum(axis=0)
    flips = _popcount(code_u[:, None] ^ alphas[None, :])  # (N_T, A)
    jump = sigma * _popcount(alphas[:, None] ^ alphas[None, :])  # (beta, alpha)

    phi = np.full((n_t, n_alpha, cap + 1), np.inf)
    psi = np.zeros((n_t, n_alpha, cap + 1), dtype=np.int16)
    ar_b = np.arange(cap + 1)

    first = stage[0] + sigma * _popcount(alphas)
    ok = flips[0] <= cap
    phi[0, alphas[ok], flips[0, ok]] = first[ok]

    # shifted[beta, alpha, B] = phi[l-1, beta, B - flips[l, alpha]] via a left inf pad
    pad = np.full((n_alpha, n), np.inf)
    for l in range(1, n_t):
        prev = np.concatenate([pad, phi[l - 1]], axis=1)
        idx = n - flips[l][:, None] + ar_b[None, :]  # (A, B)
        cand = prev[:, idx] + jump[:, :, None]
        k = np.argmin(cand, axis=0)
        best = np.take_along_axis(cand, k[None], axis=0)[0]
        phi[l] = best + stage[l][:, None]
        psi[l] = k
    return ValueTables(phi, psi, w_on, cost_on, flips, cap, sigma)


def extract_solution(tables: ValueTables, inst: ModelInstance, budget: int) -> Solution:
    """Optimal ``w`` with at most ``budget`` flips, reusing ``tables``."""
    budget = int(budget)
    if budget < 0 or budget > tables.budget_cap:
        raise BudgetError(f"budget {budget} outside [0, {tables.budget_cap}] covered by the tables")
    n, n_t = inst.u.shape
    n_alpha = 1 << n
    alphas = np.arange(n_alpha)
    final = tables.phi[-1, :, :budget + 1] + tables.sigma_sgn * _popcount(alphas)[:, None]
    flat = int(np.argmin(final))
    a, b = divmod(flat, budget + 1)
    value = float(final[a, b])

    seq = np.empty(n_t, dtype=np.int64)
    seq[-1] = a
    for l in range(n_t - 1, 0, -1):
        nb = b - int(tables.flips[l, a])
        a = int(tables.psi[l, a, b])
        b = nb
        seq[l - 1] = a
    pattern = ((seq[None, :] >> np.arange(n)[:, None]) & 1).astype(np.int8)
    w = np.where(pattern == 1, tables.w_on, 0.0)
    wc = inst.u.with_values(w)
    return Solution(wc, value, sign_l1_distance(inst.u, wc), pattern)


def model_value(inst: ModelInstance, w) -> float:
    """Discretized model at ``w`` with the ``w``-independent constants dropped."""
    wv = w.values if isinstance(w, ControlGrid) else np.atleast_2d(np.asarray(w, dtype=float))
    uv = inst.u.values
    if wv.shape != uv.shape:
        raise ValueError(f"shape mismatch: {wv.shape} vs {uv.shape}")
    total = 0.0
    for i, g in enumerate(inst.pricing):
        for j in range(uv.shape[1]):
            x = float(wv[i, j])
            gx = eval_g(g, x)
            if math.isinf(gx):
                return math.inf
            term = inst.grad[i, j] * x + gx
            if x > 0.0 and uv[i, j] > 0.0:
                term += (uv[i, j] - x) ** 2 / (2.0 * inst.delta)
            total += term
    return inst.tau * total + inst.sigma_sgn * total_variation(sign_pattern(wv))


def model_offset(inst: ModelInstance) -> float:
    """``model_value(inst, u)``: the constant separating it from the centred model."""
    return model_value(inst, inst.u)


def _brute_force_scan(inst: ModelInstance):
    n, n_t = inst.u.shape
    k = n * n_t
    if k > BRUTE_FORCE_MAX_CELLS:
        raise ValueError(f"instance with {k} cells is too large for brute force "
                         f"(limit {BRUTE_FORCE_MAX_CELLS})")
    cost_on = np.empty((n, n_t))
    w_on = np.empty((n, n_t))
    for i in range(n):
        for j in range(n_t):
            w_on[i, j], cost_on[i, j] = stage_candidate(inst, i, j, 1)
    s_u = sign_pattern(inst.u).reshape(-1)
    shifts = np.arange(k)
    best_val = np.full(k + 1, np.inf)
    best_code = np.zeros(k + 1, dtype=np.int64)
    chunk = 1 << 16
    for start in range(0, 1 << k, chunk):
        codes = np.arange(start, min(start + chunk, 1 << k), dtype=np.int64)
        pats = ((codes[:, None] >> shifts) & 1).astype(np.int8)  # cell (i, j) -> bit i*N_T + j
        cell_cost = pats.astype(float) @ cost_on.reshape(-1)
        p3 = pats.reshape(-1, n, n_t)
        edges = np.zeros((len(codes), n, n_t + 2), dtype=np.int8)
        edges[:, :, 1:-1] = p3
        tv = np.abs(np.diff(edges, axis=2)).sum(axis=(1, 2))
        vals = cell_cost + inst.sigma_sgn * tv
        nflip = (pats != s_u).sum(axis=1)
        for f in np.unique(nflip):
            sel = np.flatnonzero(nflip == f)
            m = sel[np.argmin(vals[sel])]
            if vals[m] < best_val[f]:
                best_val[f], best_code[f] = vals[m], codes[m]
    return best_val, best_code, w_on


def _code_to_w(code: int, w_on: np.ndarray) -> np.ndarray:
    n, n_t = w_on.shape
    bits = (code >> np.arange(n * n_t)) & 1
    return np.where(bits.reshape(n, n_t) == 1, w_on, 0.0)


def brute_force_profile(inst: ModelInstance) -> tuple[np.ndarray, list[np.ndarray]]:
    """Exhaustive optimum for every budget ``0..N*N_T``.

    Returns the optimal values (nonincreasing in the budget) and minimizers.
    """
    best_val, best_code, w_on = _brute_force_scan(inst)
    vals = np.empty_like(best_val)
    ws = []
    cur_v, cur_c = np.inf, 0
    for f in range(len(best_val)):
        if best_val[f] < cur_v:
            cur_v, cur_c = best_val[f], int(best_code[f])
        vals[f] = cur_v
        ws.append(_code_to_w(cur_c, w_on))
    return vals, ws


def brute_force_subproblem(inst: ModelInstance, budget: int) -> tuple[np.ndarray, float]:
    """Minimize the model by enumerating all sign patterns within ``budget`` flips."""
    vals, ws = brute_force_profile(inst)
    b = min(int(budget), len(vals) - 1)
    return ws[b], float(vals[b])


def table_rows(tables: ValueTables):
    """Yield ``(l, alpha, B, phi)`` with 1-based ``l`` for CSV dumps."""
    n_t, n_alpha, nb = tables.phi.shape
    for l in range(n_t):
        for a in range(n_alpha):
            for b in range(nb):
                yield l + 1, a, b, float(tables.phi[l, a, b])
