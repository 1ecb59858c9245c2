"""Trust-region iterations.

``solve`` runs the switching-aware method: every iteration minimizes the
discretized model exactly by dynamic programming within a flip budget, and
the proximal parameter ``delta`` and the flip budget are managed separately.
After a rejected step only the budget is reduced, so the value tables built
for the current iterate and ``delta`` are re-queried instead of rebuilt.

``abstract_trust_region`` is the plain accept/reject loop for any oracle,
with ``proximal_gradient_trm`` as the composite-problem instance.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Callable

import numpy as np

from .criticality import CriticalityReport, criticality
from .dynamics import ProblemSpec, full_objective, gradient_adjoint
from .grid import ControlGrid, is_admissible, sign_pattern, snap_admissible, total_variation
from .subproblem import ModelInstance, Solution, ValueTables, build_tables, extract_solution, model_value

__all__ = [
    "TrConfig",
    "IterationRecord",
    "SolveReport",
    "StepResult",
    "ConsistencyError",
    "step",
    "solve",
    "predicted_reduction",
    "actual_reduction",
    "abstract_trust_region",
    "ProxGradientProblem",
    "proximal_gradient_trm",
]

log = logging.getLogger(__name__)

CRITICALITY_TOL = "criticality_tol"
MAX_ITER = "max_iter"
RADIUS_FLOOR = "radius_floor"


class ConsistencyError(RuntimeError):
    """A quantity that is nonnegative by construction came out negative."""


@dataclass(frozen=True)
class TrConfig:
    eta: float = 0.1
    gamma1: float = 0.5
    gamma2: float = 2.0
    delta0: float = 1.0
    delta_max: float = 1e6
    budget_max: int = 10
    r: float = 1.0
    tol_c: float = 1e-8
    max_iter: int = 20000
    delta_min: float = 1e-14
    # "hybrid": shrink delta once the budget is exhausted; "literal": only when budget_max == 1
    budget_rule: str = "hybrid"
    # "prox": stop on c_prox once the model proposes no switch; "strict": stop on max(c_prox, c_switch)
    stopping: str = "prox"
    sampling: str = "active"

    def __post_init__(self) -> None:
        if not 0.0 <= self.eta < 1.0:
            raise ValueError("eta must lie in [0, 1)")
        if not 0.0 < self.gamma1 < 1.0 <= self.gamma2:
            raise ValueError("need 0 < gamma1 < 1 <= gamma2")
        if not 0.0 < self.delta0 <= self.delta_max:
            raise ValueError("need 0 < delta0 <= delta_max")
        if int(self.budget_max) != self.budget_max or self.budget_max < 0:
            raise ValueError("budget_max must be a nonnegative integer")
        if not self.r > 0 or self.tol_c < 0 or not self.delta_min > 0:
            raise ValueError("r and delta_min must be positive, tol_c nonnegative")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError("max_iter must be a positive integer")
        if self.budget_rule not in ("hybrid", "literal"):
            raise ValueError(f"unknown budget rule {self.budget_rule!r}")
        if self.stopping not in ("prox", "strict"):
            raise ValueError(f"unknown stopping rule {self.stopping!r}")
        if self.sampling not in ("active", "average"):
            raise ValueError(f"unknown gradient sampling rule {self.sampling!r}")


@dataclass(frozen=True)
class IterationRecord:
    iter: int
    J: float
    pred: float
    ared: float
    ratio: float
    delta: float
    budget: int
    flips: int
    c_prox: float
    c_switch: float
    accepted: bool
    ms: float


@dataclass
class SolveReport:
    records: list[IterationRecord]
    u: ControlGrid
    J: float
    criticality: CriticalityReport
    reason: str
    wall_time: float
    config: TrConfig = field(repr=False, default=None)

    @property
    def iterations(self) -> int:
        return len(self.records)

    def summary(self) -> dict:
        return {
            "termination": self.reason,
            "J": float(self.J),
            "c_prox": float(self.criticality.c_prox),
            "c_switch": float(self.criticality.c_switch),
            "c": float(self.criticality.c),
            "iterations": self.iterations,
            "accepted": int(sum(bool(r.accepted) for r in self.records)),
            "tv": int(total_variation(sign_pattern(self.u))),
            "wall_time": float(self.wall_time),
        }


@dataclass(frozen=True, eq=False)
class StepResult:
    candidate: ControlGrid
    pred: float
    ared: float
    accepted: bool
    flips: int
    J_candidate: float


def predicted_reduction(inst: ModelInstance, tables: ValueTables, budget: int,
                        solution: Solution | None = None) -> float:
    """Model decrease achievable with at most ``budget`` flips; nonnegative."""
    sol = extract_solution(tables, inst, budget) if solution is None else solution
    if np.array_equal(sol.w.values, inst.u.values):
        return 0.0
    base = model_value(inst, inst.u)
    pred = base - sol.value
    if pred < -1e-10 * max(1.0, abs(base)):
        raise ConsistencyError(f"negative predicted reduction {pred:.3e}")
    return max(pred, 0.0)


def actual_reduction(spec: ProblemSpec, u, u_new) -> float:
    return full_objective(spec, u) - full_objective(spec, u_new)


def _accept(pred: float, ared: float, eta: float) -> bool:
    return pred > 0.0 and ared >= eta * pred


def step(spec: ProblemSpec, u: ControlGrid, grad: np.ndarray, delta: float, budget: int,
         cfg: TrConfig, tables: ValueTables | None = None, J_u: float | None = None) -> StepResult:
    """One trust-region trial step (no state update)."""
    inst = ModelInstance(u, grad, delta, spec.pricing, spec.sigma_sgn, max(cfg.budget_max, budget))
    if tables is None:
        tables = build_tables(inst)
    sol = extract_solution(tables, inst, budget)
    return _evaluate(spec, inst, tables, sol, budget, cfg, J_u)


def _evaluate(spec, inst, tables, sol, budget, cfg, J_u) -> StepResult:
    pred = predicted_reduction(inst, tables, budget, sol)
    cand = inst.u.with_values(snap_admissible(sol.w.values, spec.pricing))
    if J_u is None:
        J_u = full_objective(spec, inst.u)
    if pred > 0.0:
        J_new = full_objective(spec, cand)
        ared = J_u - J_new
    else:
        J_new, ared = J_u, 0.0
    return StepResult(cand, pred, ared, _accept(pred, ared, cfg.eta), sol.flips, J_new)


def solve(spec: ProblemSpec, u0: ControlGrid | None = None, cfg: TrConfig = TrConfig(),
          callback: Callable[[IterationRecord, ControlGrid], None] | None = None) -> SolveReport:
    """Run the trust-region method from ``u0`` (default: all off)."""
    start = time.perf_counter()
    u = spec.zero_control() if u0 is None else u0
    if not isinstance(u, ControlGrid):
        u = spec.control(u)
    u = u.with_values(snap_admissible(u.values, spec.pricing))
    u.check(spec.pricing)

    J = full_objective(spec, u)
    grad = gradient_adjoint(spec, u)
    rep = criticality(u, grad, spec.pricing, spec.grid, cfg.r, cfg.sampling)
    delta, budget = cfg.delta0, int(cfg.budget_max)
    inst = tables = None
    last_pred = math.inf
    records: list[IterationRecord] = []
    reason = MAX_ITER

    while True:
        t_it = time.perf_counter()
        if cfg.stopping == "strict" and rep.c <= cfg.tol_c:
            reason = CRITICALITY_TOL
            break
        if len(records) >= cfg.max_iter:
            reason = MAX_ITER
            break
        if delta < cfg.delta_min:
            reason = RADIUS_FLOOR
            break
        if tables is None:
            inst = ModelInstance(u, grad, delta, spec.pricing, spec.sigma_sgn, int(cfg.budget_max))
            tables = build_tables(inst)
            last_pred = math.inf
        sol = extract_solution(tables, inst, budget)
        if cfg.stopping == "prox" and rep.c_prox <= cfg.tol_c and sol.flips == 0:
            reason = CRITICALITY_TOL
            break

        res = _evaluate(spec, inst, tables, sol, budget, cfg, J)
        if res.pred > last_pred + 1e-10 * max(1.0, abs(J)):
            raise ConsistencyError("predicted reduction increased while the budget shrank")
        last_pred = res.pred
        ratio = res.ared / res.pred if res.pred > 0 else math.nan
        rec = IterationRecord(len(records), J, res.pred, res.ared, ratio, delta, budget, res.flips,
                              rep.c_prox, rep.c_switch, res.accepted,
                              1e3 * (time.perf_counter() - t_it))
        records.append(rec)
        if callback is not None:
            callback(rec, u)

        if res.accepted:
            assert res.ared >= cfg.eta * res.pred
            u, J = res.candidate, res.J_candidate
            grad = gradient_adjoint(spec, u)
            rep = criticality(u, grad, spec.pricing, spec.grid, cfg.r, cfg.sampling)
            delta = min(cfg.gamma2 * delta, cfg.delta_max)
            budget = int(cfg.budget_max)
            tables = None
        elif cfg.budget_rule == "hybrid":
            if budget >= 1:
                budget = int(math.floor(cfg.gamma1 * budget))
            else:
                delta *= cfg.gamma1
                budget = int(cfg.budget_max)
                tables = None
        else:
            if cfg.budget_max == 1:
                delta *= cfg.gamma1
                budget = int(cfg.budget_max)
                tables = None
            else:
                budget = int(math.floor(cfg.gamma1 * budget))

    wall = time.perf_counter() - start
    log.info("terminated (%s) after %d iterations: J=%.10g c_prox=%.3e c_switch=%.3e",
             reason, len(records), J, rep.c_prox, rep.c_switch)
    return SolveReport(records, u, J, rep, reason, wall, cfg)


def abstract_trust_region(x0, objective: Callable, oracle: Callable, pred: Callable,
                          crit: Callable, cfg: TrConfig = TrConfig()):
    """Generic accept/reject loop on an abstract set.

    ``oracle(x, delta)`` proposes a point, ``pred(x, delta, x_new)`` predicts
    the decrease and ``crit(x)`` is a criticality measure.  Returns the final
    point, the termination reason and a list of ``(J, pred, ared, delta,
    accepted)`` tuples.
    """
    x, delta = x0, cfg.delta0
    J = objective(x)
    history = []
    while True:
        if crit(x) <= cfg.tol_c:
            return x, CRITICALITY_TOL, history
        if len(history) >= cfg.max_iter:
            return x, MAX_ITER, history
        if delta < cfg.delta_min:
            return x, RADIUS_FLOOR, history
        x_new = oracle(x, delta)
        p = pred(x, delta, x_new)
        if p < 0:
            raise ConsistencyError(f"negative predicted reduction {p:.3e}")
        J_new = objective(x_new)
        ared = J - J_new
        ok = _accept(p, ared, cfg.eta)
        history.append((J, p, ared, delta, ok))
        if ok:
            x, J = x_new, J_new
            delta = min(cfg.gamma2 * delta, cfg.delta_max)
        else:
            delta = cfg.gamma1 * delta


@dataclass(frozen=True)
class ProxGradientProblem:
    """``min F(x) + G(x)`` with smooth ``F`` and prox-friendly convex ``G``."""

    F: Callable[[np.ndarray], float]
    grad_F: Callable[[np.ndarray], np.ndarray]
    G: Callable[[np.ndarray], float]
    prox_G: Callable[[np.ndarray, float], np.ndarray]  # prox_G(v, r) = prox_{rG}(v)


def proximal_gradient_trm(problem: ProxGradientProblem, x0: np.ndarray, cfg: TrConfig = TrConfig(),
                          r: float = 1.0):
    """Proximal gradient method with the step size driven by trust-region acceptance."""
    P = problem

    def objective(x):
        return P.F(x) + P.G(x)

    def oracle(x, delta):
        return P.prox_G(x - delta * P.grad_F(x), delta)

    def pred(x, delta, w):
        d = w - x
        m = float(np.dot(P.grad_F(x), d)) + P.G(w) - P.G(x) + float(np.dot(d, d)) / (2 * delta)
        return max(-m, 0.0)

    def crit(x):
        d = x - P.prox_G(x - r * P.grad_F(x), r)
        return float(np.dot(d, d)) / (2 * r * r)

    return abstract_trust_region(np.asarray(x0, dtype=float), objective, oracle, pred, crit, cfg)


def config_dict(cfg: TrConfig) -> dict:
    return asdict(cfg)


def with_overrides(cfg: TrConfig, **kw) -> TrConfig:
    return replace(cfg, **kw)
