"""Smooth objective part: explicit Euler simulation and its discrete adjoint.

The state recursion is

    y_j = y_{j-1} + tau * f(t_{j-1}, y_{j-1}, u_j),   j = 1..N_T,

where ``u_j`` is the control on cell ``j``.  The smooth objective uses
left-endpoint sums,

    F(u) = tau * sum_{j<N_T} l_j(y_j) + phi(y_{N_T}) + tau * sum_j r(u_j),

and ``gradient_adjoint`` differentiates exactly this discrete function by
the reverse recursion, returning ``dF/du_ij / tau``.

Forward simulation and ``smooth_objective`` accept batched controls of
shape ``(..., N, N_T)``; the adjoint works on a single control.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .grid import ControlGrid, TimeGrid, running_cost_G, sign_pattern, total_variation
from .pricing import PricingFunction, switching_value

__all__ = [
    "NumericalBlowup",
    "DecayParams",
    "SirParams",
    "DecayModel",
    "SirModel",
    "CustomModel",
    "ProblemSpec",
    "decay_target_control",
    "decay_problem",
    "sir_problem",
    "forward_state",
    "smooth_objective",
    "gradient_adjoint",
    "full_objective",
    "finite_difference_gradient",
    "gradient_check",
    "random_admissible",
    "DECAY_PRICING",
    "SIR_PRICING",
]


class NumericalBlowup(ArithmeticError):
    """The Euler recursion produced a non-finite state."""

    def __init__(self, step: int, control: np.ndarray | None = None):
        super().__init__(f"non-finite state at Euler step {step}")
        self.step = step
        self.control = control


DECAY_PRICING = (PricingFunction.quadratic(0.3, 1.0, 0.7, -0.5, 0.4),)

SIR_PRICING = (
    PricingFunction.from_config({
        "a": 0.1, "b": 0.6,
        "pieces": [{"interval": [0.1, 0.3], "quad": [0.0, -5.0, 5.5]},
                   {"interval": [0.3, 0.6], "quad": [30.0, 1.0, 1.0]}],
    }),
    PricingFunction.quadratic(0.1, 0.4, 30000.0, 1.0, 3000.0),
)


@dataclass(frozen=True)
class DecayParams:
    y0: float = 1000.0
    base_rate: float = 0.025
    control_rate: float = 0.05
    sigma_y: float = 10.0
    sigma_T: float = 0.3
    sigma_u: float = 0.001
    # control used to generate the tracking target; values default to u*
    target_intervals: tuple[tuple[float, float], ...] = ((20.0, 50.0), (80.0, 110.0))
    target_values: tuple[float, ...] | None = None


@dataclass(frozen=True)
class SirParams:
    population: float = 1.0e6
    beta0: float = 0.3
    recovery: float = 0.1
    S0: float = 1.0e6 - 100.0
    I0: float = 100.0
    R0: float = 0.0
    sigma_I: float = 7.0e-5
    sigma_S: float = 7.0e-6

    def __post_init__(self) -> None:
        vals = (self.population, self.beta0, self.recovery, self.S0, self.I0, self.R0,
                self.sigma_I, self.sigma_S)
        if min(vals) < 0:
            raise ValueError("SIR parameters must be nonnegative")
        if abs(self.S0 + self.I0 + self.R0 - self.population) > 1e-9 * self.population:
            raise ValueError("S0 + I0 + R0 must equal the population")


class DecayModel:
    """``y' = -(base + rate*u) y`` tracking a positive target ``y_d``."""

    n_state = 1
    n_controls = 1

    def __init__(self, params: DecayParams, y_d: np.ndarray):
        y_d = np.asarray(y_d, dtype=float)
        if np.any(y_d <= 0):
            raise ValueError("target y_d must be strictly positive")
        self.params = params
        self.y_d = y_d
        self.y0 = np.array([params.y0])

    def rhs(self, t, y, u):
        p = self.params
        return -(p.base_rate + p.control_rate * u[..., 0:1]) * y

    def rhs_scalar(self, t, y, u):
        p = self.params
        return [-(p.base_rate + p.control_rate * u[0]) * y[0]]

    def rhs_y(self, t, y, u):
        p = self.params
        return np.array([[-(p.base_rate + p.control_rate * u[0])]])

    def rhs_u(self, t, y, u):
        return np.array([[-self.params.control_rate * y[0]]])

    def running(self, Y):
        e = (Y[..., 0] - self.y_d) / self.y_d
        return 0.5 * self.params.sigma_y * e * e

    def running_y(self, j, y):
        yd = self.y_d[j]
        return np.array([self.params.sigma_y * (y[0] - yd) / (yd * yd)])

    def terminal(self, y):
        e = y[..., 0] - self.y_d[-1]
        return 0.5 * self.params.sigma_T * e * e

    def terminal_y(self, y):
        return np.array([self.params.sigma_T * (y[0] - self.y_d[-1])])

    def control_cost(self, u):
        return 0.5 * self.params.sigma_u * np.sum(u * u, axis=-2)

    def control_cost_u(self, u):
        return self.params.sigma_u * u


class SirModel:
    """SIR dynamics with infection rate ``beta0 * (1 - u1 - u2)``."""

    n_state = 3
    n_controls = 2

    def __init__(self, params: SirParams):
        self.params = params
        self.y0 = np.array([params.S0, params.I0, params.R0])

    def rhs(self, t, y, u):
        p = self.params
        S, I = y[..., 0], y[..., 1]
        beta = p.beta0 * (1.0 - u[..., 0] - u[..., 1])
        new_inf = beta * S * I / p.population
        rec = p.recovery * I
        return np.stack([-new_inf, new_inf - rec, rec], axis=-1)

    def rhs_scalar(self, t, y, u):
        p = self.params
        new_inf = p.beta0 * (1.0 - u[0] - u[1]) * y[0] * y[1] / p.population
        rec = p.recovery * y[1]
        return [-new_inf, new_inf - rec, rec]

    def rhs_y(self, t, y, u):
        p = self.params
        S, I = y[0], y[1]
        beta = p.beta0 * (1.0 - u[0] - u[1])
        dS, dI = beta * I / p.population, beta * S / p.population
        return np.array([[-dS, -dI, 0.0],
                         [dS, dI - p.recovery, 0.0],
                         [0.0, p.recovery, 0.0]])

    def rhs_u(self, t, y, u):
        p = self.params
        d = p.beta0 * y[0] * y[1] / p.population
        return np.array([[d, d], [-d, -d], [0.0, 0.0]])

    def running(self, Y):
        return 0.5 * self.params.sigma_I * Y[..., 1] ** 2

    def running_y(self, j, y):
        return np.array([0.0, self.params.sigma_I * y[1], 0.0])

    def terminal(self, y):
        return 0.5 * self.params.sigma_S * y[..., 0] ** 2

    def terminal_y(self, y):
        return np.array([self.params.sigma_S * y[0], 0.0, 0.0])

    def control_cost(self, u):
        return np.zeros(u.shape[:-2] + u.shape[-1:])

    def control_cost_u(self, u):
        return np.zeros_like(u)


@dataclass
class CustomModel:
    """Callback model reusing the Euler/adjoint engine.

    ``rhs(t, y, u)`` must broadcast over leading batch axes (``y`` is
    ``(..., n_state)``, ``u`` is ``(..., N)``) if batched simulation or
    finite differences are used.  ``running(Y)`` receives all nodes
    ``(..., N_T+1, n_state)`` and returns per-node densities; only the first
    ``N_T`` enter the objective.  ``running_y(j, y)`` is the derivative at
    node ``j``.
    """

    y0: np.ndarray
    n_controls: int
    rhs: Callable
    rhs_y: Callable
    rhs_u: Callable
    running: Callable
    running_y: Callable
    terminal: Callable
    terminal_y: Callable
    control_cost: Callable | None = None
    control_cost_u: Callable | None = None
    n_state: int = field(init=False)

    def __post_init__(self) -> None:
        self.y0 = np.atleast_1d(np.asarray(self.y0, dtype=float))
        self.n_state = self.y0.shape[0]
        if self.control_cost is None:
            self.control_cost = lambda u: np.zeros(u.shape[:-2] + u.shape[-1:])
            self.control_cost_u = lambda u: np.zeros_like(u)


@dataclass(frozen=True)
class ProblemSpec:
    """Smooth part ``F`` plus the data of the nonsmooth terms."""

    variant: str
    grid: TimeGrid
    pricing: tuple[PricingFunction, ...]
    model: object
    sigma_sgn: float = 1.0
    params: object = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "pricing", tuple(self.pricing))
        if self.sigma_sgn < 0:
            raise ValueError("switch weight must be nonnegative")
        if len(self.pricing) != self.model.n_controls:
            raise ValueError(f"{len(self.pricing)} pricing functions for a model with "
                             f"{self.model.n_controls} controls")

    @property
    def n_controls(self) -> int:
        return len(self.pricing)

    def zero_control(self) -> ControlGrid:
        return ControlGrid.zeros(self.grid, self.n_controls)

    def control(self, values) -> ControlGrid:
        return ControlGrid(self.grid, values)


def decay_target_control(grid: TimeGrid, params: DecayParams,
                         pricing: Sequence[PricingFunction] = DECAY_PRICING) -> np.ndarray:
    """Generating control of the decay target, sampled at cell midpoints."""
    values = params.target_values
    if values is None:
        values = (switching_value(pricing[0]),) * len(params.target_intervals)
    if len(values) != len(params.target_intervals):
        raise ValueError("need one target value per target interval")
    mids = grid.cell_mids
    u = np.zeros((1, grid.n_steps))
    for (lo, hi), v in zip(params.target_intervals, values):
        u[0, (mids >= lo) & (mids < hi)] = v
    return u


def decay_problem(grid: TimeGrid, params: DecayParams = DecayParams(),
                  pricing: Sequence[PricingFunction] = DECAY_PRICING,
                  sigma_sgn: float = 1.0) -> ProblemSpec:
    """Decay identification problem with ``y_d`` generated on ``grid``."""
    u_gen = decay_target_control(grid, params, pricing)
    dummy = DecayModel(params, np.ones(grid.n_steps + 1))
    y_d = _euler(dummy, grid, u_gen)[..., 0]
    return ProblemSpec("decay", grid, tuple(pricing), DecayModel(params, y_d), sigma_sgn, params)


def sir_problem(grid: TimeGrid, params: SirParams = SirParams(),
                pricing: Sequence[PricingFunction] = SIR_PRICING,
                sigma_sgn: float = 1.0) -> ProblemSpec:
    return ProblemSpec("sir", grid, tuple(pricing), SirModel(params), sigma_sgn, params)


def _uvalues(u) -> np.ndarray:
    return u.values if isinstance(u, ControlGrid) else np.asarray(u, dtype=float)


def _euler_scalar(model, grid: TimeGrid, uv: np.ndarray) -> np.ndarray:
    # plain-float loop for a single control; avoids small-array overhead per step
    tau, n_t = grid.tau, grid.n_steps
    rhs = model.rhs_scalar
    cols = uv.T.tolist()
    y = [float(v) for v in model.y0]
    out = [y]
    t = grid.t0
    for j in range(n_t):
        f = rhs(t, y, cols[j])
        y = [a + tau * b for a, b in zip(y, f)]
        if not all(math.isfinite(v) for v in y):
            raise NumericalBlowup(j + 1, np.array(uv))
        out.append(y)
        t += tau
    return np.array(out)


def _euler(model, grid: TimeGrid, uv: np.ndarray) -> np.ndarray:
    """Trajectory of shape ``(..., N_T+1, n_state)``."""
    if uv.ndim == 2 and hasattr(model, "rhs_scalar"):
        return _euler_scalar(model, grid, uv)
    tau = grid.tau
    batch = uv.shape[:-2]
    traj = np.empty(batch + (grid.n_steps + 1, model.n_state))
    y = np.broadcast_to(model.y0, batch + (model.n_state,)).astype(float)
    traj[..., 0, :] = y
    t = grid.t0
    for j in range(grid.n_steps):
        y = y + tau * model.rhs(t, y, uv[..., :, j])
        if not np.isfinite(y).all():
            raise NumericalBlowup(j + 1, np.array(uv) if uv.ndim == 2 else None)
        traj[..., j + 1, :] = y
        t += tau
    return traj


def forward_state(spec: ProblemSpec, u) -> np.ndarray:
    """State trajectory as a ``(n_state, N_T+1)`` matrix (batched: ``(..., n_state, N_T+1)``)."""
    return np.swapaxes(_euler(spec.model, spec.grid, _uvalues(u)), -1, -2)


def _objective_from_traj(spec: ProblemSpec, traj: np.ndarray, uv: np.ndarray):
    model, tau = spec.model, spec.grid.tau
    run = model.running(traj)[..., :-1].sum(axis=-1)
    term = model.terminal(traj[..., -1, :])
    ctrl = model.control_cost(uv).sum(axis=-1)
    return tau * run + term + tau * ctrl


def smooth_objective(spec: ProblemSpec, u):
    """``F(u)``; a float for one control, an array for a batch."""
    uv = _uvalues(u)
    val = _objective_from_traj(spec, _euler(spec.model, spec.grid, uv), uv)
    return float(val) if np.ndim(val) == 0 else val


def gradient_adjoint(spec: ProblemSpec, u, traj: np.ndarray | None = None) -> np.ndarray:
    """``dF/du_ij / tau`` as an ``(N, N_T)`` array via the discrete adjoint."""
    model, grid = spec.model, spec.grid
    uv = _uvalues(u)
    tau = grid.tau
    if traj is None:
        traj = _euler(model, grid, uv)
    n_t = grid.n_steps
    grad = np.empty_like(uv)
    lam = model.terminal_y(traj[n_t])
    for j in range(n_t, 0, -1):
        # lam = dF/dy_j; node j-1 feeds the step into node j with control u_j
        t = grid.t0 + (j - 1) * tau
        y_prev, u_j = traj[j - 1], uv[:, j - 1]
        grad[:, j - 1] = model.rhs_u(t, y_prev, u_j).T @ lam
        if j > 1:
            lam = lam + tau * (model.rhs_y(t, y_prev, u_j).T @ lam) + tau * model.running_y(j - 1, y_prev)
    grad += model.control_cost_u(uv)
    return grad


def full_objective(spec: ProblemSpec, u) -> float:
    """``J(u) = F(u) + G(u) + sigma_sgn * TV(sgn u)``; ``inf`` if inadmissible."""
    uv = _uvalues(u)
    G = running_cost_G(uv, spec.pricing, tau=spec.grid.tau)
    if math.isinf(G):
        return math.inf
    return smooth_objective(spec, uv) + G + spec.sigma_sgn * total_variation(sign_pattern(uv))


def finite_difference_gradient(spec: ProblemSpec, u, h: float = 1e-6) -> np.ndarray:
    """Central differences of ``F`` in every entry, divided by ``tau`` (batched)."""
    uv = _uvalues(u)
    n, m = uv.shape
    k = n * m
    eye = np.eye(k).reshape(k, n, m)
    batch = np.concatenate([uv + h * eye, uv - h * eye])
    vals = smooth_objective(spec, batch)
    return ((vals[:k] - vals[k:]) / (2.0 * h)).reshape(n, m) / spec.grid.tau


def gradient_check(spec: ProblemSpec, u, h: float = 1e-6) -> float:
    """Normwise relative error ``max|adj - fd| / max|fd|``."""
    adj = gradient_adjoint(spec, u)
    fd = finite_difference_gradient(spec, u, h)
    scale = max(np.max(np.abs(fd)), np.finfo(float).tiny)
    return float(np.max(np.abs(adj - fd)) / scale)


def random_admissible(rng: np.random.Generator, pricing: Sequence[PricingFunction], n_steps: int,
                      p_on: float = 0.5) -> np.ndarray:
    """Random control with on/off pattern and uniform active values."""
    out = np.zeros((len(pricing), n_steps))
    for i, g in enumerate(pricing):
        on = rng.random(n_steps) < p_on
        out[i, on] = rng.uniform(g.a, g.b, on.sum())
    return out
