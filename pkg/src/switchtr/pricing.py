"""Convex pricing functions for continuous-or-off controls.

A pricing function ``g`` is zero at the origin, piecewise quadratic and
convex on an activity interval ``[a, b]`` with ``a > 0``, and infinite
everywhere else.  All minimizations below are solved in closed form piece by
piece, so results are exact up to floating point rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Piece",
    "PricingFunction",
    "eval_g",
    "prox_scalar",
    "continuation_min",
    "switching_value",
]

_JOINT_TOL = 1e-12


@dataclass(frozen=True)
class Piece:
    """Quadratic ``p*x**2 + q*x + c`` restricted to ``[lo, hi]``."""

    lo: float
    hi: float
    p: float
    q: float
    c: float

    def value(self, x: float) -> float:
        return (self.p * x + self.q) * x + self.c

    def slope(self, x: float) -> float:
        return 2.0 * self.p * x + self.q


@dataclass(frozen=True)
class PricingFunction:
    """Convex price of an active control value.

    Parameters
    ----------
    a, b : float
        Activity interval; ``0 < a <= b``.
    pieces : sequence of Piece
        Quadratic pieces tiling ``[a, b]`` in increasing order.
    m : float
        Declared strong convexity constant.  Only checked, never used.
    """

    a: float
    b: float
    pieces: tuple[Piece, ...]
    m: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "pieces", tuple(self.pieces))
        _validate(self)

    @classmethod
    def quadratic(cls, a: float, b: float, p: float, q: float, c: float, m: float | None = None):
        """Single quadratic piece on ``[a, b]``."""
        return cls(float(a), float(b), (Piece(float(a), float(b), float(p), float(q), float(c)),),
                   2.0 * p if m is None else m)

    @classmethod
    def from_config(cls, entry: dict) -> "PricingFunction":
        """Build from ``{a, b, pieces: [{interval: [l, r], quad: [p, q, c]}, ...], m?}``."""
        pieces = []
        for item in entry["pieces"]:
            lo, hi = item["interval"]
            p, q, c = item["quad"]
            pieces.append(Piece(float(lo), float(hi), float(p), float(q), float(c)))
        return cls(float(entry["a"]), float(entry["b"]), tuple(pieces), float(entry.get("m", 0.0)))

    def to_config(self) -> dict:
        return {
            "a": self.a,
            "b": self.b,
            "m": self.m,
            "pieces": [{"interval": [pc.lo, pc.hi], "quad": [pc.p, pc.q, pc.c]} for pc in self.pieces],
        }

    def __call__(self, x: float) -> float:
        return eval_g(self, x)

    def piece_at(self, x: float) -> Piece:
        for pc in self.pieces:
            if x <= pc.hi:
                return pc
        return self.pieces[-1]

    def derivative(self, x: float) -> float:
        """Right derivative on ``[a, b)``, left derivative at ``b``."""
        if x >= self.b:
            return self.pieces[-1].slope(self.b)
        for pc in self.pieces:
            if x < pc.hi:
                return pc.slope(x)
        return self.pieces[-1].slope(x)

    def subdifferential(self, x: float) -> tuple[float, float]:
        """Interval ``[lo, hi]`` of subgradients of the active branch at ``x``.

        At ``a`` and ``b`` the active branch is extended by ``+inf``, so the
        interval is unbounded on the outer side.
        """
        left = -math.inf
        right = math.inf
        for pc in self.pieces:
            if pc.lo < x <= pc.hi:
                left = pc.slope(x)
            if pc.lo <= x < pc.hi:
                right = pc.slope(x)
        if x == self.a == self.b:
            return -math.inf, math.inf
        return left, right

    @property
    def lipschitz(self) -> float:
        """``max |g'|`` over ``[a, b]`` (diagnostic only)."""
        return max(max(abs(pc.slope(pc.lo)), abs(pc.slope(pc.hi))) for pc in self.pieces)

    @property
    def u_star(self) -> float:
        return switching_value(self)


def _validate(g: PricingFunction) -> None:
    if not (g.a > 0.0):
        raise ValueError(f"lower activity bound must be positive, got a={g.a}")
    if g.b < g.a:
        raise ValueError(f"need a <= b, got a={g.a}, b={g.b}")
    if g.m < 0.0:
        raise ValueError("strong convexity floor m must be nonnegative")
    if not g.pieces:
        raise ValueError("pricing function needs at least one piece")
    pcs = g.pieces
    if abs(pcs[0].lo - g.a) > _JOINT_TOL or abs(pcs[-1].hi - g.b) > _JOINT_TOL:
        raise ValueError("pieces must tile [a, b] exactly")
    for k, pc in enumerate(pcs):
        if pc.hi < pc.lo:
            raise ValueError(f"piece {k} has an empty interval [{pc.lo}, {pc.hi}]")
        if pc.p < 0.0:
            raise ValueError(f"piece {k} is concave (p={pc.p})")
        if 2.0 * pc.p < g.m - 1e-12 and pc.hi > pc.lo:
            raise ValueError(f"piece {k} violates the declared strong convexity floor m={g.m}")
    for k in range(len(pcs) - 1):
        left, right = pcs[k], pcs[k + 1]
        if abs(left.hi - right.lo) > _JOINT_TOL:
            raise ValueError(f"pieces {k} and {k + 1} do not share an endpoint")
        x = left.hi
        vl, vr = left.value(x), right.value(x)
        if abs(vl - vr) > _JOINT_TOL * max(1.0, abs(vl)):
            raise ValueError(f"g is discontinuous at x={x}: {vl} vs {vr}")
        if left.slope(x) > right.slope(x) + 1e-12 * max(1.0, abs(left.slope(x))):
            raise ValueError(f"g is not convex at the joint x={x}")


def eval_g(g: PricingFunction, x: float) -> float:
    """Value of ``g`` at ``x``; ``0`` at the origin and ``inf`` off ``{0} u [a, b]``."""
    if x == 0.0:
        return 0.0
    if x < g.a or x > g.b:
        return math.inf
    return g.piece_at(x).value(x)


def _first_crossing(g: PricingFunction, stationary) -> float:
    # Minimizes a strictly convex-on-[a,b] function h = g + (smooth convex)
    # given the unconstrained stationary point of h on each piece.  The
    # minimizer sits on the first piece whose stationary point is not beyond
    # its right end; clamping to its left end handles joints and ``a``.
    for pc in g.pieces:
        s = stationary(pc)
        if s <= pc.hi:
            return max(s, pc.lo)
    return g.b


def prox_scalar(g: PricingFunction, step: float, x: float) -> float:
    """``argmin_{w in [a, b]} g(w) + (w - x)**2 / (2*step)``."""
    if not step > 0.0:
        raise ValueError(f"prox step must be positive, got {step}")

    def stationary(pc: Piece) -> float:
        return (x - step * pc.q) / (1.0 + 2.0 * pc.p * step)

    return _first_crossing(g, stationary)


def continuation_min(g: PricingFunction, slope: float) -> tuple[float, float]:
    """Minimize ``slope*w + g(w)`` over ``[a, b]``.

    Returns the (smallest) minimizer and the minimal value.
    """

    def stationary(pc: Piece) -> float:
        lin = pc.q + slope
        if pc.p > 0.0:
            return -lin / (2.0 * pc.p)
        return -math.inf if lin >= 0.0 else math.inf

    v = _first_crossing(g, stationary)
    return v, slope * v + g.piece_at(v).value(v)


def switching_value(g: PricingFunction) -> float:
    """Unique minimizer of ``g(v)/v`` on ``[a, b]``.

    Geometrically this is where a tangent of ``g`` passes through the origin.
    The ratio is quasiconvex, so comparing the per-piece candidates
    (``sqrt(c/p)`` clamped, plus piece ends) is exact.
    """
    best_v, best_r = math.nan, math.inf
    for pc in g.pieces:
        cands = [pc.lo, pc.hi]
        if pc.p > 0.0 and pc.c > 0.0:
            cands.append(min(max(math.sqrt(pc.c / pc.p), pc.lo), pc.hi))
        for v in sorted(cands):
            r = pc.value(v) / v
            if r < best_r or (r == best_r and v < best_v):
                best_v, best_r = v, r
    return best_v


def make_pricing(entries: Iterable[dict | PricingFunction]) -> list[PricingFunction]:
    """Normalize a list of config dicts or ready objects."""
    return [e if isinstance(e, PricingFunction) else PricingFunction.from_config(e) for e in entries]


def eval_many(g: PricingFunction, xs: Sequence[float] | np.ndarray) -> np.ndarray:
    return np.array([eval_g(g, float(x)) for x in np.ravel(xs)]).reshape(np.shape(xs))
