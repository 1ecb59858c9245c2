"""Solve the decay identification benchmark and look at where the control switches.

    python3 demos/decay_benchmark.py [n_steps]

Prints a short iteration trace, the final jump times with the active value
next to each jump, and the switching value those values are expected to
approach as the grid is refined.
"""

from __future__ import annotations

import sys

from switchtr.config import apply_override, build_problem, build_tr_config, load_preset
from switchtr.grid import jump_set, sign_pattern, total_variation
from switchtr.pricing import switching_value
from switchtr.trust_region import solve


def main(n_steps: int = 256) -> None:
    cfg = apply_override(load_preset("decay"), f"problem.n_steps={n_steps}")
    spec = build_problem(cfg)
    tr = build_tr_config(cfg)

    def trace(rec, u):
        if rec.accepted and rec.flips:
            print(f"  iter {rec.iter:5d}  J = {rec.J:10.4f}  flips = {rec.flips:3d}  delta = {rec.delta:.3g}")

    print(f"decay benchmark on {n_steps} steps, flip budget {tr.budget_max}")
    rep = solve(spec, None, tr, trace)
    print(f"{rep.reason} after {rep.iterations} iterations ({rep.wall_time:.1f} s)")
    print(f"J = {rep.J:.6f}, c_prox = {rep.criticality.c_prox:.2e}, c_switch = {rep.criticality.c_switch:.4f}")
    print(f"TV of the sign pattern: {total_variation(sign_pattern(rep.u))}")

    u_star = switching_value(spec.pricing[0])
    print(f"switching value u* = {u_star:.6f}")
    for jp in jump_set(rep.u)[0]:
        cell = jp.index if jp.on else jp.index - 1
        kind = "on " if jp.on else "off"
        print(f"  {kind} at t = {jp.time:7.3f}, active value {rep.u.values[0, cell]:.4f}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 256)
