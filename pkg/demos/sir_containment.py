"""Two-measure SIR containment run with the shipped parameters.

    python3 demos/sir_containment.py [n_steps]

The cheap measure ends up at its upper bound over most of the outbreak and
the expensive one is only switched on around the infection peak.
"""

from __future__ import annotations

import sys

import numpy as np

from switchtr.config import apply_override, build_problem, build_tr_config, load_preset
from switchtr.dynamics import forward_state
from switchtr.grid import jump_set
from switchtr.trust_region import solve


def main(n_steps: int = 512) -> None:
    cfg = apply_override(load_preset("sir"), f"problem.n_steps={n_steps}")
    spec = build_problem(cfg)
    rep = solve(spec, None, build_tr_config(cfg))
    print(f"{rep.reason} after {rep.iterations} iterations ({rep.wall_time:.1f} s), J = {rep.J:.6g}")
    print(f"c_prox = {rep.criticality.c_prox:.2e}")

    uncontrolled = forward_state(spec, spec.zero_control())
    controlled = forward_state(spec, rep.u)
    print(f"peak infected: {uncontrolled[1].max():10.0f} without control, {controlled[1].max():10.0f} with")
    print(f"susceptible at T: {uncontrolled[0, -1]:10.0f} without control, {controlled[0, -1]:10.0f} with")

    for i, comp in enumerate(jump_set(rep.u)):
        spans = [(a.time, b.time) for a, b in zip(comp[::2], comp[1::2])]
        values = np.unique(np.round(rep.u.values[i][rep.u.values[i] > 0], 3))
        print(f"u{i + 1} on over " + ", ".join(f"[{a:.2f}, {b:.2f}]" for a, b in spans)
              + f"; active values {values.min():.3f} .. {values.max():.3f}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 512)
