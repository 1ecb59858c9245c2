"""Solve one small trust-region subproblem by dynamic programming and by enumeration.

    python3 demos/subproblem_walkthrough.py

A two-cell instance where switching on pays off only if both cells are
used, followed by the value of the model for every flip budget.
"""

from __future__ import annotations

import numpy as np

from switchtr.dynamics import DECAY_PRICING
from switchtr.grid import ControlGrid, TimeGrid
from switchtr.subproblem import ModelInstance, brute_force_profile, build_tables, extract_solution


def main() -> None:
    grid = TimeGrid(0.0, 2.0, 2)
    u = ControlGrid.zeros(grid, 1)
    inst = ModelInstance(u, np.array([[-2.0, -2.0]]), 1.0, DECAY_PRICING, 1.0, budget_cap=2)
    tables = build_tables(inst)
    brute, _ = brute_force_profile(inst)
    print("budget  dp_value  brute_force  pattern")
    for b in range(3):
        sol = extract_solution(tables, inst, b)
        print(f"{b:6d}  {sol.value:8.3f}  {brute[b]:11.3f}  {sol.pattern[0].tolist()}")

    rng = np.random.default_rng(0)
    n_t = 10
    grid = TimeGrid(0.0, 5.0, n_t)
    u = ControlGrid(grid, np.where(rng.random((1, n_t)) < 0.5, 0.0, rng.uniform(0.3, 1.0, (1, n_t))))
    inst = ModelInstance(u, rng.uniform(-3, 3, (1, n_t)), 0.5, DECAY_PRICING, 0.2, budget_cap=n_t)
    tables = build_tables(inst)
    brute, _ = brute_force_profile(inst)
    gap = max(abs(extract_solution(tables, inst, b).value - brute[b]) for b in range(n_t + 1))
    print(f"random {n_t}-cell instance, all budgets: max |dp - brute force| = {gap:.1e}")


if __name__ == "__main__":
    main()
