"""Command line interface: ``switchtr {solve,check-gradient,sweep,subproblem}``.

Exit codes: 0 on success (for ``solve`` this includes stopping at the
iteration limit), 1 on a failed check or a numerical error, 2 on usage or
configuration errors and 3 when the trust-region radius fell below its floor.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import io
from .config import ConfigError, apply_override, build_problem, build_tr_config, load_config
from .dynamics import NumericalBlowup, forward_state, gradient_check, random_admissible
from .grid import ControlGrid
from .subproblem import BRUTE_FORCE_MAX_CELLS, brute_force_subproblem, build_tables, extract_solution
from .trust_region import RADIUS_FLOOR, solve

log = logging.getLogger("switchtr")

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_RADIUS_FLOOR = 3

GRADIENT_TOL = 1e-6
GRADIENT_SAMPLES = 10

STATE_NAMES = {"decay": ("y",), "sir": ("S", "I", "R")}


class UsageError(Exception):
    pass


def _load(args) -> dict:
    cfg = load_config(args.config)
    for item in args.override or ():
        cfg = apply_override(cfg, item)
    return cfg


def _out_dir(args, cfg: dict) -> Path:
    return Path(args.out if args.out is not None else cfg["output"]["dir"])


def _initial(cfg: dict, spec):
    ctrl = cfg["initial"]["control"]
    if ctrl == "zero":
        return spec.zero_control()
    return io.read_control(ctrl, spec.grid)


def _publish(out: Path, files: dict) -> None:
    """Write all artifacts to a scratch directory first, then move them in place."""
    out.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory(dir=out) as tmp:
        tmp = Path(tmp)
        for name, writer in files.items():
            writer(tmp / name)
        for name in files:
            os.replace(tmp / name, out / name)


def _progress_logger(every: int):
    if every <= 0:
        return None

    def cb(rec, u):
        if rec.iter % every == 0:
            log.info("iter %d  J=%.10g  pred=%.3e  ared=%.3e  delta=%.3e  budget=%d  %s",
                     rec.iter, rec.J, rec.pred, rec.ared, rec.delta, rec.budget,
                     "accepted" if rec.accepted else "rejected")
    return cb


def _dump_blowup(out: Path, spec, exc: NumericalBlowup) -> None:
    if exc.control is None:
        return
    out.mkdir(parents=True, exist_ok=True)
    path = out / "blowup_control.csv"
    io.write_control(path, ControlGrid(spec.grid, exc.control))
    print(f"offending control written to {path}", file=sys.stderr)


def cmd_solve(args) -> int:
    cfg = _load(args)
    spec = build_problem(cfg)
    tr = build_tr_config(cfg)
    out = _out_dir(args, cfg)
    u0 = _initial(cfg, spec)
    try:
        rep = solve(spec, u0, tr, _progress_logger(cfg["output"]["log_every"]))
    except NumericalBlowup as exc:
        print(f"error: {exc}", file=sys.stderr)
        _dump_blowup(out, spec, exc)
        return EXIT_FAIL
    states = forward_state(spec, rep.u)
    summary = dict(rep.summary())
    summary["budget_max"] = tr.budget_max
    summary["config"] = cfg
    names = STATE_NAMES[spec.variant]
    _publish(out, {
        "iterations.csv": lambda p: io.write_iterations(p, rep.records),
        "control.csv": lambda p: io.write_control(p, rep.u),
        "state.csv": lambda p: io.write_state(p, spec.grid, states, names),
        "summary.json": lambda p: io.write_summary(p, summary),
    })
    print(f"{rep.reason}: J = {rep.J!r}, c_prox = {rep.criticality.c_prox:.3e}, "
          f"c_switch = {rep.criticality.c_switch:.3e}, {rep.iterations} iterations, "
          f"{rep.wall_time:.2f} s -> {out}")
    return EXIT_RADIUS_FLOOR if rep.reason == RADIUS_FLOOR else EXIT_OK


def cmd_check_gradient(args) -> int:
    cfg = _load(args)
    spec = build_problem(cfg)
    rng = np.random.default_rng(cfg["seed"])
    worst = 0.0
    for _ in range(GRADIENT_SAMPLES):
        u = random_admissible(rng, spec.pricing, spec.grid.n_steps)
        worst = max(worst, gradient_check(spec, u))
    ok = worst <= GRADIENT_TOL
    print(f"max relative error over {GRADIENT_SAMPLES} random controls: {worst:.3e} "
          f"({'pass' if ok else 'FAIL'}, tolerance {GRADIENT_TOL:g})")
    return EXIT_OK if ok else EXIT_FAIL


def _parse_grids(text: str | None, cfg: dict) -> list[int]:
    if text is None:
        return list(cfg["sweep"]["grids"])
    try:
        grids = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise UsageError(f"--grids expects comma separated integers, got {text!r}") from None
    if not grids or any(n < 1 for n in grids):
        raise UsageError("--grids needs at least one positive grid size")
    return grids


def _sweep_one(cfg: dict, n_steps: int) -> dict:
    cfg = apply_override(cfg, f"problem.n_steps={n_steps}")
    spec = build_problem(cfg)
    tr = build_tr_config(cfg)
    t = time.perf_counter()
    rep = solve(spec, _initial(cfg, spec), tr)
    return {
        "N_T": n_steps,
        "budget_max": tr.budget_max,
        "iterations": rep.iterations,
        "time": time.perf_counter() - t,
        "J": rep.J,
        "c_prox": rep.criticality.c_prox,
        "c_switch": rep.criticality.c_switch,
        "reason": rep.reason,
    }


def cmd_sweep(args) -> int:
    cfg = _load(args)
    grids = _parse_grids(args.grids, cfg)
    out = _out_dir(args, cfg)
    if args.parallel and len(grids) > 1:
        with ProcessPoolExecutor() as pool:
            rows = list(pool.map(_sweep_one, [cfg] * len(grids), grids))
    else:
        rows = [_sweep_one(cfg, n) for n in grids]
    for r in rows:
        print(f"N_T={r['N_T']:>6}  budget={r['budget_max']:>5}  iterations={r['iterations']:>6}  "
              f"time={r['time']:8.2f}s  J={r['J']:.6g}  c_prox={r['c_prox']:.3e}  "
              f"c_switch={r['c_switch']:.4f}  ({r['reason']})")
    _publish(out, {
        "sweep.csv": lambda p: io.write_sweep(p, rows),
        "summary.json": lambda p: io.write_summary(p, {"runs": rows, "config": cfg}),
    })
    return EXIT_OK


def cmd_subproblem(args) -> int:
    try:
        inst, budget = io.load_instance(args.instance)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read instance {args.instance}: {exc}") from None
    tables = build_tables(inst)
    sol = extract_solution(tables, inst, budget)
    pattern = "\n".join("".join(str(int(b)) for b in row) for row in sol.pattern)
    print(f"dp_value = {sol.value!r}")
    print(f"flips = {sol.flips}")
    print(f"pattern =\n{pattern}")
    if args.dump_tables:
        io.write_tables(args.dump_tables, tables)
    if not args.brute_force:
        return EXIT_OK
    cells = inst.u.shape[0] * inst.u.shape[1]
    if cells > BRUTE_FORCE_MAX_CELLS:
        print(f"brute force refused: {cells} cells exceed the limit of {BRUTE_FORCE_MAX_CELLS}",
              file=sys.stderr)
        return EXIT_USAGE
    _, bf_value = brute_force_subproblem(inst, budget)
    ok = abs(bf_value - sol.value) <= 1e-10 * max(1.0, abs(bf_value))
    print(f"brute_force_value = {bf_value!r}")
    print("match: OK" if ok else "match: MISMATCH")
    return EXIT_OK if ok else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="switchtr", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("--config", required=True, help="TOML run configuration")
        p.add_argument("--override", action="append", metavar="SECTION.KEY=VALUE",
                       help="override one configuration entry (repeatable)")
        return p

    p = with_config(sub.add_parser("solve", help="run the trust-region method"))
    p.add_argument("--out", help="output directory (default: output.dir of the config)")
    p.set_defaults(func=cmd_solve)

    p = with_config(sub.add_parser("check-gradient", help="adjoint gradient vs finite differences"))
    p.set_defaults(func=cmd_check_gradient)

    p = with_config(sub.add_parser("sweep", help="solve on several grids"))
    p.add_argument("--grids", help="comma separated grid sizes, e.g. 64,128,256")
    p.add_argument("--out", help="output directory (default: output.dir of the config)")
    p.add_argument("--parallel", action="store_true", help="run the grids in separate processes")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("subproblem", help="solve one trust-region subproblem from a JSON file")
    p.add_argument("instance", help="JSON instance file")
    p.add_argument("--brute-force", action="store_true", help="compare with exhaustive search")
    p.add_argument("--dump-tables", metavar="CSV", help="write the value table as l,alpha,B,phi")
    p.set_defaults(func=cmd_subproblem)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
