"""Run configuration: TOML files with sections, defaults and overrides.

A configuration is a nested dict with the sections ``problem``, ``decay``
or ``sir``, ``pricing`` (a list of tables), ``trust_region``, ``initial``
and ``sweep``.  ``resolve`` fills in defaults for everything missing and
rejects unknown keys, so a resolved config is complete and can be echoed
back verbatim into run summaries.
"""

from __future__ import annotations

import copy
from dataclasses import asdict, fields
from importlib import resources
from pathlib import Path
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .dynamics import (DECAY_PRICING, SIR_PRICING, DecayParams, ProblemSpec, SirParams,
                       decay_problem, sir_problem)
from .grid import TimeGrid
from .pricing import PricingFunction
from .trust_region import TrConfig

__all__ = [
    "ConfigError",
    "PRESETS",
    "load_config",
    "load_preset",
    "resolve",
    "apply_override",
    "default_budget",
    "build_problem",
    "build_tr_config",
]

PRESETS = ("decay", "sir")

_PROBLEM_DEFAULTS = {"variant": "decay", "t0": 0.0, "T": 140.0, "n_steps": 512, "sigma_sgn": 1.0}
_SWEEP_DEFAULTS = {"grids": [64, 128, 256, 512]}
_INITIAL_DEFAULTS = {"control": "zero"}
_OUTPUT_DEFAULTS = {"dir": "out", "log_every": 0}


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


def default_budget(n_steps: int) -> int:
    """Flip budget used when ``trust_region.budget_max`` is ``"auto"``."""
    return max(10, n_steps // 10)


def load_config(path: str | Path) -> dict:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    return resolve(raw)


def load_preset(name: str) -> dict:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {PRESETS}")
    text = resources.files("switchtr.presets").joinpath(f"{name}.cfg").read_text()
    return resolve(tomllib.loads(text))


def _dataclass_defaults(cls) -> dict:
    out = {}
    for f in fields(cls):
        out[f.name] = f.default
    return out


def _check_keys(section: str, given: dict, allowed) -> None:
    unknown = sorted(set(given) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(unknown)}")


def _merge(section: str, given: dict | None, defaults: dict) -> dict:
    given = {} if given is None else given
    if not isinstance(given, dict):
        raise ConfigError(f"[{section}] must be a table")
    _check_keys(section, given, defaults)
    out = copy.deepcopy(defaults)
    out.update(copy.deepcopy(given))
    return out


def _tomlable(value):
    """Nested tuples to lists, as TOML and JSON know only arrays."""
    if isinstance(value, tuple):
        return [_tomlable(v) for v in value]
    return value


def _decay_defaults() -> dict:
    d = {k: _tomlable(v) for k, v in _dataclass_defaults(DecayParams).items()}
    d["target_values"] = "switching"
    return d


def _sir_defaults() -> dict:
    return _dataclass_defaults(SirParams)


def _tr_defaults() -> dict:
    d = _dataclass_defaults(TrConfig)
    d["budget_max"] = "auto"
    return d


def resolve(raw: dict) -> dict:
    """Validate ``raw`` and return a complete configuration."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a table")
    _check_keys("top level", raw, ("seed", "problem", "decay", "sir", "pricing", "trust_region",
                                   "initial", "sweep", "output"))
    cfg: dict[str, Any] = {"seed": raw.get("seed", 0)}
    if isinstance(cfg["seed"], bool) or not isinstance(cfg["seed"], int) or cfg["seed"] < 0:
        raise ConfigError("seed must be a nonnegative integer")
    cfg["problem"] = _merge("problem", raw.get("problem"), _PROBLEM_DEFAULTS)
    variant = cfg["problem"]["variant"]
    if variant not in PRESETS:
        raise ConfigError(f"problem.variant must be one of {PRESETS}, got {variant!r}")
    other = "sir" if variant == "decay" else "decay"
    if other in raw:
        raise ConfigError(f"section [{other}] given for variant {variant!r}")
    cfg[variant] = _merge(variant, raw.get(variant),
                          _decay_defaults() if variant == "decay" else _sir_defaults())
    if "pricing" in raw:
        pricing = raw["pricing"]
        if not isinstance(pricing, list):
            raise ConfigError("pricing must be an array of tables")
        for k, entry in enumerate(pricing):
            _check_keys(f"pricing {k}", entry, ("a", "b", "m", "pieces"))
        cfg["pricing"] = copy.deepcopy(pricing)
    else:
        default = DECAY_PRICING if variant == "decay" else SIR_PRICING
        cfg["pricing"] = [g.to_config() for g in default]
    cfg["trust_region"] = _merge("trust_region", raw.get("trust_region"), _tr_defaults())
    cfg["initial"] = _merge("initial", raw.get("initial"), _INITIAL_DEFAULTS)
    if not isinstance(cfg["initial"]["control"], str):
        raise ConfigError('initial.control must be "zero" or the path of a control CSV')
    cfg["sweep"] = _merge("sweep", raw.get("sweep"), _SWEEP_DEFAULTS)
    grids = cfg["sweep"]["grids"]
    if not isinstance(grids, list) or not grids or not all(
            isinstance(n, int) and not isinstance(n, bool) and n >= 1 for n in grids):
        raise ConfigError("sweep.grids must be a nonempty list of positive integers")
    cfg["output"] = _merge("output", raw.get("output"), _OUTPUT_DEFAULTS)
    le = cfg["output"]["log_every"]
    if not isinstance(cfg["output"]["dir"], str) or isinstance(le, bool) or not isinstance(le, int) or le < 0:
        raise ConfigError("output.dir must be a string and output.log_every a nonnegative integer")
    # build once so that every error surfaces at load time
    build_problem(cfg)
    build_tr_config(cfg)
    return cfg


def _parse_value(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_override(cfg: dict, assignment: str) -> dict:
    """Return a re-resolved copy of ``cfg`` with ``section.key=value`` applied.

    The value is read as a TOML value; anything that does not parse is kept
    as a plain string, so ``trust_region.stopping=strict`` works unquoted.
    """
    if "=" not in assignment:
        raise ConfigError(f"override must look like section.key=value, got {assignment!r}")
    lhs, rhs = assignment.split("=", 1)
    path = lhs.strip().split(".")
    out = copy.deepcopy(cfg)
    if path == ["seed"]:
        out["seed"] = _parse_value(rhs.strip())
        return resolve(out)
    if len(path) != 2 or not all(path):
        raise ConfigError(f"override key must be section.key, got {lhs!r}")
    section, key = path
    if section not in out or not isinstance(out[section], dict):
        raise ConfigError(f"no section [{section}] to override")
    if key not in out[section]:
        raise ConfigError(f"unknown key {key!r} in [{section}]")
    out[section][key] = _parse_value(rhs.strip())
    return resolve(out)


def _float(section: str, key: str, value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{section}.{key} must be a number, got {value!r}")
    return float(value)


def build_problem(cfg: dict) -> ProblemSpec:
    prob = cfg["problem"]
    try:
        grid = TimeGrid(_float("problem", "t0", prob["t0"]), _float("problem", "T", prob["T"]),
                        int(prob["n_steps"]))
        pricing = tuple(PricingFunction.from_config(p) for p in cfg["pricing"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid problem or pricing: {exc}") from None
    sigma = _float("problem", "sigma_sgn", prob["sigma_sgn"])
    if sigma < 0:
        raise ConfigError("problem.sigma_sgn must be nonnegative")
    variant = prob["variant"]
    sec = cfg[variant]
    try:
        if variant == "decay":
            kw = {k: _float("decay", k, v) for k, v in sec.items()
                  if k not in ("target_intervals", "target_values")}
            intervals = tuple((float(lo), float(hi)) for lo, hi in sec["target_intervals"])
            tv = sec["target_values"]
            if tv == "switching":
                values = None
            elif isinstance(tv, list):
                values = tuple(float(v) for v in tv)
            else:
                raise ConfigError('decay.target_values must be "switching" or a list of numbers')
            params = DecayParams(**kw, target_intervals=intervals, target_values=values)
            if len(pricing) != 1:
                raise ConfigError("the decay problem has one control and needs one pricing entry")
            return decay_problem(grid, params, pricing, sigma)
        params = SirParams(**{k: _float("sir", k, v) for k, v in sec.items()})
        if len(pricing) != 2:
            raise ConfigError("the SIR problem has two controls and needs two pricing entries")
        return sir_problem(grid, params, pricing, sigma)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid [{variant}] parameters: {exc}") from None


def build_tr_config(cfg: dict, n_steps: int | None = None) -> TrConfig:
    """``TrConfig`` from the ``[trust_region]`` section; ``"auto"`` budgets use ``n_steps``."""
    sec = dict(cfg["trust_region"])
    n = int(cfg["problem"]["n_steps"]) if n_steps is None else int(n_steps)
    if sec["budget_max"] == "auto":
        sec["budget_max"] = default_budget(n)
    for key in ("budget_max", "max_iter"):
        v = sec[key]
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"trust_region.{key} must be an integer, got {v!r}")
    for key in ("eta", "gamma1", "gamma2", "delta0", "delta_max", "r", "tol_c", "delta_min"):
        sec[key] = _float("trust_region", key, sec[key])
    try:
        return TrConfig(**sec)
    except ValueError as exc:
        raise ConfigError(f"invalid [trust_region]: {exc}") from None


def tr_config_dict(tr: TrConfig) -> dict:
    return asdict(tr)
