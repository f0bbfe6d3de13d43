"""CSV fields and experiment configuration files.

Fields are written one row per usable node: ``x[,y],t,u`` with 17
significant digits. Configs are TOML documents; tables and dotted keys are
flattened to ``section.key`` and checked against ``SCHEMA``.
"""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .core import SpaceTimeField, SpaceTimeGrid, make_grid


class ConfigError(ValueError):
    """Bad config file, unknown key or ill-typed value."""


# ---------------------------------------------------------------------------
# CSV

def write_field_csv(path, field: SpaceTimeField, name: str = "u") -> int:
    """Write usable nodes of ``field``; returns the number of rows."""
    grid = field.grid
    use = np.broadcast_to(grid.mask(), grid.shape)
    if field.valid is not None:
        use = use & field.valid
    idx = np.argwhere(use)
    coords = grid.points()[tuple(idx[:, 1:].T)]
    table = np.column_stack([coords, grid.times()[idx[:, 0]], field.values[use]])
    header = ",".join(["x", "y"][:grid.dim] + ["t", name])
    np.savetxt(path, table, fmt="%.17g", delimiter=",", header=header, comments="")
    return len(idx)


def _axis_step(vals: np.ndarray, what: str) -> float:
    u = np.unique(vals)
    if len(u) < 2:
        raise ValueError(f"CSV needs at least two distinct {what} values")
    d = np.diff(u)
    step = float(d.min())
    if not np.allclose(d / step, np.round(d / step), atol=1e-6):
        raise ValueError(f"{what} values do not lie on a uniform lattice")
    return step


def read_field_csv(path) -> SpaceTimeField:
    """Rebuild a field from ``write_field_csv`` output.

    The grid is a box symmetric about the origin spanning the largest
    coordinate present; nodes missing from the file are marked invalid.
    """
    with open(path, newline="") as fh:
        header = [h.strip() for h in fh.readline().split(",")]
        rows = np.loadtxt(fh, delimiter=",", ndmin=2)
    if header[:1] != ["x"] or len(header) not in (3, 4) or header[-2] != "t":
        raise ValueError(f"{path}: expected columns x[,y],t,<value>, got {header}")
    if rows.size == 0:
        raise ValueError(f"{path}: no data rows")
    dim = len(header) - 2
    xs, ts, vs = rows[:, :dim], rows[:, dim], rows[:, dim + 1]
    h = _axis_step(xs.reshape(-1), "coordinate")
    R = float(np.max(np.abs(xs)))
    tu = np.unique(ts)
    dt = _axis_step(ts, "time") if len(tu) > 1 else 1.0
    grid = make_grid(dim, R, h, dt, float(tu[0]), float(tu[-1]), domain="box")
    values = np.zeros(grid.shape)
    valid = np.zeros(grid.shape, dtype=bool)
    k = np.rint((ts - grid.t_begin) / dt).astype(int)
    ij = np.rint((xs + R) / h).astype(int)
    idx = (k,) + tuple(ij[:, d] for d in range(dim))
    values[idx] = vs
    valid[idx] = True
    return SpaceTimeField(grid, values, valid)


def write_table(path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(f"{v:.17g}" if isinstance(v, float) else str(v) for v in r) + "\n")


def write_summary(path, items: dict):
    with open(path, "w") as fh:
        for k, v in items.items():
            fh.write(f"{k} = {v}\n")


# ---------------------------------------------------------------------------
# config

NUM = (int, float)
SCHEMA = {
    # problem definition
    "problem.reference": str, "problem.n": int, "problem.p": NUM, "problem.q_tilde": NUM,
    "problem.k": list, "problem.b": list, "problem.c": NUM,
    "exps.p": NUM, "exps.p_tilde": NUM, "exps.q_tilde": NUM,
    "coeff.a": NUM,
    "data.g": (str, int, float), "data.f": (str, int, float),
    # grid
    "grid.dim": int, "grid.R": NUM, "grid.h": NUM, "grid.dt": NUM, "grid.t_begin": NUM,
    "grid.t_end": NUM, "grid.domain": str,
    # explicit solver
    "solver.epsilon": (str, int, float), "solver.cfl_safety": NUM, "solver.max_steps": int,
    "solver.grad_cap": NUM, "solver.auto_clamp": bool, "solver.divergence_cap": NUM,
    # DPP
    "dpp.eps": NUM, "dpp.p": NUM, "dpp.n": int, "dpp.domain_radius": NUM, "dpp.time_remap": bool,
    # analysis
    "analysis.source": str, "analysis.center": list, "analysis.center_t": NUM, "analysis.theta": NUM,
    "analysis.radii": list, "analysis.slope_min": NUM, "analysis.slope_max": NUM,
    "analysis.dt": NUM,
    # golden example
    "verify.n": int, "verify.p": NUM, "verify.q_tilde": NUM, "verify.hs": list, "verify.T": NUM,
    "verify.R": NUM, "verify.min_ratio": NUM, "verify.max_error": NUM, "verify.far": NUM,
    # barrier
    "barrier.n": int, "barrier.p": NUM, "barrier.p_tilde": NUM, "barrier.q_tilde": NUM,
    "barrier.a_plus": NUM, "barrier.c0": NUM, "barrier.c_scale": NUM, "barrier.expect": str,
    "barrier.h": NUM, "barrier.dt": NUM,
    # comparison harnesses
    "compare.mode": str, "compare.pairs": int, "compare.seed": int, "compare.shift_max": NUM,
    "compare.bump_max": NUM, "compare.lift_max": NUM,
    "sweep.deltas": list, "sweep.perturb": str,
}


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _line_of(text: str, key: str) -> int:
    leaf = re.escape(key.split(".")[-1])
    for n, line in enumerate(text.splitlines(), 1):
        if re.match(rf"\s*([\w.]+\.)?{leaf}\s*=", line):
            return n
    return 0


def _check_type(key, value, text):
    want = SCHEMA[key]
    types = want if isinstance(want, tuple) else (want,)
    # bool is an int subclass; only accept it where bool is asked for
    if (isinstance(value, bool) and bool not in types) or not isinstance(value, types):
        names = "/".join(t.__name__ for t in types)
        raise ConfigError(f"line {_line_of(text, key)}: {key} must be {names}, got {value!r}")


def parse_value(raw: str):
    """TOML scalar/array if it parses, else the bare string."""
    try:
        return tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        return raw


def parse_config(text: str, overrides=()) -> dict:
    """Flat ``{"section.key": value}`` from TOML text plus ``KEY=VALUE`` overrides."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"config parse error: {err}") from None
    cfg = _flatten(raw)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not KEY=VALUE")
        k, v = item.split("=", 1)
        cfg[k.strip()] = parse_value(v.strip())
    for key, value in cfg.items():
        if key not in SCHEMA:
            line = _line_of(text, key)
            where = f"line {line}" if line else "override"
            raise ConfigError(f"{where}: unknown key {key!r}")
        _check_type(key, value, text)
    return cfg


def load_config(path, overrides=()) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from None
    return parse_config(text, overrides)


def grid_from_config(cfg: dict) -> SpaceTimeGrid:
    need = ["grid.dim", "grid.R", "grid.h", "grid.dt", "grid.t_begin", "grid.t_end"]
    missing = [k for k in need if k not in cfg]
    if missing:
        raise ConfigError(f"missing grid keys: {', '.join(missing)}")
    try:
        return make_grid(cfg["grid.dim"], float(cfg["grid.R"]), float(cfg["grid.h"]), float(cfg["grid.dt"]),
                         float(cfg["grid.t_begin"]), float(cfg["grid.t_end"]), cfg.get("grid.domain", "ball"))
    except ValueError as err:
        raise ConfigError(f"grid: {err}") from None


__all__ = ["ConfigError", "SCHEMA", "write_field_csv", "read_field_csv", "write_table", "write_summary",
           "parse_config", "load_config", "parse_value", "grid_from_config"]
