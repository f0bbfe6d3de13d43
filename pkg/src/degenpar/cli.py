"""Command-line driver: one config file per experiment.

    degenpar solve --config examples/sharp.toml --out runs/sharp
    degenpar analyze --config cfg.toml --override analysis.theta=1.5

Exit codes: 0 success, 2 config or input error, 3 numerical failure
(CFL or divergence), 4 a check or audit did not pass.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (fit_growth_exponent, nondegeneracy_profile, oscillation, plane_detrended_osc)
from .barriers import (NonDegBarrier, TimeHolderBarrier, admissible_c, time_barrier_constants,
                       verify_supersolution)
from .compare import comparison_audit, perron_bracket, random_ordered_pairs, stability_sweep
from .core import (CoefficientField, Exponents, IntrinsicCylinder, SpaceTimeField, cylinder_space_time_mask,
                   make_grid)
from .dpp import DppConfig, dpp_solve, fd_time
from .exact import affine_solution, heat_reference, sharp_example
from .fdsolver import NumericalFailure, SolveConfig, cfl_dt, solve_cauchy_dirichlet
from .io import (ConfigError, grid_from_config, load_config, read_field_csv, write_field_csv,
                 write_summary, write_table)
from .operator import RegularizationPolicy, grid_lipschitz, residual

log = logging.getLogger("degenpar")


class CheckFailed(RuntimeError):
    """A verification ran to completion and its verdict was negative."""


# ---------------------------------------------------------------------------
# config -> objects

def _reference(cfg):
    name = cfg.get("problem.reference", "none")
    if name == "sharp":
        return sharp_example(cfg.get("problem.n", cfg.get("grid.dim", 2)), float(cfg.get("problem.p", 3.0)),
                             float(cfg.get("problem.q_tilde", 2.0)))
    if name == "heat":
        return heat_reference(cfg.get("problem.k", [1.0] * cfg.get("grid.dim", 1)))
    if name == "affine":
        return affine_solution(cfg.get("problem.b", [1.0] * cfg.get("grid.dim", 1)),
                               float(cfg.get("problem.c", 0.0)), _exponents(cfg), _coeff(cfg))
    if name == "none":
        return None
    raise ConfigError(f"problem.reference must be sharp, heat, affine or none, got {name!r}")


def _exponents(cfg) -> Exponents:
    return Exponents(float(cfg.get("exps.p", 2.0)), float(cfg.get("exps.p_tilde", 0.0)),
                     float(cfg.get("exps.q_tilde", 0.0)))


def _coeff(cfg) -> CoefficientField:
    return CoefficientField.constant(float(cfg.get("coeff.a", 1.0)))


def _data(value, grid, what):
    if isinstance(value, str):
        field = read_field_csv(value)
        if field.grid.shape != grid.shape:
            raise ConfigError(f"{what} CSV {value} has grid shape {field.grid.shape}, expected {grid.shape}")
        return SpaceTimeField(grid, field.values, field.valid)
    return float(value)


def _problem(cfg, grid):
    """(g, f, coeff, exps, reference or None)."""
    ref = _reference(cfg)
    if ref is not None:
        return ref.u, ref.f, ref.coeff, ref.exps, ref
    if "data.g" not in cfg:
        raise ConfigError("problem.reference = none needs data.g")
    return (_data(cfg["data.g"], grid, "data.g"), _data(cfg.get("data.f", 0.0), grid, "data.f"),
            _coeff(cfg), _exponents(cfg), None)


def _epsilon_policy(cfg, h, exps):
    e = cfg.get("solver.epsilon", "default")
    if e == "default":
        return RegularizationPolicy.default_for(h)
    if e == "intrinsic":
        return RegularizationPolicy.intrinsic(h, exps)
    if isinstance(e, str):
        raise ConfigError(f"solver.epsilon must be a number, 'default' or 'intrinsic', got {e!r}")
    return RegularizationPolicy(float(e))


def _solve_config(cfg, h, exps) -> SolveConfig:
    kw = dict(reg=_epsilon_policy(cfg, h, exps))
    for key, name in [("solver.cfl_safety", "cfl_safety"), ("solver.max_steps", "max_steps"),
                      ("solver.grad_cap", "grad_cap"), ("solver.auto_clamp", "auto_clamp"),
                      ("solver.divergence_cap", "divergence_cap")]:
        if key in cfg:
            kw[name] = cfg[key]
    return SolveConfig(**kw)


def _ref_error(ref, field, far=None):
    exact = ref.sample(field.grid).values
    use = np.broadcast_to(field.grid.mask(), field.grid.shape)
    if field.valid is not None:
        use = use & field.valid
    err = np.abs(field.values - exact)
    out = {"sup_error": float(err[use].max())}
    if far is not None:
        away = use & (field.grid.radius_from(np.zeros(field.grid.dim)) >= far - 1e-12)[None]
        out["sup_error_far"] = float(err[away].max()) if away.any() else float("nan")
    return out


# ---------------------------------------------------------------------------
# subcommands

def cmd_solve(cfg, out: Path):
    grid = grid_from_config(cfg)
    g, f, coeff, exps, ref = _problem(cfg, grid)
    config = _solve_config(cfg, grid.h, exps)
    sol = solve_cauchy_dirichlet(g, f, coeff, exps, grid, config)
    write_field_csv(out / "field.csv", sol)
    info = dict(sol.info)
    info["cfl_dt_at_cap"] = cfl_dt(grid.h, exps, coeff.a_plus, config, grid.dim, info["grad_cap"])
    info["achieved_cfl"] = info["dt_max"] / info["cfl_dt_at_cap"]
    if ref is not None:
        info.update(_ref_error(ref, sol, 4 * grid.h))
    write_summary(out / "summary.txt", info)
    return info


def cmd_dpp(cfg, out: Path):
    for key in ("dpp.eps", "dpp.p"):
        if key not in cfg:
            raise ConfigError(f"missing {key}")
    eps = float(cfg["dpp.eps"])
    dim = cfg.get("dpp.n", cfg.get("grid.dim", 1))
    dc = DppConfig(eps, float(cfg["dpp.p"]), dim, cfg.get("dpp.domain_radius"))
    grid = make_grid(dim, float(cfg["grid.R"]), float(cfg["grid.h"]), dc.dt, float(cfg.get("grid.t_begin", 0.0)),
                     float(cfg["grid.t_end"]), cfg.get("grid.domain", "ball"))
    ref = _reference(cfg)
    remap = cfg.get("dpp.time_remap", True)
    if ref is not None:
        def g(x, t):
            return ref.u(x, fd_time(t, dim, dc.p) if remap else t)
    else:
        if "data.g" not in cfg:
            raise ConfigError("dpp needs problem.reference or data.g")
        g = _data(cfg["data.g"], grid, "data.g")
    sol = dpp_solve(g, grid, dc)
    write_field_csv(out / "field.csv", sol)
    info = dict(eps=eps, p=dc.p, n=dim, steps=grid.nt - 1, dt=dc.dt)
    if ref is not None:
        exact = np.stack([ref.u(grid.points(), fd_time(t, dim, dc.p) if remap else t) for t in grid.times()])
        info["sup_error"] = float(np.abs(sol.values - exact)[sol.valid].max())
    write_summary(out / "summary.txt", info)
    return info


def _analysis_field(cfg):
    src = cfg.get("analysis.source")
    if src is None:
        raise ConfigError("missing analysis.source (reference name or CSV path)")
    if src in ("sharp", "heat", "affine"):
        grid = grid_from_config(cfg)
        if "analysis.dt" in cfg:
            grid = make_grid(grid.dim, grid.spatial_radius, grid.h, float(cfg["analysis.dt"]), grid.t_begin,
                             grid.t_end, grid.domain)
        ref = _reference(dict(cfg, **{"problem.reference": src}))
        return ref.sample(grid), ref.exps
    return read_field_csv(src), None


def analyze_field(field, center, theta, radii):
    """Per-radius measurements about ``center`` and the growth fit.

    Rows are (r, osc, detrended_osc, boundary_sup, growth) where growth is
    sup |u - u(center)| over Q_{r,theta}; the fit uses growth against r
    with the 4h resolution floor.
    """
    grid = field.grid
    prof = nondegeneracy_profile(field, center, theta, radii)
    sidx = grid.space_index(np.asarray(center[0], dtype=float))
    uc = field.values[(grid.time_index(center[1]),) + sidx]
    use = np.broadcast_to(grid.mask(), grid.shape) if field.valid is None else field.valid & grid.mask()[None]
    rows = []
    for r, bsup in zip(radii, prof.sups):
        cyl = IntrinsicCylinder(center, r, theta)
        m = cylinder_space_time_mask(grid, cyl) & use
        growth = float(np.max(np.abs(field.values[m] - uc)))
        rows.append((r, oscillation(field, cyl), plane_detrended_osc(field, cyl).osc, float(bsup), growth))
    fit = fit_growth_exponent(radii, [row[4] for row in rows], 4 * grid.h)
    return rows, fit, prof


def cmd_analyze(cfg, out: Path):
    field, exps = _analysis_field(cfg)
    grid = field.grid
    radii = [float(r) for r in cfg.get("analysis.radii", [])]
    if len(radii) < 3:
        raise ConfigError(f"analysis.radii needs at least 3 radii, got {len(radii)}")
    if "analysis.theta" in cfg:
        theta = float(cfg["analysis.theta"])
    elif exps is not None:
        theta = exps.theta_star
    else:
        raise ConfigError("analysis.theta is required for CSV input")
    x0 = [float(v) for v in cfg.get("analysis.center", [0.0] * grid.dim)]
    center = (tuple(x0), float(cfg.get("analysis.center_t", grid.times()[-1])))
    rows, fit, prof = analyze_field(field, center, theta, radii)
    write_table(out / "radii.csv", ["r", "osc", "detrended_osc", "boundary_sup", "growth"], rows)
    osc_fit = fit_growth_exponent(radii, [row[1] for row in rows], 4 * grid.h)
    info = dict(theta=theta, slope=fit.slope, intercept=fit.intercept, r_squared=fit.r_squared,
                floor=fit.floor, radii_used=len(fit.radii), osc_slope=osc_fit.slope,
                dropped=list(fit.dropped), center_extremum=prof.extremal)
    write_summary(out / "fit.txt", info)
    lo, hi = cfg.get("analysis.slope_min", -math.inf), cfg.get("analysis.slope_max", math.inf)
    if not lo <= fit.slope <= hi:
        raise CheckFailed(f"fitted slope {fit.slope:.4f} outside [{lo}, {hi}]")
    return info


def verify_example(n, p, q_tilde, hs, T=0.25, R=0.5, grad_cap=1.3, epsilon="intrinsic"):
    """Convergence table for the sharp example: one row per h."""
    ref = sharp_example(n, p, q_tilde)
    rows = []
    for h in hs:
        grid = make_grid(n, R, h, T / 4, -T, 0.0)
        reg = (RegularizationPolicy.intrinsic(h, ref.exps) if epsilon == "intrinsic"
               else RegularizationPolicy.default_for(h) if epsilon == "default" else RegularizationPolicy(epsilon))
        sol = solve_cauchy_dirichlet(ref.u, ref.f, ref.coeff, ref.exps, grid, SolveConfig(reg=reg, grad_cap=grad_cap))
        err = _ref_error(ref, sol, 4 * h)
        # residual of the exact solution on a fine time grid, away from the origin
        fine = make_grid(n, R, h, h * h, -h * h, 0.0)
        res = residual(ref.sample(fine), ref.f, ref.coeff, ref.exps, reg)
        away = res.valid & (fine.radius_from(np.zeros(n)) >= 4 * h - 1e-12)[None]
        rows.append(dict(h=h, sup_error=err["sup_error"], sup_error_far=err["sup_error_far"],
                         residual_far=float(np.abs(res.values[away]).max()), steps=sol.info["steps"],
                         runtime=sol.info["runtime"]))
    for prev, row in zip(rows, rows[1:]):
        row["ratio"] = prev["sup_error"] / row["sup_error"]
    return rows


def cmd_verify_example(cfg, out: Path):
    hs = [float(h) for h in cfg.get("verify.hs", [1 / 32, 1 / 64, 1 / 128])]
    rows = verify_example(cfg.get("verify.n", 2), float(cfg.get("verify.p", 3.0)),
                          float(cfg.get("verify.q_tilde", 2.0)), hs, float(cfg.get("verify.T", 0.25)),
                          float(cfg.get("verify.R", 0.5)), float(cfg.get("solver.grad_cap", 1.3)),
                          cfg.get("solver.epsilon", "intrinsic"))
    cols = ["h", "sup_error", "sup_error_far", "ratio", "residual_far", "steps", "runtime"]
    write_table(out / "convergence.csv", cols, [[r.get(c, float("nan")) for c in cols] for r in rows])
    min_ratio = float(cfg.get("verify.min_ratio", 1.5))
    max_error = float(cfg.get("verify.max_error", 5e-2))
    bad = [r for r in rows[1:] if r["ratio"] < min_ratio]
    if bad or rows[-1]["sup_error_far"] > max_error:
        raise CheckFailed(f"convergence check failed: ratios {[round(r['ratio'], 3) for r in rows[1:]]}, "
                          f"final far error {rows[-1]['sup_error_far']:.3g}")
    return rows


def barrier_check(n=2, p=3.0, p_tilde=1.0, q_tilde=1.0, a_plus=1.0, c0=-1.0, c_scale=1.0, h=1 / 32, dt=1 / 64):
    """Verify the canonical non-degeneracy barrier on a (2/h + 1)^n box over t in [-1, 0]."""
    exps = Exponents(p, p_tilde, q_tilde)
    c = admissible_c(n, exps, a_plus, abs(c0)) * c_scale
    grid = make_grid(n, 1.0, h, dt, -1.0, 0.0, domain="box")
    barrier = NonDegBarrier.canonical(exps, c, center=((0.0,) * n, 0.0))
    phi = SpaceTimeField.from_function(grid, barrier)
    report = verify_supersolution(phi, c0, CoefficientField.constant(a_plus), exps,
                                  RegularizationPolicy.default_for(h))
    return c, report


def cmd_barrier(cfg, out: Path):
    c, report = barrier_check(cfg.get("barrier.n", 2), float(cfg.get("barrier.p", 3.0)),
                              float(cfg.get("barrier.p_tilde", 1.0)), float(cfg.get("barrier.q_tilde", 1.0)),
                              float(cfg.get("barrier.a_plus", 1.0)), float(cfg.get("barrier.c0", -1.0)),
                              float(cfg.get("barrier.c_scale", 1.0)), float(cfg.get("barrier.h", 1 / 32)),
                              float(cfg.get("barrier.dt", 1 / 64)))
    info = dict(c=c, verdict="PASS" if report.passed else "FAIL", min_margin=report.min_margin,
                tol=report.tol, checked=report.checked, witness=report.witness)
    write_summary(out / "barrier.txt", info)
    expect = cfg.get("barrier.expect", "pass").lower()
    if expect not in ("pass", "fail"):
        raise ConfigError(f"barrier.expect must be pass or fail, got {expect!r}")
    if report.passed != (expect == "pass"):
        raise CheckFailed(f"barrier verdict {info['verdict']} but expected {expect.upper()}: {report}")
    return info


def audit_pairs(pairs, seed, grid, exps, coeff, config, shift_max=0.2, bump_max=1.0, lift_max=0.5):
    reports = []
    for g1, f1, g2, f2 in random_ordered_pairs(seed, pairs, grid.dim, shift_max, bump_max, lift_max):
        reports.append(comparison_audit(g1, f1, g2, f2, coeff, exps, grid, config))
    return reports


def _bracket_heat(cfg, grid, config):
    ref = heat_reference(cfg.get("problem.k", [1.0] * grid.dim))
    g = ref.u
    gv = ref.sample(grid).values
    pb = np.zeros(grid.shape, dtype=bool)
    pb[:] = grid.boundary_mask()
    pb[0] = grid.mask()
    low = float(gv[pb].min())
    pts = grid.points()
    lip = grid_lipschitz(gv[0], grid.h, grid.mask())
    sup_u = float(np.abs(gv[np.broadcast_to(grid.mask(), grid.shape)]).max())
    M1, M2 = time_barrier_constants(lip, sup_u, 1.0, ref.exps, ref.coeff.a_plus, grid.dim, ref.exps.p, 0.0)
    bar = TimeHolderBarrier(1.0, M1, M2, grid.t_begin)
    bv = np.stack([bar(pts, t) for t in grid.times()])
    lift = max(0.0, float((gv - bv)[pb].max()))
    sub = SpaceTimeField(grid, np.full(grid.shape, low))
    sup = SpaceTimeField(grid, bv + lift)
    return perron_bracket(sub, sup, g, ref.f, ref.coeff, ref.exps, grid, config)


def cmd_compare(cfg, out: Path):
    grid = grid_from_config(cfg)
    mode = cfg.get("compare.mode", "audit")
    if mode == "audit":
        coeff, exps = _coeff(cfg), _exponents(cfg)
        config = _solve_config(cfg, grid.h, exps)
        reports = audit_pairs(cfg.get("compare.pairs", 20), cfg.get("compare.seed", 0), grid, exps, coeff, config,
                              cfg.get("compare.shift_max", 0.2), cfg.get("compare.bump_max", 1.0),
                              cfg.get("compare.lift_max", 0.5))
        rows = [(i, r.violation, r.tol, r.steps, "PASS" if r.passed else "FAIL") for i, r in enumerate(reports)]
        write_table(out / "audit.csv", ["pair", "violation", "tol", "steps", "verdict"], rows)
        info = dict(pairs=len(reports), failures=sum(not r.passed for r in reports),
                    worst=max(r.violation for r in reports))
        write_summary(out / "audit.txt", info)
        if info["failures"]:
            raise CheckFailed(f"{info['failures']} of {len(reports)} ordered pairs violated comparison")
        return info
    if mode == "bracket":
        report = _bracket_heat(cfg, grid, _solve_config(cfg, grid.h, Exponents(2.0)))
        info = dict(verdict="PASS" if report.passed else "FAIL", lower_margin=report.lower_margin,
                    upper_margin=report.upper_margin, tol=report.tol, witness=report.witness)
        write_summary(out / "bracket.txt", info)
        if not report.passed:
            raise CheckFailed(str(report))
        return info
    raise ConfigError(f"compare.mode must be audit or bracket, got {mode!r}")


def cmd_sweep(cfg, out: Path):
    grid = grid_from_config(cfg)
    g, f, coeff, exps, _ = _problem(cfg, grid)
    deltas = [float(d) for d in cfg.get("sweep.deltas", [0.1, 0.05, 0.025])]
    curve = stability_sweep(g, f, coeff, exps, grid, deltas, _solve_config(cfg, grid.h, exps),
                            cfg.get("sweep.perturb", "both"))
    write_table(out / "sweep.csv", ["delta", "error"], list(zip(curve.deltas.tolist(), curve.errors.tolist())))
    info = dict(monotone=curve.monotone, errors=curve.errors.tolist())
    write_summary(out / "sweep.txt", info)
    if not curve.monotone:
        raise CheckFailed(str(curve))
    return info


COMMANDS = {"solve": cmd_solve, "dpp": cmd_dpp, "analyze": cmd_analyze, "verify-example": cmd_verify_example,
            "barrier": cmd_barrier, "compare": cmd_compare, "sweep": cmd_sweep}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="degenpar", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, type=Path)
        sp.add_argument("--out", type=Path, default=Path("out"))
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
        sp.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    warnings.simplefilter("default")
    if args.threads > 1:
        # the march kernels are serial; this only affects numba's parallel pool
        import numba
        numba.set_num_threads(min(args.threads, numba.config.NUMBA_NUM_THREADS))
    try:
        cfg = load_config(args.config, args.override)
        args.out.mkdir(parents=True, exist_ok=True)
        t0 = time.perf_counter()
        info = COMMANDS[args.command](cfg, args.out)
    except (ConfigError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except NumericalFailure as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3
    except CheckFailed as err:
        print(f"check failed: {err}", file=sys.stderr)
        return 4
    if isinstance(info, dict):
        for k, v in info.items():
            print(f"{k} = {v}")
    else:
        for row in info:
            print(", ".join(f"{k} = {v:.6g}" if isinstance(v, float) else f"{k} = {v}" for k, v in row.items()))
    print(f"wrote {args.out} in {time.perf_counter() - t0:.2f}s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
