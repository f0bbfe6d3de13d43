"""Grid-level harnesses for comparison, sub/supersolution bracketing and stability.

These certify properties of the discrete scheme. They do not prove
anything about the PDE; tolerances scale with the number of time steps.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .core import CoefficientField, Exponents, SpaceTimeField, SpaceTimeGrid
from .fdsolver import CFLViolation, SolveConfig, solve_cauchy_dirichlet
from .operator import grid_lipschitz, residual

MACHINE_EPS = float(np.finfo(float).eps)


def _sample(data, grid: SpaceTimeGrid) -> np.ndarray:
    """Values of a callable, field or constant at every node of ``grid``."""
    if isinstance(data, SpaceTimeField):
        if data.grid.shape != grid.shape:
            raise ValueError("field grid does not match")
        return data.values
    if callable(data):
        return SpaceTimeField.from_function(grid, data).values
    return np.full(grid.shape, float(data))


def _parabolic_boundary(grid: SpaceTimeGrid) -> np.ndarray:
    pb = np.zeros(grid.shape, dtype=bool)
    pb[:] = grid.boundary_mask()
    pb[0] = grid.mask()
    return pb


def _solve_pair(g1, f1, g2, f2, coeff, exps, grid, config):
    """Both solves on one shared step sequence.

    Without a fixed grad_cap each run would pick its own steps and their
    truncation errors would differ. The shared cap starts at 2 Lip + 1 of
    the rougher initial slice and doubles on a CFL failure.
    """
    if config.grad_cap is not None:
        return (solve_cauchy_dirichlet(g1, f1, coeff, exps, grid, config),
                solve_cauchy_dirichlet(g2, f2, coeff, exps, grid, config))
    lip = max(grid_lipschitz(_sample(g, grid)[0], grid.h, grid.mask()) for g in (g1, g2))
    cap = 2 * lip + 1
    for _ in range(5):
        cfg = replace(config, grad_cap=cap)
        try:
            return (solve_cauchy_dirichlet(g1, f1, coeff, exps, grid, cfg),
                    solve_cauchy_dirichlet(g2, f2, coeff, exps, grid, cfg))
        except CFLViolation:
            cap *= 2
    raise CFLViolation(f"no shared grad_cap up to {cap / 2:.4g} kept both runs stable")


@dataclass(frozen=True)
class AuditReport:
    violation: float
    tol: float
    steps: int
    passed: bool
    witness: tuple

    def __str__(self):
        verdict = "PASS" if self.passed else "FAIL"
        return (f"{verdict} max(u1 - u2) = {self.violation:.6g}, tol = {self.tol:.3g} "
                f"({self.steps} steps), worst node {self.witness}")


def comparison_audit(g1, f1, g2, f2, coeff: CoefficientField, exps: Exponents,
                     grid: SpaceTimeGrid, config: SolveConfig = SolveConfig()) -> AuditReport:
    """Solve with both data sets and report max(u1 - u2) over the domain.

    Requires g1 <= g2 on the parabolic boundary and f1 <= f2 everywhere,
    checked at the grid nodes. PASS iff the violation is at most
    10 * machine-eps * steps.
    """
    pb = _parabolic_boundary(grid)
    dom = np.broadcast_to(grid.mask(), grid.shape)
    if np.any(_sample(g1, grid)[pb] > _sample(g2, grid)[pb]):
        raise ValueError("boundary data are not ordered: g1 > g2 somewhere on the parabolic boundary")
    if np.any(_sample(f1, grid)[dom] > _sample(f2, grid)[dom]):
        raise ValueError("sources are not ordered: f1 > f2 somewhere")
    u1, u2 = _solve_pair(g1, f1, g2, f2, coeff, exps, grid, config)
    steps = max(u1.info["steps"], u2.info["steps"])
    diff = np.where(dom, u1.values - u2.values, -np.inf)
    idx = np.unravel_index(int(np.argmax(diff)), diff.shape)
    violation = float(diff[idx])
    tol = 10 * MACHINE_EPS * max(steps, 1)
    return AuditReport(violation, tol, steps, violation <= tol,
                       (tuple(int(i) for i in idx[1:]), int(idx[0])))


@dataclass(frozen=True)
class BracketReport:
    passed: bool
    lower_margin: float
    upper_margin: float
    tol: float
    witness: Optional[tuple]

    def __str__(self):
        verdict = "PASS" if self.passed else "FAIL"
        where = "" if self.witness is None else f"; worst node {self.witness}"
        return (f"{verdict} min(u - sub) = {self.lower_margin:.6g}, min(super - u) = "
                f"{self.upper_margin:.6g}, tol = {self.tol:.3g}{where}")


def perron_bracket(sub, sup, g, f, coeff: CoefficientField, exps: Exponents, grid: SpaceTimeGrid,
                   config: SolveConfig = SolveConfig(), tol: Optional[float] = None,
                   check_residuals: bool = True) -> BracketReport:
    """Check sub <= solve(g, f) <= sup at every domain node, within ``tol``.

    Inputs are validated first: sub <= g <= sup on the parabolic boundary
    and, if ``check_residuals``, the residual signs of sub (<= tol) and sup
    (>= -tol) on interior nodes. ``tol`` defaults to 10(h + eps).
    """
    eps = config.epsilon(grid.h)
    tol = 10 * (grid.h + eps) if tol is None else tol
    pb = _parabolic_boundary(grid)
    lo, hi, gv = _sample(sub, grid), _sample(sup, grid), _sample(g, grid)
    if np.any(lo[pb] > gv[pb] + tol) or np.any(gv[pb] > hi[pb] + tol):
        raise ValueError("bracket hypothesis fails: need sub <= g <= super on the parabolic boundary")
    if check_residuals:
        fv = SpaceTimeField(grid, _sample(f, grid))
        r_sub = residual(SpaceTimeField(grid, lo), fv, coeff, exps, eps)
        r_sup = residual(SpaceTimeField(grid, hi), fv, coeff, exps, eps)
        if np.any(r_sub.values[r_sub.valid] > tol):
            raise ValueError("bracket hypothesis fails: sub is not a grid subsolution")
        if np.any(r_sup.values[r_sup.valid] < -tol):
            raise ValueError("bracket hypothesis fails: super is not a grid supersolution")
    u = solve_cauchy_dirichlet(g, f, coeff, exps, grid, config).values
    dom = np.broadcast_to(grid.mask(), grid.shape)
    below = np.where(dom, u - lo, np.inf)
    above = np.where(dom, hi - u, np.inf)
    lower, upper = float(below.min()), float(above.min())
    worst = below if lower <= upper else above
    idx = np.unravel_index(int(np.argmin(worst)), worst.shape)
    passed = lower >= -tol and upper >= -tol
    witness = None if passed else (tuple(int(i) for i in idx[1:]), int(idx[0]))
    return BracketReport(passed, lower, upper, tol, witness)


@dataclass(frozen=True)
class StabilityCurve:
    deltas: np.ndarray
    errors: np.ndarray
    monotone: bool

    def __str__(self):
        rows = ", ".join(f"{d:g}: {e:.4g}" for d, e in zip(self.deltas, self.errors))
        return f"{'monotone' if self.monotone else 'NOT monotone'} decay; delta -> error {{{rows}}}"


def shifted_coefficient(coeff: CoefficientField, delta: float) -> CoefficientField:
    if coeff.a_minus + delta <= 0:
        raise ValueError(f"a + {delta} leaves the admissible range (a_minus = {coeff.a_minus})")
    return CoefficientField(lambda x, t: coeff(x, t) + delta, coeff.a_minus + delta,
                            coeff.a_plus + delta, coeff.lip_bound, coeff.time_independent)


def _shift_source(f, delta: float):
    if isinstance(f, SpaceTimeField):
        return SpaceTimeField(f.grid, f.values + delta, f.valid)
    if callable(f):
        def shifted(x, t):
            return np.asarray(f(x, t), dtype=float) + delta
        shifted.time_independent = getattr(f, "time_independent", False)
        return shifted
    return float(f) + delta


def stability_sweep(g, f, coeff: CoefficientField, exps: Exponents, grid: SpaceTimeGrid,
                    deltas: Sequence[float], config: SolveConfig = SolveConfig(),
                    perturb: str = "both") -> StabilityCurve:
    """sup |solve(a + d, f + d) - solve(a, f)| for each d in ``deltas``.

    ``perturb`` selects which of "a", "f" or "both" is shifted. ``monotone``
    reports whether the error decreases as d decreases.
    """
    if perturb not in ("a", "f", "both"):
        raise ValueError(f"perturb must be 'a', 'f' or 'both', got {perturb!r}")
    base = solve_cauchy_dirichlet(g, f, coeff, exps, grid, config).values
    dom = np.broadcast_to(grid.mask(), grid.shape)
    errors = []
    for d in deltas:
        c = shifted_coefficient(coeff, d) if perturb in ("a", "both") else coeff
        fd = _shift_source(f, d) if perturb in ("f", "both") else f
        u = solve_cauchy_dirichlet(g, fd, c, exps, grid, config).values
        errors.append(float(np.max(np.abs(u - base)[dom])))
    d = np.asarray(deltas, dtype=float)
    e = np.asarray(errors)
    order = np.argsort(-np.abs(d))
    monotone = bool(np.all(np.diff(e[order]) <= 1e-14))
    return StabilityCurve(d, e, monotone)


def _smooth_mode_sum(rng: np.random.Generator, dim: int, amp: float, modes: int = 3):
    k = rng.normal(size=(modes, dim)) * 2
    phase = rng.uniform(0, 2 * np.pi, modes)
    a = rng.normal(size=modes) * amp

    def fn(x, t):
        x = np.asarray(x, dtype=float)
        return sum(a[i] * np.cos(x @ k[i] + phase[i]) for i in range(modes)) + 0.0 * np.asarray(t)
    fn.time_independent = True
    return fn


def random_ordered_pairs(seed: int, count: int, dim: int = 2, shift_max: float = 0.2,
                         bump_max: float = 1.0, lift_max: float = 0.5):
    """``count`` deterministic data pairs (g1, f1, g2, f2) with g1 <= g2 and f1 <= f2.

    g1 and f1 are random sums of cosine modes. The second pair adds a
    Gaussian bump of random centre, width and height (at most ``bump_max``)
    plus a constant shift up to ``shift_max`` to g, and the bump scaled by
    up to ``lift_max`` to f. All data are time independent.
    """
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(count):
        g1 = _smooth_mode_sum(rng, dim, 0.5)
        f1 = _smooth_mode_sum(rng, dim, 1.0)
        shift = rng.uniform(0, shift_max)
        x0 = rng.uniform(-0.5, 0.5, dim)
        width = rng.uniform(0.1, 0.5)
        height = rng.uniform(0, bump_max)
        lift = rng.uniform(0, lift_max)

        def bump(x, x0=x0, width=width, height=height):
            return height * np.exp(-np.sum((np.asarray(x, dtype=float) - x0) ** 2, axis=-1) / width ** 2)

        def g2(x, t, g1=g1, bump=bump, shift=shift):
            return g1(x, t) + bump(x) + shift

        def f2(x, t, f1=f1, bump=bump, lift=lift):
            return f1(x, t) + lift * bump(x)
        g2.time_independent = f2.time_independent = True
        pairs.append((g1, f1, g2, f2))
    return pairs


__all__ = ["random_ordered_pairs", "comparison_audit", "AuditReport", "perron_bracket", "BracketReport",
           "stability_sweep", "StabilityCurve", "shifted_coefficient"]
