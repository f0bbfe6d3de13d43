"""Acceptance criteria, one test per criterion at its stated tolerance.

Each check prints a single ``CRITERION <id>: PASS|FAIL <detail>`` line.
Run directly (``python tests/test_acceptance.py``) for the report alone.
"""

import sys
import warnings
from functools import lru_cache

import numpy as np
import pytest

from degenpar import (CoefficientField, DppConfig, Exponents, RegularizationPolicy, ScalarField, SolveConfig,
                      comparison_audit, dpp_solve, dpp_update, dpp_weights, fit_growth_exponent,
                      gradient_holder_seminorm, make_grid, nondegeneracy_profile, normalized_p_laplacian, residual,
                      solve_cauchy_dirichlet)
from degenpar.cli import analyze_field, barrier_check, verify_example
from degenpar.compare import random_ordered_pairs
from degenpar.dpp import fd_time
from degenpar.exact import affine_solution, heat_reference, sharp_example

SHARP = sharp_example(2, 3.0, 2.0)
ONE = CoefficientField.constant(1.0)
RADII = [2.0 ** -j for j in range(1, 6)]


def report(cid, passed, detail):
    line = f"CRITERION {cid}: {'PASS' if passed else 'FAIL'} {detail}"
    print(line)
    return passed, line


def info(text):
    print(f"INFO {text}")


def static(fn):
    fn.time_independent = True
    return fn


# ---------------------------------------------------------------------------
# 1. golden exact solution

@lru_cache(maxsize=None)
def golden_rows():
    return verify_example(2, 3.0, 2.0, [1 / 32, 1 / 64, 1 / 128])


def criterion_1():
    rows = golden_rows()
    ratios = [r["ratio"] for r in rows[1:]]
    far = rows[-1]["sup_error_far"]
    runtime = sum(r["runtime"] for r in rows)
    ok = all(q >= 1.5 for q in ratios) and far <= 5e-2
    errs = ", ".join(f"{r['sup_error']:.3e}" for r in rows)
    return report("1", ok, f"sup errors [{errs}], ratios {np.round(ratios, 3).tolist()} (>= 1.5), "
                           f"error at h=1/128 on |x| >= 4h = {far:.3e} (<= 5e-2), {runtime:.0f}s")


# ---------------------------------------------------------------------------
# 2. sharp growth exponent

def criterion_2():
    g = make_grid(2, 0.5, 1 / 128, 1 / 1024, -0.375, 0)
    center = ((0.0, 0.0), 0.0)
    theta = SHARP.exps.theta_star
    _, fit_exact, _ = analyze_field(SHARP.sample(g), center, theta, RADII)
    sol = solve_cauchy_dirichlet(SHARP.u, SHARP.f, SHARP.coeff, SHARP.exps, g,
                                 SolveConfig(reg=RegularizationPolicy.intrinsic(g.h, SHARP.exps), grad_cap=1.3))
    _, fit_fd, _ = analyze_field(sol, center, theta, RADII)
    ok = 1.45 <= fit_exact.slope <= 1.55 and 1.35 <= fit_fd.slope <= 1.65
    return report("2", ok, f"analytic slope {fit_exact.slope:.4f} (in [1.45, 1.55]), "
                           f"FD slope {fit_fd.slope:.4f} (in [1.35, 1.65]), theta = {theta}")


# ---------------------------------------------------------------------------
# 3. non-degeneracy

def criterion_3():
    exps = Exponents(3.0, 1.0, 1.0)
    h = 1 / 128
    g = make_grid(2, 0.5, h, 1 / 512, -0.25, 0)
    bowl = static(lambda x, t: (x ** 2).sum(-1) + 0 * t)
    sol = solve_cauchy_dirichlet(bowl, -1.0, ONE, exps, g, SolveConfig(reg=RegularizationPolicy.intrinsic(h, exps)))
    radii = [r for r in RADII if r >= 4 * h]
    prof = nondegeneracy_profile(sol, ((0.0, 0.0), 0.0), exps.theta_star, radii)
    e = 1 + exps.alpha_star
    slope = prof.fit(4 * h).slope
    lower = float(np.min(prof.sups / (1e-3 * prof.radii ** e)))
    ok = prof.extremal == "min" and slope <= e + 0.15 and lower >= 1
    # steady state of 2|u'|(2u'' + u'/r) = 1 regular at 0: u = u(0) + r^1.5 / 3
    info(f"criterion 3 boundary sups {np.round(prof.sups, 5).tolist()} vs steady profile r^1.5/3 = "
         f"{np.round(prof.radii ** 1.5 / 3, 5).tolist()}")
    return report("3", ok, f"fitted exponent {slope:.4f} (<= {e + 0.15:.2f}), "
                           f"min sup / (1e-3 r^{e:g}) = {lower:.1f} (>= 1), center is a {prof.extremal}")


# ---------------------------------------------------------------------------
# 4. barrier certification

def criterion_4():
    c, good = barrier_check()
    _, bad = barrier_check(c_scale=1000)
    ok = good.passed and not bad.passed and abs(c - 1 / 17) < 1e-15
    return report("4", ok, f"c = {c:.6f}: margin {good.min_margin:.4f} >= -{good.tol:.3f} PASS; "
                           f"1000c: margin {bad.min_margin:.4g} -> {'FAIL' if not bad.passed else 'PASS'} "
                           f"(65^2 nodes, {good.checked} checked)")


# ---------------------------------------------------------------------------
# 5. comparison principle

AUDIT_GRID = dict(dim=2, R=1.0, h=1 / 16, dt=0.025, t_begin=-0.1, t_end=0.0)
AUDIT_EXPS = Exponents(3.0, 1.0, 2.0)


def criterion_5():
    g = make_grid(**AUDIT_GRID)
    reports = [comparison_audit(*pair, ONE, AUDIT_EXPS, g) for pair in random_ordered_pairs(0, 20)]
    bad = [i for i, r in enumerate(reports) if not r.passed]
    worst = max(reports, key=lambda r: r.violation)
    for i in bad:
        fine = make_grid(**dict(AUDIT_GRID, h=1 / 32))
        rf = comparison_audit(*random_ordered_pairs(0, 20)[i], ONE, AUDIT_EXPS, fine)
        info(f"criterion 5 pair {i}: violation {reports[i].violation:.3e} at h=1/16, "
             f"{rf.violation:.3e} at h=1/32 (tol {rf.tol:.2e})")
    return report("5", not bad, f"{20 - len(bad)}/20 pairs within 10 eps steps; worst violation "
                                f"{worst.violation:.3e} vs tol {worst.tol:.2e}"
                                + (f"; failing pairs {bad}" if bad else ""))


# ---------------------------------------------------------------------------
# 6. DPP consistency

def criterion_6a():
    ref = heat_reference([np.pi / 2])
    errs = []
    for eps in (0.2, 0.1, 0.05):
        cfg = DppConfig(eps, 2.0, 1, 1.0)
        grid = make_grid(1, 1 + eps, eps ** 2 / 2, cfg.dt, 0, 0.6)

        def g(x, t):
            return ref.u(x, fd_time(t, 1, 2.0))
        sol = dpp_solve(g, grid, cfg)
        exact = np.stack([g(grid.points(), t) for t in grid.times()])
        errs.append(float(np.abs(sol.values - exact)[sol.valid].max()))
    ok = errs[0] > errs[1] > errs[2] and errs[2] <= 0.1
    return report("6a", ok, f"p=2 sup errors {np.round(errs, 5).tolist()} for eps 0.2, 0.1, 0.05 "
                            f"(decreasing, final <= 0.1)")


def criterion_6b():
    p, n, r_omega, tau_end = 4.0, 2, 0.5, 1.0
    data = static(lambda x, t: x[..., 0] + 4 * x[..., 1] ** 2 + 0 * t)
    errs = []
    for eps, h in [(0.2, 0.05), (0.1, 0.025), (0.05, 0.0125)]:
        cfg = DppConfig(eps, p, n, r_omega)
        dg = make_grid(n, r_omega + eps, h, cfg.dt, 0, tau_end)
        game = dpp_solve(data, dg, cfg)
        # H = |xi|^0 + 1 = 2 turns the FD equation into du/dt = 2 Lap_p^N u
        fg = make_grid(n, r_omega, h, fd_time(cfg.dt, n, p), 0, fd_time(tau_end, n, p))
        fd = solve_cauchy_dirichlet(data, 0.0, ONE, Exponents(p), fg)
        off = int(round(eps / h))
        sl = (slice(None),) + (slice(off, off + fg.nx),) * n
        assert np.allclose(dg.points()[sl[1:]], fg.points())
        errs.append(float(np.abs(game.values[sl] - fd.values)[:, fg.mask()].max()))
    return report("6b", errs[-1] <= 0.1, f"p=4 |DPP - FD| {np.round(errs, 4).tolist()} for (eps, h) = "
                                         f"(0.2, 1/20) .. (0.05, 1/80); finest <= 0.1")


# ---------------------------------------------------------------------------
# 7. property suites

def criterion_7a():
    rng = np.random.default_rng(71)
    worst = 0.0
    for _ in range(1000):
        A = rng.normal(size=(2, 2))
        D2 = A + A.T
        worst = max(worst, abs(normalized_p_laplacian(D2, rng.normal(size=2), 2.0, 1e-6) - np.trace(D2)))
    return report("7a", worst == 0.0, f"p=2 reduction: max |Lap_2^N - trace| = {worst:.1e} over 1000 samples")


def criterion_7b():
    g = make_grid(2, 1, 1 / 16, 0.01, 0, 0.05)
    worst = 0.0
    for b, exps in [([1.0, 0.0], Exponents(3, 1, 2)), ([0.3, -2.0], Exponents(5, 0.5, 0.5)),
                    ([-1.0, 1.0], Exponents(1.5, 0, 3))]:
        ref = affine_solution(b, 0.7, exps, CoefficientField.constant(0.4))
        r = residual(ref.sample(g), ref.f, ref.coeff, ref.exps, 0.0)
        worst = max(worst, float(np.abs(r.values[r.valid]).max()))
    return report("7b", worst <= 1e-12, f"affine residual max {worst:.1e} (<= 1e-12)")


def criterion_7c():
    rng = np.random.default_rng(72)
    g = make_grid(2, 1, 0.125, 1, 0, 1, domain="box")
    worst = -np.inf
    for i in range(100):
        u = rng.normal(size=g.spatial_shape)
        v = u + np.abs(rng.normal(size=g.spatial_shape)) * rng.integers(0, 2, g.spatial_shape)
        p = [2.0, 2.5, 3.0, 4.0, 8.0][i % 5]
        w = dpp_weights(p, 2)
        node = tuple(int(i) for i in rng.integers(3, 14, 2))
        gap = dpp_update(ScalarField(g, u), node, 0.3, w) - dpp_update(ScalarField(g, v), node, 0.3, w)
        worst = max(worst, gap)
    return report("7c", worst <= 0, f"DPP monotone on 100 ordered pairs, max T(u) - T(v) = {worst:.3e} (<= 0)")


def criterion_7d():
    rng = np.random.default_rng(73)
    worst = 0.0
    for _ in range(100):
        k, c = rng.uniform(0.1, 4), 10 ** rng.uniform(-3, 3)
        r = 0.9 * 0.5 ** np.arange(rng.integers(3, 9))
        worst = max(worst, abs(fit_growth_exponent(r, c * r ** k).slope - k))
    return report("7d", worst <= 1e-9, f"power-law recovery max slope error {worst:.1e} (<= 1e-9)")


def criterion_7e():
    base = static(lambda x, t: np.sin(2 * x[..., 0]) * np.cos(x[..., 1]) + 0 * t)
    up = static(lambda x, t: base(x, t) + 1.0)
    g = make_grid(2, 1, 1 / 16, 0.02, 0, 0.04)
    cfg = SolveConfig(grad_cap=5.0)
    exps = Exponents(3, 1, 2)
    a = solve_cauchy_dirichlet(base, 0.3, ONE, exps, g, cfg)
    b = solve_cauchy_dirichlet(up, 0.3, ONE, exps, g, cfg)
    fd_err = float(np.abs(b.values - a.values - 1)[:, g.mask()].max())
    dc = DppConfig(0.1, 4.0, 2, 0.8)
    dg = make_grid(2, 0.9, 0.05, dc.dt, 0, 0.1)
    da, db = dpp_solve(base, dg, dc), dpp_solve(up, dg, dc)
    dpp_err = float(np.abs(db.values - da.values - 1)[da.valid].max())
    ok = fd_err <= 1e-12 and dpp_err <= 1e-12
    return report("7e", ok, f"shift by 1: FD deviation {fd_err:.1e}, DPP deviation {dpp_err:.1e} (<= 1e-12)")


def criterion_7f():
    a = SHARP.exps.alpha_star
    out = {}
    for alpha in (0.9 * a, 1.1 * a):
        vals = []
        for h in (1 / 32, 1 / 64):
            g = make_grid(2, 0.5, h, h, -h, 0)
            vals.append(gradient_holder_seminorm(SHARP.sample(g), alpha, budget=50_000_000))
        out[alpha] = vals[1] / vals[0]
    stable, grow = out[0.9 * a], out[1.1 * a]
    ok = abs(stable - 1) <= 0.2 and grow >= 1.5
    return report("7f", ok, f"refinement ratio {stable:.4f} at 0.9 alpha* (within 1 +- 0.2), "
                            f"{grow:.4f} at 1.1 alpha* (needs >= 1.5; h^(alpha* - alpha) scaling gives "
                            f"{2 ** (0.1 * a):.4f})")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6a, criterion_6b,
            criterion_7a, criterion_7b, criterion_7c, criterion_7d, criterion_7e, criterion_7f]


@pytest.mark.slow
@pytest.mark.parametrize("check", CRITERIA, ids=[c.__name__ for c in CRITERIA])
def test_criterion(check, capsys):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        passed, line = check()
    with capsys.disabled():
        print("\n" + line)
    assert passed, line


if __name__ == "__main__":
    warnings.simplefilter("ignore")
    results = [check()[0] for check in CRITERIA]
    print(f"{sum(results)}/{len(results)} criteria passed")
    sys.exit(0 if all(results) else 1)
