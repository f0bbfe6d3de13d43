import numpy as np
import pytest

from degenpar import (CFLViolation, CoefficientField, Exponents, RegularizationPolicy, SolveConfig,
                      SpaceTimeField, make_grid, solve_cauchy_dirichlet)
from degenpar.exact import affine_solution, heat_reference, sharp_example
from degenpar.fdsolver import cfl_dt, step

ONE = CoefficientField.constant(1.0)


def test_cfl_formula():
    cfg = SolveConfig(cfl_safety=1.0, grad_cap=1.0)
    assert cfl_dt(0.1, Exponents(2.0), 1.0, cfg, 1) == pytest.approx(0.0025)


def test_cfl_grad_cap_scaling():
    e = Exponents(2.0, 2.0, 2.0)
    cfg = SolveConfig(reg=RegularizationPolicy(0.0))
    r = cfl_dt(0.1, e, 1.0, cfg, 2, 10.0) / cfl_dt(0.1, e, 1.0, cfg, 2, 20.0)
    assert r == pytest.approx(4.0)


def test_cfl_small_a_limit():
    cfg = SolveConfig(cfl_safety=0.8, grad_cap=1.0)
    dt = cfl_dt(0.1, Exponents(3.0), 1e-12, cfg, 2)
    assert dt == pytest.approx(0.8 * 0.01 / (2 * 2 * 2))


def test_step_affine_stationary():
    g = make_grid(2, 1, 0.125, 1e-3, 0, 1e-3)
    u = g.points() @ np.array([0.3, -0.2]) + 1
    nxt, _ = step(u, 0.0, 1e-3, g, np.zeros(g.spatial_shape), ONE, Exponents(3, 1, 2), 1e-6,
                  u[g.boundary_mask()])
    np.testing.assert_allclose(nxt, u, atol=1e-15)


def test_step_pure_source():
    g = make_grid(2, 1, 0.125, 1e-3, 0, 1e-3)
    u = np.zeros(g.spatial_shape)
    nxt, _ = step(u, 0.0, 1e-3, g, np.ones(g.spatial_shape), ONE, Exponents(3, 1, 2), 1e-6,
                  np.zeros(g.boundary_mask().sum()))
    assert np.all(nxt[g.interior_mask()] == 1e-3)


def test_step_sharp_local_error():
    ref = sharp_example(2, 3.0, 2.0)
    h, dt = 1 / 32, 1e-5
    g = make_grid(2, 0.5, h, dt, -dt, 0)
    pts = g.points()
    u0 = ref.u(pts, -dt)
    nxt, _ = step(u0, -dt, dt, g, ref.f(pts, -dt), ref.coeff, ref.exps, h ** 0.5,
                  ref.u(pts[g.boundary_mask()], 0.0))
    far = g.interior_mask() & (g.radius_from([0, 0]) >= 4 * h)
    err = np.abs(nxt - ref.u(pts, 0.0))[far].max()
    assert err < 5 * dt * (h + h ** 0.5)


def test_solve_affine_exact():
    g = make_grid(2, 1, 0.0625, 0.01, 0, 0.05)
    ref = affine_solution([1.0, 0.5], -0.25, Exponents(3, 1, 2))
    sol = solve_cauchy_dirichlet(ref.u, ref.f, ref.coeff, ref.exps, g)
    assert np.abs(sol.values - ref.sample(g).values)[:, g.mask()].max() <= 1e-12


def test_solve_heat_refinement():
    ref = heat_reference([1.0, 1.0])
    errs = []
    for h in (1 / 8, 1 / 16, 1 / 32):
        g = make_grid(2, 1, h, 0.05, 0, 0.1)
        sol = solve_cauchy_dirichlet(ref.u, ref.f, ref.coeff, ref.exps, g)
        errs.append(np.abs(sol.values - ref.sample(g).values)[:, g.mask()].max())
    assert errs[0] / errs[1] > 3 and errs[1] / errs[2] > 3


def test_solve_sharp_refinement():
    ref = sharp_example(2, 3.0, 2.0)
    errs = []
    for h in (1 / 16, 1 / 32):
        g = make_grid(2, 0.5, h, 0.0625, -0.25, 0)
        cfg = SolveConfig(reg=RegularizationPolicy.intrinsic(h, ref.exps), grad_cap=1.3)
        sol = solve_cauchy_dirichlet(ref.u, ref.f, ref.coeff, ref.exps, g, cfg)
        errs.append(np.abs(sol.values - ref.sample(g).values)[:, g.mask()].max())
    assert errs[0] / errs[1] >= 1.5


def test_fixed_cap_violation_raises():
    ref = heat_reference([3.0, 0.0])
    g = make_grid(2, 1, 0.125, 0.01, 0, 0.02)
    with pytest.raises(CFLViolation, match="grad_cap"):
        solve_cauchy_dirichlet(ref.u, ref.f, ref.coeff, ref.exps, g, SolveConfig(grad_cap=0.5))


def test_dt_above_cfl_without_clamp():
    ref = heat_reference([1.0, 0.0])
    g = make_grid(2, 1, 0.125, 0.1, 0, 0.2)
    with pytest.raises(CFLViolation, match="CFL"):
        solve_cauchy_dirichlet(ref.u, ref.f, ref.coeff, ref.exps, g, SolveConfig(auto_clamp=False))


def test_constant_shift_invariance():
    g = make_grid(2, 1, 0.0625, 0.02, 0, 0.04)
    e = Exponents(3, 1, 2)

    def g0(x, t):
        return np.sin(2 * x[..., 0]) * np.cos(x[..., 1]) + 0 * t
    g0.time_independent = True

    def g1(x, t):
        return g0(x, t) + 1
    g1.time_independent = True
    cfg = SolveConfig(grad_cap=5.0)
    u0 = solve_cauchy_dirichlet(g0, 0.3, ONE, e, g, cfg)
    u1 = solve_cauchy_dirichlet(g1, 0.3, ONE, e, g, cfg)
    assert np.abs(u1.values - u0.values - 1)[:, g.mask()].max() <= 1e-12


def test_field_and_callable_data_agree():
    g = make_grid(2, 1, 0.125, 0.01, 0, 0.03)
    cfg = SolveConfig(grad_cap=4.0)

    def u0(x, t):
        return np.cos(x[..., 0]) * np.sin(x[..., 1]) + 0 * t
    u0.time_independent = True
    a = solve_cauchy_dirichlet(u0, 0.0, ONE, Exponents(2.0), g, cfg)
    b = solve_cauchy_dirichlet(SpaceTimeField.from_function(g, u0), SpaceTimeField(g, np.zeros(g.shape)),
                               ONE, Exponents(2.0), g, cfg)
    np.testing.assert_allclose(a.values, b.values, atol=1e-13)


def test_field_boundary_is_linear_in_time():
    # slice data are interpolated linearly between slices, an O(dt^2) departure
    ref = heat_reference([1.0, 0.5])
    g = make_grid(2, 1, 0.125, 0.01, 0, 0.03)
    cfg = SolveConfig(grad_cap=4.0)
    a = solve_cauchy_dirichlet(ref.u, 0.0, ref.coeff, ref.exps, g, cfg)
    b = solve_cauchy_dirichlet(ref.sample(g), 0.0, ref.coeff, ref.exps, g, cfg)
    gap = np.abs(a.values - b.values).max()
    assert 0 < gap < 10 * g.dt ** 2 * 2.5 ** 2


def test_time_dependent_source_path():
    # the per-step path and the compiled block path must agree for static data
    g = make_grid(1, 1, 0.0625, 0.01, 0, 0.02)
    e = Exponents(3, 1, 1)

    def u0(x, t):
        return np.cos(x[..., 0]) + 0 * t
    u0.time_independent = True

    def f_dyn(x, t):
        return 0.5 + 0 * x[..., 0] + 0 * t
    cfg = SolveConfig(grad_cap=2.0)
    a = solve_cauchy_dirichlet(u0, 0.5, ONE, e, g, cfg)
    b = solve_cauchy_dirichlet(u0, f_dyn, ONE, e, g, cfg)
    np.testing.assert_allclose(a.values, b.values, atol=1e-13)
    assert a.info["steps"] == b.info["steps"]
