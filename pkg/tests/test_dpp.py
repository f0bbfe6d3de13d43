from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from degenpar import DppConfig, ScalarField, SpaceTimeField, dpp_solve, dpp_update, dpp_weights, make_grid
from degenpar.dpp import NonMonotoneWarning, ball_offsets, boundary_strip, dpp_time, fd_time
from degenpar.exact import heat_reference


def test_weights():
    assert dpp_weights(2, 2) == (0, 1)
    assert dpp_weights(4, 2) == (Fraction(1, 3), Fraction(2, 3))
    for p, n in [(2.5, 1), (7, 3), (Fraction(9, 4), 2)]:
        a, b = dpp_weights(p, n)
        assert a + b == pytest.approx(1, abs=1e-15)


def test_weights_reject():
    with pytest.raises(ValueError):
        dpp_weights(1, 2)
    with pytest.raises(ValueError):
        dpp_weights(3, 0)


def test_time_maps_inverse():
    assert dpp_time(fd_time(0.37, 2, 4.0), 2, 4.0) == pytest.approx(0.37)


def test_strip_1d():
    g = make_grid(1, 1.1, 0.05, 0.005, 0, 0.01)
    s = boundary_strip(g, 0.1, 1.0)
    x = g.axis()
    np.testing.assert_allclose(sorted(x[s[1]]), [-1.1, -1.05, 1.05, 1.1])
    assert s[0][np.abs(x) <= 1].all()


def test_strip_eps_below_h():
    g = make_grid(1, 1.25, 0.25, 0.005, 0, 0.01)
    s = boundary_strip(g, 0.1, 1.0)
    assert s[1].sum() == 0
    s = boundary_strip(g, 0.25, 1.0)
    np.testing.assert_allclose(sorted(g.axis()[s[1]]), [-1.25, 1.25])


def test_strip_width_doubles():
    g = make_grid(1, 1.2, 0.05, 0.005, 0, 0.01)
    assert boundary_strip(g, 0.2, 1.0)[1].sum() == 2 * boundary_strip(g, 0.1, 1.0)[1].sum()


def test_strip_needs_room():
    g = make_grid(1, 1.0, 0.05, 0.005, 0, 0.01)
    with pytest.raises(ValueError):
        boundary_strip(g, 0.1, 1.0)


def test_ball_offsets():
    assert len(ball_offsets(1, 1, 2)) == 5
    assert len(ball_offsets(1, 0.5, 2)) == 1


def test_update_average_and_constant():
    g = make_grid(2, 1, 0.25, 1, 0, 1)
    u = ScalarField(g, np.full(g.spatial_shape, 2.5))
    assert dpp_update(u, (4, 4), 0.5, dpp_weights(2, 2)) == 2.5
    lin = ScalarField(g, g.points() @ np.array([0.3, -0.7]))
    assert dpp_update(lin, (3, 5), 0.5, dpp_weights(4, 2)) == pytest.approx(lin.values[3, 5], abs=1e-15)


def test_update_brute_force():
    g = make_grid(1, 2, 1, 1, 0, 1)
    u = ScalarField(g, g.axis() ** 2)
    a, b = dpp_weights(4, 1)
    assert a == Fraction(2, 5)
    assert dpp_update(u, (2,), 1.0, (a, b)) == pytest.approx(0.6)


def test_update_rejects_ball_outside_grid():
    g = make_grid(1, 1, 0.25, 1, 0, 1)
    with pytest.raises(ValueError):
        dpp_update(ScalarField(g, np.zeros(g.nx)), (0,), 0.5, (0, 1))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([2.0, 3.0, 4.0, 10.0]), st.sampled_from([1, 2]))
def test_update_monotone(seed, p, dim):
    r = np.random.default_rng(seed)
    g = make_grid(dim, 1, 0.25, 1, 0, 1)
    u = r.normal(size=g.spatial_shape)
    v = u + np.abs(r.normal(size=g.spatial_shape))
    node = (4,) * dim
    w = dpp_weights(p, dim)
    assert dpp_update(ScalarField(g, u), node, 0.5, w) <= dpp_update(ScalarField(g, v), node, 0.5, w)


def _solve(g_data, p=3.0, eps=0.2, dim=1, t_end=0.2):
    cfg = DppConfig(eps, p, dim, 1.0)
    grid = make_grid(dim, 1.2, 0.05 if dim == 1 else 0.1, cfg.dt, 0, t_end)
    return grid, dpp_solve(g_data, grid, cfg)


def test_solve_constant():
    grid, sol = _solve(1.75)
    assert np.all(sol.values[sol.valid] == 1.75)


def test_solve_shift_invariance():
    def g0(x, t):
        return np.sin(3 * x[..., 0]) + t
    grid, a = _solve(g0, p=4.0)
    _, b = _solve(lambda x, t: g0(x, t) + 1.0, p=4.0)
    assert np.abs(b.values - a.values - 1)[a.valid].max() <= 1e-12


def test_solve_heat_converges():
    k = np.pi / 2
    ref = heat_reference([k])
    errs = []
    for eps in (0.2, 0.1):
        cfg = DppConfig(eps, 2.0, 1, 1.0)
        grid = make_grid(1, 1 + eps, eps ** 2 / 2, cfg.dt, 0, 0.6)

        def g(x, t):
            return ref.u(x, fd_time(t, 1, 2.0))
        sol = dpp_solve(g, grid, cfg)
        exact = np.stack([g(grid.points(), t) for t in grid.times()])
        errs.append(np.abs(sol.values - exact)[sol.valid].max())
    assert errs[1] < errs[0] < 0.1


def test_solve_warns_below_two():
    with pytest.warns(NonMonotoneWarning):
        _solve(0.0, p=1.5)


def test_solve_missing_strip_data():
    cfg = DppConfig(0.2, 3.0, 1, 1.0)
    grid = make_grid(1, 1.2, 0.05, cfg.dt, 0, 0.1)
    field = SpaceTimeField(grid, np.zeros(grid.shape), np.zeros(grid.shape, dtype=bool))
    with pytest.raises(ValueError, match="missing"):
        dpp_solve(field, grid, cfg)


def test_solve_checks_dt():
    cfg = DppConfig(0.2, 3.0, 1, 1.0)
    with pytest.raises(ValueError, match="eps"):
        dpp_solve(0.0, make_grid(1, 1.2, 0.05, 0.01, 0, 0.1), cfg)
