import numpy as np
import pytest
from hypothesis import given, strategies as st

from degenpar import (CoefficientField, Exponents, RegularizationPolicy, ScalarField,
                      degeneracy_H, gradient, hessian, make_grid, normalized_p_laplacian, residual)
from degenpar._kernels import euler_step
from degenpar.exact import affine_solution, heat_reference, sharp_example
from degenpar.operator import SingularPointError, diffusion_term


def slice_of(grid, fn):
    return ScalarField(grid, np.asarray(fn(grid.points()), dtype=float))


def test_gradient_linear_exact():
    g = make_grid(2, 1, 0.25, 1, 0, 1, domain="box")
    f = slice_of(g, lambda x: x[..., 0])
    for node in [(1, 1), (4, 4), (6, 2)]:
        np.testing.assert_array_equal(gradient(f, node), [1.0, 0.0])


def test_gradient_quadratic_1d():
    g = make_grid(1, 1, 0.5, 1, 0, 1)
    f = slice_of(g, lambda x: 0.5 * x[..., 0] ** 2)
    assert gradient(f, (3,))[0] == 0.5


def test_gradient_constant():
    g = make_grid(2, 1, 0.5, 1, 0, 1)
    np.testing.assert_array_equal(gradient(slice_of(g, lambda x: 0 * x[..., 0] + 3), (2, 2)), [0, 0])


def test_hessian_exact_cases():
    g = make_grid(2, 1, 0.25, 1, 0, 1, domain="box")
    np.testing.assert_allclose(hessian(slice_of(g, lambda x: 0.5 * (x ** 2).sum(-1)), (3, 5)), np.eye(2),
                               atol=1e-12)
    np.testing.assert_allclose(hessian(slice_of(g, lambda x: x[..., 0] * x[..., 1]), (2, 4)),
                               [[0, 1], [1, 0]], atol=1e-12)
    g1 = make_grid(1, 1, 0.25, 1, 0, 1)
    H = hessian(slice_of(g1, lambda x: x[..., 0] ** 3), (6,))
    assert H[0, 0] == pytest.approx(3.0, abs=1e-12)


@given(st.lists(st.floats(-5, 5), min_size=4, max_size=4), st.lists(st.floats(-5, 5), min_size=2, max_size=2))
def test_p2_reduces_to_trace(d, grad):
    D2 = np.array(d).reshape(2, 2)
    D2 = D2 + D2.T
    assert normalized_p_laplacian(D2, grad, 2.0, 1e-6) == pytest.approx(np.trace(D2), abs=1e-12)


def test_radial_quadratic():
    assert normalized_p_laplacian(np.eye(2), [0.3, -0.4], 3.0, 0.0) == pytest.approx(3.0)


def test_zero_gradient_regularized():
    assert normalized_p_laplacian(np.eye(2), [0, 0], 5.0, 1e-6) == 2.0


def test_zero_gradient_unregularized_raises():
    with pytest.raises(SingularPointError):
        normalized_p_laplacian(np.eye(2), [0, 0], 5.0, 0.0)


def test_degeneracy_H():
    c = CoefficientField.constant(0.2)
    assert degeneracy_H(np.zeros(2), 0, np.array([3.0, 4.0]), c, Exponents(3, 1, 2), 0.0) == pytest.approx(10)
    one = CoefficientField.constant(1.0)
    assert degeneracy_H(np.zeros(2), 0, np.array([7.0, -1.0]), one, Exponents(4, 0, 0), 1e-3) == 2.0
    assert degeneracy_H(np.zeros(2), 0, np.zeros(2), one, Exponents(3, 1, 2), 0.0) == 0.0


def test_residual_affine_zero():
    g = make_grid(2, 1, 0.125, 0.01, 0, 0.05)
    ref = affine_solution([0.7, -1.3], 0.4, Exponents(3, 1, 2), CoefficientField.constant(0.5))
    r = residual(ref.sample(g), ref.f, ref.coeff, ref.exps, RegularizationPolicy(1e-6))
    assert np.abs(r.values[r.valid]).max() < 1e-12


def test_residual_sharp_decreases_away_from_origin():
    ref = sharp_example(2, 3.0, 2.0)
    prev = np.inf
    for h in (1 / 16, 1 / 32, 1 / 64):
        g = make_grid(2, 0.5, h, h * h, -h * h, 0)
        r = residual(ref.sample(g), ref.f, ref.coeff, ref.exps, RegularizationPolicy.intrinsic(h, ref.exps))
        far = r.valid & (g.radius_from([0, 0]) >= 0.25)[None]
        err = np.abs(r.values[far]).max()
        assert err < prev
        prev = err


def test_residual_heat_second_order():
    ref = heat_reference([1.0, 0.5])
    errs = []
    for h in (1 / 8, 1 / 16, 1 / 32):
        g = make_grid(2, 1, h, h * h, 0, 4 * h * h)
        r = residual(ref.sample(g), ref.f, ref.coeff, ref.exps, 1e-6)
        errs.append(np.abs(r.values[r.valid]).max())
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5


@pytest.mark.parametrize("dim", [1, 2])
def test_compiled_step_matches_numpy(dim, rng):
    g = make_grid(dim, 1, 0.125, 1e-4, 0, 1e-4, domain="box")
    exps = Exponents(3.5, 1.0, 2.0)
    coeff = CoefficientField.constant(0.7)
    u = rng.normal(size=g.spatial_shape)
    f = rng.normal(size=g.spatial_shape)
    a = np.full(g.spatial_shape, 0.7)
    inner = (slice(1, -1),) * dim
    diff, _ = diffusion_term(u, 0.0, g.points()[inner], g.h, coeff, exps, 0.05)
    expect = u[inner] + g.dt * (diff + f[inner])
    out = np.empty_like(u)
    euler_step(u, out, g.interior_mask(), f, a, g.h, g.dt, 0.05, exps.p, exps.p_tilde, exps.q_tilde)
    np.testing.assert_allclose(out[inner], expect, rtol=1e-12, atol=1e-12)
