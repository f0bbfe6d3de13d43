"""Finite-difference realisation of the degenerate normalized p-Laplacian.

Every |grad u| that appears in a denominator or under a power is replaced by
sqrt(|grad u|^2 + eps^2). With eps = 0 the formulas are exact but undefined
on the critical set, so those paths must not meet a vanishing gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CoefficientField, Exponents, ScalarField, SpaceTimeField


class SingularPointError(ValueError):
    """Raised when the operator is evaluated at a zero gradient without regularization."""


@dataclass(frozen=True)
class RegularizationPolicy:
    epsilon: float = 1e-6

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")

    @classmethod
    def default_for(cls, h: float) -> "RegularizationPolicy":
        return cls(max(1e-6, h * h))

    @classmethod
    def intrinsic(cls, h: float, exps: Exponents) -> "RegularizationPolicy":
        """eps = h^alpha*, the size of |grad u| one node away from a critical point.

        A solution growing like |x|^(1 + alpha*) has gradient ~ h^alpha* at the
        nearest node, so a smaller eps lets H collapse at the critical node
        while the true H * Lap_p^N u stays of order one there.
        """
        return cls(h ** exps.alpha_star)


def _eps(reg) -> float:
    if reg is None:
        return 0.0
    if isinstance(reg, RegularizationPolicy):
        return reg.epsilon
    return float(reg)


# ---------------------------------------------------------------------------
# stencils on whole arrays

def _inner(dim):
    return (slice(1, -1),) * dim


def interior_derivatives(u: np.ndarray, h: float):
    """Central-difference gradient and Hessian on ``u[1:-1, ...]``.

    Returns ``(grad, hess)`` with shapes ``(dim, *inner)`` and
    ``(dim, dim, *inner)``; cross terms use the four-corner formula.
    """
    dim = u.ndim
    c = u[_inner(dim)]
    if dim == 1:
        up, um = u[2:], u[:-2]
        grad = ((up - um) / (2 * h))[None]
        hess = ((up - 2 * c + um) / (h * h))[None, None]
        return grad, hess
    xp, xm = u[2:, 1:-1], u[:-2, 1:-1]
    yp, ym = u[1:-1, 2:], u[1:-1, :-2]
    grad = np.stack([(xp - xm) / (2 * h), (yp - ym) / (2 * h)])
    uxx = (xp - 2 * c + xm) / (h * h)
    uyy = (yp - 2 * c + ym) / (h * h)
    uxy = (u[2:, 2:] - u[2:, :-2] - u[:-2, 2:] + u[:-2, :-2]) / (4 * h * h)
    hess = np.stack([np.stack([uxx, uxy]), np.stack([uxy, uyy])])
    return grad, hess


def interior_gradient(u: np.ndarray, h: float) -> np.ndarray:
    if u.ndim == 1:
        return ((u[2:] - u[:-2]) / (2 * h))[None]
    return np.stack([(u[2:, 1:-1] - u[:-2, 1:-1]) / (2 * h),
                     (u[1:-1, 2:] - u[1:-1, :-2]) / (2 * h)])


# ---------------------------------------------------------------------------
# pointwise API

def _field_parts(field):
    if isinstance(field, ScalarField):
        return field.values, field.grid.h, field.grid.mask()
    raise TypeError("expected a ScalarField")


def gradient(field: ScalarField, node, mask=None) -> np.ndarray:
    """Central differences at ``node``; one-sided where a neighbour is missing."""
    u, h, dom = _field_parts(field)
    if mask is None:
        mask = dom
    node = tuple(int(i) for i in node)
    if not mask[node]:
        raise ValueError(f"node {node} lies outside the mask")
    out = np.empty(u.ndim)
    for j in range(u.ndim):
        e = np.zeros(u.ndim, dtype=int)
        e[j] = 1
        plus = tuple(np.add(node, e))
        minus = tuple(np.subtract(node, e))
        has_p = plus[j] < u.shape[j] and mask[plus]
        has_m = minus[j] >= 0 and mask[minus]
        if has_p and has_m:
            out[j] = (u[plus] - u[minus]) / (2 * h)
        elif has_p:
            out[j] = (u[plus] - u[node]) / h
        elif has_m:
            out[j] = (u[node] - u[minus]) / h
        else:
            raise ValueError(f"node {node} has no neighbour along axis {j}")
    return out


def hessian(field: ScalarField, node, mask=None) -> np.ndarray:
    """Second central differences at an interior node (symmetric by construction)."""
    u, h, dom = _field_parts(field)
    if mask is None:
        mask = dom
    node = tuple(int(i) for i in node)
    lo = [i - 1 for i in node]
    if min(lo) < 0 or any(i + 1 >= n for i, n in zip(node, u.shape)):
        raise ValueError(f"node {node} lacks a full stencil")
    sl = tuple(slice(i - 1, i + 2) for i in node)
    if not mask[sl].all():
        raise ValueError(f"node {node} lacks a full stencil inside the mask")
    _, hess = interior_derivatives(u[sl], h)
    return hess.reshape(u.ndim, u.ndim)


def normalized_p_laplacian(D2, grad, p: float, reg=None):
    """trace(D2) + (p - 2) <D2 q, q> with q = grad / sqrt(|grad|^2 + eps^2).

    Accepts a single point (``D2`` of shape (d, d), ``grad`` of shape (d,))
    or batches with the component axes leading.
    """
    D2 = np.asarray(D2, dtype=float)
    g = np.asarray(grad, dtype=float)
    eps = _eps(reg)
    d = g.shape[0]
    m2 = np.sum(g * g, axis=0) + eps * eps
    if np.any(m2 == 0):
        raise SingularPointError("normalized p-Laplacian undefined at zero gradient with epsilon = 0")
    tr = sum(D2[i, i] for i in range(d))
    quad = sum(D2[i, j] * g[i] * g[j] for i in range(d) for j in range(d)) / m2
    return tr + (p - 2) * quad


def degeneracy_H(x, t, grad, coeff: CoefficientField, exps: Exponents, reg=None):
    """|xi|^p_tilde + a(x, t) |xi|^q_tilde with |xi| regularized by eps."""
    g = np.asarray(grad, dtype=float)
    eps = _eps(reg)
    m = np.sqrt(np.sum(g * g, axis=0) + eps * eps)
    a = coeff(np.asarray(x, dtype=float), t)
    return m ** exps.p_tilde + a * m ** exps.q_tilde


def diffusion_term(u: np.ndarray, t: float, pts_inner: np.ndarray, h: float,
                   coeff: CoefficientField, exps: Exponents, eps: float, on_singular: str = "raise"):
    """H * normalized p-Laplacian on ``u[1:-1, ...]``; also returns |grad u| there.

    With eps = 0 a vanishing gradient raises, or yields NaN at that node
    when ``on_singular="nan"``.
    """
    grad, hess = interior_derivatives(u, h)
    g2 = np.sum(grad * grad, axis=0)
    m2 = g2 + eps * eps
    singular = m2 == 0
    if singular.any():
        if on_singular != "nan":
            raise SingularPointError("zero gradient met with epsilon = 0")
        m2 = np.where(singular, np.nan, m2)
    dim = u.ndim
    tr = hess[0, 0] if dim == 1 else hess[0, 0] + hess[1, 1]
    if dim == 1:
        quad = hess[0, 0] * g2
    else:
        quad = (hess[0, 0] * grad[0] * grad[0] + 2 * hess[0, 1] * grad[0] * grad[1]
                + hess[1, 1] * grad[1] * grad[1])
    lap = tr + (exps.p - 2) * quad / m2
    m = np.sqrt(m2)
    a = coeff(pts_inner, t)
    H = m ** exps.p_tilde + a * m ** exps.q_tilde
    return H * lap, np.sqrt(g2)


def residual(u: SpaceTimeField, f, coeff: CoefficientField, exps: Exponents,
             reg=None, on_singular: str = "raise") -> SpaceTimeField:
    """Backward-in-time residual du/dt - H * Lap_p^N u - f.

    ``f`` is a SpaceTimeField on the same grid or a callable ``f(points, t)``.
    Only interior nodes of slices k >= 1 are marked valid. With
    ``on_singular="skip"`` and eps = 0, zero-gradient nodes are marked
    invalid instead of raising.
    """
    grid = u.grid
    if isinstance(f, SpaceTimeField):
        if f.grid != grid:
            raise ValueError("u and f live on different grids")
        fv = f.values
    else:
        fv = SpaceTimeField.from_function(grid, f).values
    eps = _eps(reg)
    inner = _inner(grid.dim)
    pts_inner = grid.points()[inner]
    interior = grid.interior_mask()
    out = np.zeros(grid.shape)
    valid = np.zeros(grid.shape, dtype=bool)
    times = grid.times()
    for k in range(1, grid.nt):
        diff, _ = diffusion_term(u.values[k], times[k], pts_inner, grid.h, coeff, exps, eps,
                                 "nan" if on_singular == "skip" else "raise")
        r = np.full(grid.spatial_shape, np.nan)
        r[inner] = (u.values[k][inner] - u.values[k - 1][inner]) / grid.dt - diff - fv[k][inner]
        ok = interior & np.isfinite(r)
        out[k] = np.where(ok, r, 0.0)
        valid[k] = ok
    return SpaceTimeField(grid, out, valid)


def grid_lipschitz(values: np.ndarray, h: float, mask=None) -> float:
    """Largest neighbour difference quotient along the axes."""
    lip = 0.0
    for ax in range(values.ndim):
        d = np.abs(np.diff(values, axis=ax)) / h
        if mask is not None:
            sl_a = [slice(None)] * values.ndim
            sl_b = [slice(None)] * values.ndim
            sl_a[ax] = slice(1, None)
            sl_b[ax] = slice(None, -1)
            d = np.where(mask[tuple(sl_a)] & mask[tuple(sl_b)], d, 0.0)
        if d.size:
            lip = max(lip, float(d.max()))
    return lip


__all__ = [
    "RegularizationPolicy", "SingularPointError", "gradient", "hessian",
    "normalized_p_laplacian", "degeneracy_H", "residual", "diffusion_term",
    "interior_derivatives", "interior_gradient", "grid_lipschitz",
]
