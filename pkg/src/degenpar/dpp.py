"""Value iteration for the tug-of-war-with-noise dynamic programming principle.

    u(x, t) = (alpha/2) (max + min of u(., t - eps^2/2) over B_eps(x))
              + beta * mean of u(., t - eps^2/2) over B_eps(x)

Time runs forward from the bottom slice in steps of eps^2/2. The ball is
sampled by grid nodes, so the mean is an unweighted node average. The
homogeneous scheme is consistent with (n + p) du/dt = Lap_p^N u; use
``fd_time`` / ``dpp_time`` to move between this clock and an FD run with
H = 2 (p_tilde = q_tilde = 0, a = 1).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Optional

import numpy as np

from .core import ScalarField, SpaceTimeField, SpaceTimeGrid

_TOL = 1e-9


class NonMonotoneWarning(UserWarning):
    """p < 2: the min/max weight is negative and the update is not monotone."""


def dpp_weights(p, n):
    """(alpha, beta) = ((p - 2)/(p + n), (2 + n)/(p + n)); Fractions for rational input."""
    if not p > 1:
        raise ValueError(f"p must exceed 1, got {p}")
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    if isinstance(p, Rational) and isinstance(n, Rational):
        p, n = Fraction(p), Fraction(n)
        return (p - 2) / (p + n), (2 + n) / (p + n)
    p, n = float(p), float(n)
    return (p - 2) / (p + n), (2 + n) / (p + n)


@dataclass(frozen=True)
class DppConfig:
    """``domain_radius`` is the radius of the ball Omega; None means grid radius - eps."""

    eps_game: float
    p: float
    n: int
    domain_radius: Optional[float] = None

    def __post_init__(self):
        if not self.eps_game > 0:
            raise ValueError(f"eps_game must be positive, got {self.eps_game}")
        dpp_weights(self.p, self.n)

    @property
    def weights(self):
        a, b = dpp_weights(self.p, self.n)
        return float(a), float(b)

    @property
    def dt(self) -> float:
        return self.eps_game ** 2 / 2

    def omega_radius(self, grid: SpaceTimeGrid) -> float:
        if self.domain_radius is not None:
            return self.domain_radius
        return grid.spatial_radius - self.eps_game


def fd_time(tau, n: int, p: float, t0: float = 0.0):
    """FD time matching DPP time ``tau``: t0 + tau / (2 (n + p))."""
    return t0 + np.asarray(tau, dtype=float) / (2.0 * (n + p))


def dpp_time(t, n: int, p: float, t0: float = 0.0):
    return (np.asarray(t, dtype=float) - t0) * (2.0 * (n + p))


def ball_offsets(h: float, eps: float, dim: int) -> np.ndarray:
    """Integer offsets o with |o| h <= eps, in lexicographic order (always contains 0)."""
    m = int(math.floor(eps / h + _TOL))
    rng = np.arange(-m, m + 1)
    if dim == 1:
        offs = rng[:, None]
    else:
        offs = np.stack(np.meshgrid(rng, rng, indexing="ij"), axis=-1).reshape(-1, 2)
    keep = np.sqrt(np.sum((offs * h) ** 2, axis=1)) <= eps * (1 + _TOL)
    return offs[keep]


def _omega_and_collar(grid: SpaceTimeGrid, eps: float, r_omega: float):
    r = grid.radius_from(np.zeros(grid.dim))
    slack = _TOL * max(grid.h, eps)
    omega = r <= r_omega + slack
    collar = (r > r_omega + slack) & (r <= r_omega + eps + slack)
    return omega, collar


def boundary_strip(grid: SpaceTimeGrid, eps_game: float, domain_radius: Optional[float] = None) -> np.ndarray:
    """Space-time mask of the parabolic strip: the eps-collar at every time plus Omega at t_begin.

    Omega is the closed ball of radius ``domain_radius`` about the origin
    (default: grid radius - eps).
    """
    r_omega = grid.spatial_radius - eps_game if domain_radius is None else domain_radius
    if r_omega + eps_game > grid.spatial_radius * (1 + _TOL) + _TOL * grid.h:
        raise ValueError(f"grid radius {grid.spatial_radius} does not contain the eps-collar "
                         f"(needs {r_omega + eps_game})")
    if r_omega <= 0:
        raise ValueError(f"domain radius must be positive, got {r_omega}")
    omega, collar = _omega_and_collar(grid, eps_game, r_omega)
    strip = np.zeros(grid.shape, dtype=bool)
    strip[:] = collar & grid.mask()
    strip[0] |= omega
    return strip


def _ball_stats(u: np.ndarray, idx, offsets: np.ndarray):
    """Max, min and mean of ``u`` over the ball around each node in ``idx``.

    ``idx`` is a tuple of index arrays; offsets are visited in order so the
    sum is reproducible.
    """
    hi = lo = None
    total = np.zeros(idx[0].shape)
    for o in offsets:
        v = u[tuple(i + d for i, d in zip(idx, o))]
        if hi is None:
            hi, lo = v.copy(), v.copy()
        else:
            np.maximum(hi, v, out=hi)
            np.minimum(lo, v, out=lo)
        total += v
    return hi, lo, total / len(offsets)


def _combine(hi, lo, mean, weights):
    alpha, beta = (float(w) for w in weights)
    if alpha == 0.0:
        return mean
    return 0.5 * alpha * (hi + lo) + beta * mean


def dpp_update(u_prev_slice: ScalarField, node, eps_game: float, weights) -> float:
    """One DPP update at ``node`` from the previous slice."""
    u = u_prev_slice.values
    grid = u_prev_slice.grid
    offsets = ball_offsets(grid.h, eps_game, grid.dim)
    node = np.asarray(node, dtype=int).reshape(-1)
    pts = node[None, :] + offsets
    if len(offsets) == 0:
        raise ValueError("empty ball sample")
    if np.any(pts < 0) or np.any(pts >= np.array(u.shape)) or not np.all(grid.mask()[tuple(pts.T)]):
        raise ValueError(f"ball of radius {eps_game} around node {tuple(node)} leaves the grid")
    idx = tuple(np.array([i]) for i in node)
    hi, lo, mean = _ball_stats(u, idx, offsets)
    return float(_combine(hi, lo, mean, weights)[0])


def _strip_values(g, grid: SpaceTimeGrid, k: int, sel: np.ndarray) -> np.ndarray:
    if isinstance(g, SpaceTimeField):
        if g.grid.shape != grid.shape:
            raise ValueError("boundary data grid does not match the DPP grid")
        if not np.all(g.valid[k][sel]):
            raise ValueError(f"boundary data missing on the strip at slice {k}")
        return g.values[k][sel]
    if callable(g):
        pts = grid.points()[sel]
        return np.broadcast_to(np.asarray(g(pts, grid.times()[k]), dtype=float), pts.shape[:-1])
    return np.full(int(np.count_nonzero(sel)), float(g))


def dpp_solve(g, grid: SpaceTimeGrid, config: DppConfig) -> SpaceTimeField:
    """March the DPP forward in time on Omega with data ``g`` on the strip.

    ``g`` may be a callable ``(points, t)``, a constant, or a SpaceTimeField
    whose ``valid`` mask covers the strip. ``grid.dt`` must equal eps^2/2.
    Values are valid on Omega and the collar.
    """
    eps = config.eps_game
    if abs(grid.dt - config.dt) > 1e-9 * config.dt:
        raise ValueError(f"grid dt = {grid.dt:.6g} must equal eps^2/2 = {config.dt:.6g}")
    if config.n != grid.dim:
        raise ValueError(f"config n = {config.n} does not match grid dimension {grid.dim}")
    if config.p < 2:
        warnings.warn(f"p = {config.p} < 2: the DPP update is not monotone and carries no "
                      "convergence guarantee", NonMonotoneWarning, stacklevel=2)
    r_omega = config.omega_radius(grid)
    strip = boundary_strip(grid, eps, r_omega)
    omega, collar = _omega_and_collar(grid, eps, r_omega)
    collar &= grid.mask()
    offsets = ball_offsets(grid.h, eps, grid.dim)
    idx = np.nonzero(omega)
    weights = config.weights

    out = np.zeros(grid.shape)
    valid = np.zeros(grid.shape, dtype=bool)
    valid[:] = omega | collar
    for k in range(grid.nt):
        u = np.zeros(grid.spatial_shape)
        u[collar] = _strip_values(g, grid, k, collar)
        if k == 0:
            u[omega] = _strip_values(g, grid, 0, strip[0] & omega)
        else:
            hi, lo, mean = _ball_stats(out[k - 1], idx, offsets)
            u[idx] = _combine(hi, lo, mean, weights)
        if not np.all(np.isfinite(u[valid[k]])):
            raise ValueError(f"boundary data missing or non-finite on the strip at slice {k}")
        out[k] = u
    return SpaceTimeField(grid, out, valid)


__all__ = ["DppConfig", "NonMonotoneWarning", "dpp_weights", "boundary_strip", "dpp_update",
           "dpp_solve", "ball_offsets", "fd_time", "dpp_time"]
