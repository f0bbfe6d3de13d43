"""Grids, fields, exponents and intrinsic cylinders.

Everything here is immutable after construction. Spatial index tuples are
``(i,)`` in 1-D and ``(i, j)`` in 2-D; time indices are plain integers.
Field arrays store time on the leading axis: ``values[k, i, j]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np

# Hard ceiling on the number of space-time nodes a grid may describe.
DEFAULT_MAX_NODES = 50_000_000

# Relative slack used when comparing node coordinates against radii/times.
_TOL = 1e-9


@dataclass(frozen=True)
class Exponents:
    """Ellipticity exponent ``p`` and the two degeneracy rates."""

    p: float
    p_tilde: float = 0.0
    q_tilde: float = 0.0

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError(f"p must exceed 1, got {self.p}")
        if not (0 <= self.p_tilde <= self.q_tilde < math.inf):
            raise ValueError(
                "degeneracy exponents must satisfy 0 <= p_tilde <= q_tilde < inf (H1); "
                f"got p_tilde={self.p_tilde}, q_tilde={self.q_tilde}"
            )

    @property
    def alpha_star(self) -> float:
        """Sharp gradient exponent 1/(1+p_tilde)."""
        return 1.0 / (1.0 + self.p_tilde)

    @property
    def theta_star(self) -> float:
        """Intrinsic time scaling (2+p_tilde)/(1+p_tilde) = 1 + alpha_star."""
        return 1.0 + self.alpha_star

    @property
    def growth_exponent(self) -> float:
        return 1.0 + self.alpha_star


@dataclass(frozen=True)
class CoefficientField:
    """Modulating coefficient a(x, t) with its bounds.

    ``evaluator`` takes points of shape ``(..., dim)`` and a time (scalar or
    broadcastable array) and returns an array of shape ``(...)``.
    """

    evaluator: Callable[[np.ndarray, float], np.ndarray]
    a_minus: float
    a_plus: float
    lip_bound: float = 0.0
    time_independent: bool = False

    def __post_init__(self):
        if not (0 < self.a_minus <= self.a_plus < math.inf):
            raise ValueError(
                f"coefficient bounds need 0 < a_minus <= a_plus < inf, got "
                f"({self.a_minus}, {self.a_plus})"
            )

    @classmethod
    def constant(cls, a: float) -> "CoefficientField":
        a = float(a)

        def evaluator(x, t):
            x = np.asarray(x, dtype=float)
            return np.full(x.shape[:-1], a)

        return cls(evaluator, a, a, 0.0, True)

    def __call__(self, x, t) -> np.ndarray:
        return np.asarray(self.evaluator(np.asarray(x, dtype=float), t), dtype=float)

    def check(self, grid: "SpaceTimeGrid") -> float:
        """Verify the bounds on every grid sample and return the FD Lipschitz estimate.

        Raises ``ValueError`` if a sample leaves [a_minus, a_plus] or the
        estimate exceeds ``lip_bound`` by more than O(h + dt).
        """
        pts = grid.points()
        slack = 1e-12 * max(1.0, self.a_plus)
        lip = 0.0
        prev = None
        for t in grid.times():
            vals = np.broadcast_to(self(pts, t), grid.spatial_shape)
            if vals.min() < self.a_minus - slack or vals.max() > self.a_plus + slack:
                raise ValueError(f"coefficient leaves [{self.a_minus}, {self.a_plus}] at t={t}")
            for ax in range(grid.dim):
                d = np.abs(np.diff(vals, axis=ax)) / grid.h
                if d.size:
                    lip = max(lip, float(d.max()))
            if prev is not None:
                lip = max(lip, float(np.abs(vals - prev).max()) / grid.dt)
            prev = vals
        if lip > self.lip_bound + 10 * (grid.h + grid.dt) * max(1.0, self.lip_bound):
            raise ValueError(f"Lipschitz estimate {lip:.4g} exceeds bound {self.lip_bound:.4g}")
        return lip


@dataclass(frozen=True)
class SpaceTimeGrid:
    """Uniform tensor grid on [-R, R]^dim x [t_begin, t_end].

    ``domain`` selects the node mask: ``"ball"`` keeps |x| <= R, ``"box"``
    keeps every node.
    """

    dim: int
    spatial_radius: float
    h: float
    dt: float
    t_begin: float
    t_end: float
    domain: str = "ball"
    max_nodes: int = DEFAULT_MAX_NODES

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if not self.h > 0 or not self.dt > 0:
            raise ValueError(f"step sizes must be positive (h={self.h}, dt={self.dt})")
        if not self.spatial_radius > 0:
            raise ValueError(f"spatial radius must be positive, got {self.spatial_radius}")
        if not self.t_begin < self.t_end:
            raise ValueError(f"need t_begin < t_end, got {self.t_begin} >= {self.t_end}")
        if self.domain not in ("ball", "box"):
            raise ValueError(f"unknown domain {self.domain!r}")
        total = self.nx ** self.dim * self.nt
        if total > self.max_nodes:
            raise ValueError(f"grid has {total} space-time nodes, cap is {self.max_nodes}")

    @property
    def nx(self) -> int:
        return int(math.floor(2 * self.spatial_radius / self.h + _TOL)) + 1

    @property
    def nt(self) -> int:
        return int(math.floor((self.t_end - self.t_begin) / self.dt + _TOL)) + 1

    @property
    def spatial_shape(self) -> tuple:
        return (self.nx,) * self.dim

    @property
    def shape(self) -> tuple:
        return (self.nt,) + self.spatial_shape

    def axis(self) -> np.ndarray:
        return -self.spatial_radius + np.arange(self.nx) * self.h

    def times(self) -> np.ndarray:
        return self.t_begin + np.arange(self.nt) * self.dt

    def points(self) -> np.ndarray:
        """Node coordinates, shape ``spatial_shape + (dim,)`` (read-only)."""
        return self._points

    @cached_property
    def _points(self) -> np.ndarray:
        ax = self.axis()
        mesh = np.meshgrid(*([ax] * self.dim), indexing="ij")
        pts = np.stack(mesh, axis=-1)
        pts.setflags(write=False)
        return pts

    def coords(self, idx: Sequence[int]) -> np.ndarray:
        return -self.spatial_radius + np.asarray(idx, dtype=float) * self.h

    def radius_from(self, center) -> np.ndarray:
        c = np.asarray(center, dtype=float).reshape(self.dim)
        return np.linalg.norm(self.points() - c, axis=-1)

    def mask(self) -> np.ndarray:
        return self._masks[0]

    def interior_mask(self) -> np.ndarray:
        """Masked-in nodes whose full 3^dim neighbourhood is masked-in."""
        return self._masks[1]

    def boundary_mask(self) -> np.ndarray:
        """Masked-in nodes that carry Dirichlet data."""
        return self._masks[2]

    @cached_property
    def _masks(self):
        if self.domain == "box":
            m = np.ones(self.spatial_shape, dtype=bool)
        else:
            m = self.radius_from(np.zeros(self.dim)) <= self.spatial_radius * (1 + _TOL)
        inner = np.zeros_like(m)
        core = tuple(slice(1, -1) for _ in range(self.dim))
        acc = np.ones(tuple(n - 2 for n in self.spatial_shape), dtype=bool)
        for offs in np.ndindex(*(3,) * self.dim):
            sl = tuple(slice(o, o + n - 2) for o, n in zip(offs, self.spatial_shape))
            acc &= m[sl]
        inner[core] = acc
        bnd = m & ~inner
        for arr in (m, inner, bnd):
            arr.setflags(write=False)
        return m, inner, bnd

    def time_index(self, t: float) -> int:
        k = (t - self.t_begin) / self.dt
        ki = int(round(k))
        if abs(k - ki) > 1e-6 or not 0 <= ki < self.nt:
            raise ValueError(f"time {t} is not a grid slice")
        return ki

    def space_index(self, x) -> tuple:
        x = np.asarray(x, dtype=float).reshape(self.dim)
        s = (x + self.spatial_radius) / self.h
        si = np.rint(s).astype(int)
        if np.any(np.abs(s - si) > 1e-6) or np.any(si < 0) or np.any(si >= self.nx):
            raise ValueError(f"point {x.tolist()} is not a grid node")
        return tuple(int(v) for v in si)

    def with_times(self, t_begin: float, t_end: float, dt: Optional[float] = None) -> "SpaceTimeGrid":
        return SpaceTimeGrid(self.dim, self.spatial_radius, self.h, dt or self.dt,
                             t_begin, t_end, self.domain, self.max_nodes)


def make_grid(dim: int, R: float, h: float, dt: float, t_begin: float, t_end: float,
              domain: str = "ball", max_nodes: int = DEFAULT_MAX_NODES) -> SpaceTimeGrid:
    return SpaceTimeGrid(dim, R, h, dt, t_begin, t_end, domain, max_nodes)


def _check_finite(values: np.ndarray, what: str):
    if not np.all(np.isfinite(values)):
        bad = np.argwhere(~np.isfinite(values))[0]
        raise ValueError(f"{what} has a non-finite value at index {tuple(int(i) for i in bad)}")


@dataclass(frozen=True, eq=False)
class ScalarField:
    """One time slice sampled on ``grid``."""

    grid: SpaceTimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.grid.spatial_shape:
            raise ValueError(f"values shape {v.shape} != grid {self.grid.spatial_shape}")
        _check_finite(v, "ScalarField")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __getitem__(self, idx):
        return self.values[tuple(idx)]


@dataclass(frozen=True, eq=False)
class SpaceTimeField:
    """Values on every node of ``grid``; ``valid`` marks nodes that carry data."""

    grid: SpaceTimeGrid
    values: np.ndarray
    valid: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} != grid {self.grid.shape}")
        if self.valid is not None:
            ok = np.array(self.valid, dtype=bool)
            if ok.shape != v.shape:
                raise ValueError("valid mask shape mismatch")
            v = np.where(ok, v, 0.0)
            ok.setflags(write=False)
            object.__setattr__(self, "valid", ok)
        _check_finite(v, "SpaceTimeField")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: SpaceTimeGrid, fn) -> "SpaceTimeField":
        """Sample ``fn(points, t)`` on every slice."""
        pts = grid.points()
        vals = np.empty(grid.shape)
        for k, t in enumerate(grid.times()):
            vals[k] = np.broadcast_to(fn(pts, t), grid.spatial_shape)
        return cls(grid, vals)

    def at(self, space_idx, k: int) -> float:
        return float(self.values[(k,) + tuple(space_idx)])

    def slice(self, k: int) -> ScalarField:
        return ScalarField(self.grid, self.values[k])

    def interpolate(self, x, t) -> np.ndarray:
        """Multilinear interpolation at arbitrary points (explicit request only)."""
        from scipy.interpolate import RegularGridInterpolator

        ax = self.grid.axis()
        interp = RegularGridInterpolator((self.grid.times(),) + (ax,) * self.grid.dim, self.values)
        x = np.atleast_2d(np.asarray(x, dtype=float))
        tt = np.broadcast_to(np.asarray(t, dtype=float), x.shape[:-1])
        return interp(np.column_stack([tt.reshape(-1), x.reshape(-1, self.grid.dim)]))

    def __add__(self, other):
        if isinstance(other, SpaceTimeField):
            return SpaceTimeField(self.grid, self.values + other.values)
        return SpaceTimeField(self.grid, self.values + other, self.valid)

    def __sub__(self, other):
        if isinstance(other, SpaceTimeField):
            return SpaceTimeField(self.grid, self.values - other.values)
        return SpaceTimeField(self.grid, self.values - other, self.valid)

    def __mul__(self, other):
        return SpaceTimeField(self.grid, self.values * other, self.valid)

    __rmul__ = __mul__


@dataclass(frozen=True)
class IntrinsicCylinder:
    """B_rho(x0) x (t0 - rho**theta, t0]."""

    center: tuple
    radius: float
    theta: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"cylinder radius must be positive, got {self.radius}")
        if not self.theta > 0:
            raise ValueError(f"theta must be positive, got {self.theta}")
        x0, t0 = self.center
        object.__setattr__(self, "center", (tuple(np.atleast_1d(np.asarray(x0, float)).tolist()), float(t0)))

    @property
    def x0(self) -> np.ndarray:
        return np.asarray(self.center[0], dtype=float)

    @property
    def t0(self) -> float:
        return self.center[1]

    @property
    def depth(self) -> float:
        return self.radius ** self.theta


def _time_window(grid: SpaceTimeGrid, cyl: IntrinsicCylinder) -> np.ndarray:
    t = grid.times()
    slack = _TOL * grid.dt
    keep = (t > cyl.t0 - cyl.depth + slack) & (t <= cyl.t0 + slack)
    return np.flatnonzero(keep)


def cylinder_masks(grid: SpaceTimeGrid, cyl: IntrinsicCylinder):
    """Spatial ball mask and the time indices of the cylinder (ascending)."""
    x0 = cyl.x0.reshape(-1)
    if x0.size != grid.dim:
        raise ValueError(f"cylinder center has dim {x0.size}, grid has {grid.dim}")
    ball = grid.radius_from(x0) <= cyl.radius + _TOL * grid.h
    return ball, _time_window(grid, cyl)


def cylinder_space_time_mask(grid: SpaceTimeGrid, cyl: IntrinsicCylinder) -> np.ndarray:
    ball, ks = cylinder_masks(grid, cyl)
    out = np.zeros(grid.shape, dtype=bool)
    out[ks] = ball
    return out


def cylinder_nodes(grid: SpaceTimeGrid, cyl: IntrinsicCylinder) -> list:
    """All ``(space index, time index)`` pairs inside the cylinder; ``[]`` if none."""
    ball, ks = cylinder_masks(grid, cyl)
    space = [tuple(int(v) for v in i) for i in np.argwhere(ball)]
    return [(s, int(k)) for k in ks for s in space]


def parabolic_boundary_mask(grid: SpaceTimeGrid, cyl: IntrinsicCylinder) -> np.ndarray:
    """Lateral shell (rho - h, rho] at every slice plus the whole bottom slice."""
    ball, ks = cylinder_masks(grid, cyl)
    out = np.zeros(grid.shape, dtype=bool)
    if ks.size == 0 or not ball.any():
        return out
    r = grid.radius_from(cyl.x0.reshape(-1))
    shell = ball & (r > cyl.radius - grid.h + _TOL * grid.h)
    out[ks] = shell
    out[ks[0]] = ball
    return out


def parabolic_boundary_nodes(grid: SpaceTimeGrid, cyl: IntrinsicCylinder) -> list:
    pb = parabolic_boundary_mask(grid, cyl)
    return [(tuple(int(v) for v in idx[1:]), int(idx[0])) for idx in np.argwhere(pb)]
