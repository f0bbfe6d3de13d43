"""Measurements on sampled fields: oscillations, growth exponents, seminorms.

All routines read only nodes that are inside the grid mask and marked
valid on the field. Cylinders are the intrinsic ones of ``core``:
B_r(x0) x (t0 - r^theta, t0].
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import optimize, stats

from .core import (IntrinsicCylinder, ScalarField, SpaceTimeField, cylinder_space_time_mask,
                   parabolic_boundary_mask)
from .operator import interior_gradient

_TOL = 1e-9


class MeasurementWarning(UserWarning):
    """A measurement ran but one of its preconditions did not hold."""


def _usable(u: SpaceTimeField) -> np.ndarray:
    m = np.broadcast_to(u.grid.mask(), u.grid.shape)
    return m if u.valid is None else u.valid & m


def _cylinder_values(u: SpaceTimeField, cyl: IntrinsicCylinder) -> np.ndarray:
    m = cylinder_space_time_mask(u.grid, cyl) & _usable(u)
    if not m.any():
        raise ValueError(f"cylinder of radius {cyl.radius} around {cyl.center} contains no usable nodes")
    return m


def oscillation(u: SpaceTimeField, cyl: IntrinsicCylinder) -> float:
    """max - min of u over the cylinder's nodes."""
    v = u.values[_cylinder_values(u, cyl)]
    return float(v.max() - v.min())


@dataclass(frozen=True)
class DetrendedOsc:
    """Result of ``plane_detrended_osc``; unpacks as ``(osc, plane)``."""

    osc: float
    plane: np.ndarray
    flagged: bool = False
    note: str = ""

    def __iter__(self):
        return iter((self.osc, self.plane))


def _minimax_plane(x: np.ndarray, hi: np.ndarray, lo: np.ndarray) -> Optional[np.ndarray]:
    """Slope l minimising max(hi - l.x) - min(lo - l.x), or None if the LP fails.

    Variables are (l, s, m); constraints hi_i - l.x_i <= s and lo_i - l.x_i >= m.
    The LP vertex is re-solved on its tight constraints so the slope is
    accurate to round-off rather than to the LP tolerance.
    """
    n, d = x.shape
    c = np.concatenate([np.zeros(d), [1.0, -1.0]])
    A = np.block([[-x, -np.ones((n, 1)), np.zeros((n, 1))],
                  [x, np.zeros((n, 1)), np.ones((n, 1))]])
    b = np.concatenate([-hi, lo])
    scale = max(1.0, float(np.max(np.abs(b))))
    res = optimize.linprog(c, A_ub=A, b_ub=b, bounds=[(None, None)] * (d + 2), method="highs-ds")
    if res.status != 0:
        return None
    z = res.x
    tight = np.abs(A @ z - b) <= 1e-7 * scale
    if np.count_nonzero(tight) >= d + 2:
        At, bt = A[tight], b[tight]
        if np.linalg.matrix_rank(At) == d + 2:
            zp, *_ = np.linalg.lstsq(At, bt, rcond=None)
            if np.all(A @ zp - b <= 1e-9 * scale) and c @ zp <= c @ z + 1e-9 * scale:
                z = zp
    return z[:d]


def plane_detrended_osc(u: SpaceTimeField, cyl: IntrinsicCylinder) -> DetrendedOsc:
    """min over slopes l of osc(u - l.x) on the cylinder, with the minimising l.

    The minimax slope is found exactly by linear programming, so the result
    never exceeds ``oscillation`` and shifts by -b under u -> u + b.x.
    Degenerate node sets (all spatial nodes on a line in 2-D, or a single
    node) fall back to l = 0 and are flagged.
    """
    grid = u.grid
    m = _cylinder_values(u, cyl)
    space = m.any(axis=0)
    vals = np.where(m, u.values, np.nan)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        hi = np.nanmax(vals, axis=0)[space]
        lo = np.nanmin(vals, axis=0)[space]
    x = grid.points()[space] - cyl.x0.reshape(-1)
    base = float(hi.max() - lo.min())
    zero = np.zeros(grid.dim)
    design = np.column_stack([x, np.ones(len(x))])
    if np.linalg.matrix_rank(design) < grid.dim + 1:
        return DetrendedOsc(base, zero, True, "rank-deficient node set; slope fixed at 0")
    plane = _minimax_plane(x, hi, lo)
    if plane is None:
        return DetrendedOsc(base, zero, True, "linear program failed; slope fixed at 0")
    r = x @ plane
    osc = float((hi - r).max() - (lo - r).min())
    if osc > base:
        return DetrendedOsc(base, zero, False, "zero slope optimal")
    return DetrendedOsc(osc, plane)


def _center_index(grid, center):
    x0 = np.atleast_1d(np.asarray(center[0], dtype=float))
    sidx = grid.space_index(x0)
    if not np.allclose(grid.coords(sidx), x0, atol=_TOL * grid.h):
        raise ValueError(f"center {tuple(x0)} is not a grid node")
    k = grid.time_index(float(center[1]))
    if abs(grid.times()[k] - float(center[1])) > _TOL * max(grid.dt, 1.0):
        raise ValueError(f"center time {center[1]} is not a grid time")
    return sidx, k


def dyadic_osc_sequence(u: SpaceTimeField, center, theta: float, j_max: int,
                        j_min: int = 0) -> list:
    """S_j = sup over Q_{2^-j, theta}(center) of u - u(center), j = j_min..j_max.

    Requires 2^-j_max >= 4h. If u(center) is not the minimum over the largest
    cylinder a MeasurementWarning is issued and S_j are signed values.
    """
    grid = u.grid
    if 2.0 ** -j_max < 4 * grid.h * (1 - _TOL):
        raise ValueError(f"2^-{j_max} is below the resolution floor 4h = {4 * grid.h:g}")
    sidx, k = _center_index(grid, center)
    uc = u.values[(k,) + sidx]
    out = []
    for j in range(j_min, j_max + 1):
        cyl = IntrinsicCylinder(center, 2.0 ** -j, theta)
        m = _cylinder_values(u, cyl)
        d = u.values[m] - uc
        if j == j_min and d.min() < -1e-12 * max(1.0, abs(uc)):
            warnings.warn("u(center) is not the minimum over the largest cylinder; "
                          "S_j are signed values", MeasurementWarning, stacklevel=2)
        out.append(float(d.max()))
    return out


@dataclass(frozen=True)
class ExponentFit:
    slope: float
    intercept: float
    r_squared: float
    radii: np.ndarray
    floor: float
    dropped: tuple = ()

    def __str__(self):
        return (f"slope = {self.slope:.6g}, intercept = {self.intercept:.6g}, R^2 = {self.r_squared:.6g}, "
                f"{len(self.radii)} radii, floor = {self.floor:g}")


def fit_growth_exponent(radii: Sequence[float], oscs: Sequence[float], floor: float = 0.0) -> ExponentFit:
    """Least-squares slope of log(osc) against log(r).

    Radii below ``floor`` and non-positive oscillations are dropped (and
    listed in ``dropped``); fewer than three remaining points is an error.
    """
    r = np.asarray(radii, dtype=float)
    o = np.asarray(oscs, dtype=float)
    if r.shape != o.shape or r.ndim != 1:
        raise ValueError("radii and oscs must be 1-D sequences of equal length")
    if np.any(np.diff(r) >= 0):
        raise ValueError("radii must be strictly decreasing")
    dropped = []
    keep = np.ones(len(r), dtype=bool)
    for i in range(len(r)):
        if r[i] < floor * (1 - _TOL):
            keep[i] = False
            dropped.append((float(r[i]), "below floor"))
        elif not o[i] > 0:
            keep[i] = False
            dropped.append((float(r[i]), "non-positive oscillation"))
    if keep.sum() < 3:
        raise ValueError(f"need at least 3 usable radii, have {int(keep.sum())}")
    lr, lo = np.log(r[keep]), np.log(o[keep])
    fit = stats.linregress(lr, lo)
    return ExponentFit(float(fit.slope), float(fit.intercept), float(fit.rvalue ** 2),
                       r[keep], float(floor), tuple(dropped))


# ---------------------------------------------------------------------------
# seminorms

def _offsets(dim: int, nx: int, nt: int, with_time: bool, with_space: bool):
    """Deterministic pair offsets (dk, di[, dj]) grouped by dyadic shells, small shells first."""
    def scales(n):
        s, out = 1, []
        while s < n:
            out.append(s)
            s *= 2
        return out

    sp = scales(nx) if with_space else []
    tp = scales(nt) if with_time else []
    dirs_full = [d for d in itertools.product((-1, 0, 1), repeat=dim) if any(d)]
    dirs_half = [d for d in dirs_full if d > tuple([0] * dim)]
    shells = []
    for s in sp:
        shells.append((s, 0, [(0,) + tuple(s * c for c in d) for d in dirs_half]))
    for st in tp:
        shells.append((0, st, [(st,) + (0,) * dim]))
        for s in sp:
            shells.append((s, st, [(st,) + tuple(s * c for c in d) for d in dirs_full]))
    shells.sort(key=lambda e: (max(e[0], 1) * max(e[1], 1), e[0], e[1]))
    return [o for _, _, offs in shells for o in offs]


def _shifted(a: np.ndarray, off):
    """Views (a[x], a[x + off]) over all x where both exist."""
    src, dst = [], []
    for d, n in zip(off, a.shape):
        if d >= 0:
            src.append(slice(0, n - d))
            dst.append(slice(d, n))
        else:
            src.append(slice(-d, n))
            dst.append(slice(0, n + d))
    return a[tuple(src)], a[tuple(dst)]


def _pair_sup(values: np.ndarray, ok: np.ndarray, h: float, dt: float, alpha: float,
              budget: int, time_only: bool = False, time_power: float = None) -> float:
    """sup |v(P) - v(Q)| / dist(P, Q) over node pairs.

    ``values`` has shape ``ok.shape + (ncomp,)``. dist is |x - y|^alpha +
    |t - s|^(alpha/2), or |t - s|^time_power for same-point pairs when
    ``time_only``. All pairs are enumerated when there are at most
    ``budget``; otherwise offsets from dyadic shells are scanned, smallest
    shells first, until about ``budget`` pairs have been examined.
    """
    nt = ok.shape[0]
    spatial = ok.shape[1:]
    dim = len(spatial)
    idx = np.argwhere(ok)
    n = len(idx)
    if n < 2:
        return 0.0
    best = 0.0
    if n * (n - 1) // 2 <= budget:
        v = values[ok]
        x = idx[:, 1:] * h
        t = idx[:, 0] * dt
        for i in range(n - 1):
            dv = np.linalg.norm(v[i + 1:] - v[i], axis=-1)
            dx = np.linalg.norm(x[i + 1:] - x[i], axis=-1)
            dtt = np.abs(t[i + 1:] - t[i])
            if time_only:
                sel = dx == 0
                den = dtt[sel] ** time_power
                dv = dv[sel]
            else:
                den = dx ** alpha + dtt ** (alpha / 2)
            if den.size:
                best = max(best, float(np.max(dv / den)))
        return best
    used = 0
    for off in _offsets(dim, max(spatial), nt, True, not time_only):
        a_ok, b_ok = _shifted(ok, off)
        both = a_ok & b_ok
        cnt = int(both.sum())
        if cnt == 0:
            continue
        va, vb = _shifted(values, tuple(off) + (0,))
        dv = np.linalg.norm(vb[both] - va[both], axis=-1)
        dx = math.sqrt(sum((o * h) ** 2 for o in off[1:]))
        dtt = abs(off[0]) * dt
        den = dtt ** time_power if time_only else dx ** alpha + dtt ** (alpha / 2)
        best = max(best, float(dv.max() / den))
        used += cnt
        if used >= budget:
            break
    return best


def _check_alpha(alpha):
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")


def holder_seminorm(u: SpaceTimeField, alpha: float, budget: int = 1_000_000) -> float:
    """sup |u(y,s) - u(x,t)| / (|x - y|^alpha + |t - s|^(alpha/2))."""
    _check_alpha(alpha)
    g = u.grid
    return _pair_sup(u.values[..., None], _usable(u), g.h, g.dt, alpha, budget)


def time_holder_seminorm(u: SpaceTimeField, alpha: float, budget: int = 1_000_000) -> float:
    """sup |u(x,s) - u(x,t)| / |t - s|^((1 + alpha)/2) over same-point pairs."""
    _check_alpha(alpha)
    g = u.grid
    return _pair_sup(u.values[..., None], _usable(u), g.h, g.dt, alpha, budget,
                     time_only=True, time_power=(1 + alpha) / 2)


def gradient_field(u: SpaceTimeField):
    """Central-difference gradient on every slice: (values (nt, *spatial, dim), ok mask)."""
    g = u.grid
    inner = (slice(1, -1),) * g.dim
    grads = np.zeros(g.shape + (g.dim,))
    for k in range(g.nt):
        gk = interior_gradient(u.values[k], g.h)
        grads[(k,) + inner] = np.moveaxis(gk, 0, -1)
    # a central difference is trusted only when its whole stencil is usable
    use = _usable(u)
    ok = np.zeros(g.shape, dtype=bool)
    stencil = use[(slice(None),) + inner].copy()
    for ax in range(g.dim):
        for side in (slice(2, None), slice(None, -2)):
            sl = [slice(None)] + [slice(1, -1)] * g.dim
            sl[ax + 1] = side
            stencil &= use[tuple(sl)]
    ok[(slice(None),) + inner] = stencil
    return grads, ok


def gradient_holder_seminorm(u: SpaceTimeField, alpha: float, budget: int = 1_000_000) -> float:
    """The Holder quotient applied to the finite-difference gradient field."""
    _check_alpha(alpha)
    grads, ok = gradient_field(u)
    return _pair_sup(grads, ok, u.grid.h, u.grid.dt, alpha, budget)


def critical_set(u, k: int = None, tol: float = None) -> list:
    """Interior spatial nodes of slice ``k`` where |grad u| <= tol."""
    if tol is None or not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    if isinstance(u, ScalarField):
        grid, vals = u.grid, u.values
        use = grid.mask()
    else:
        grid = u.grid
        k = grid.nt - 1 if k is None else k
        vals = u.values[k]
        use = _usable(u)[k]
    inner = (slice(1, -1),) * grid.dim
    mag = np.full(grid.spatial_shape, np.inf)
    mag[inner] = np.linalg.norm(interior_gradient(vals, grid.h), axis=0)
    interior = grid.interior_mask() & use
    hit = interior & (mag <= tol)
    return [tuple(int(i) for i in idx) for idx in np.argwhere(hit)]


@dataclass(frozen=True)
class NondegProfile:
    radii: np.ndarray
    sups: np.ndarray
    extremal: str
    flags: tuple = field(default_factory=tuple)

    def fit(self, floor: float = 0.0) -> ExponentFit:
        return fit_growth_exponent(self.radii, self.sups, floor)


def nondegeneracy_profile(u: SpaceTimeField, center, theta: float, radii: Sequence[float]) -> NondegProfile:
    """sup over the parabolic boundary of Q_{r,theta}(center) of u - u(center), per radius.

    The center is checked to be a spatial extremum of its slice against its
    3^d grid neighbourhood; if not, the profile is still computed and flagged.
    """
    grid = u.grid
    sidx, k = _center_index(grid, center)
    uc = u.values[(k,) + sidx]
    lo = [max(i - 1, 0) for i in sidx]
    hood = u.values[(k,) + tuple(slice(a, i + 2) for a, i in zip(lo, sidx))]
    flags = []
    if np.all(hood >= uc):
        kind = "min"
    elif np.all(hood <= uc):
        kind = "max"
    else:
        kind = "none"
        flags.append("center is not a spatial extremum of its slice")
        warnings.warn(flags[-1], MeasurementWarning, stacklevel=2)
    use = _usable(u)
    sups = []
    for r in radii:
        cyl = IntrinsicCylinder(center, float(r), theta)
        pb = parabolic_boundary_mask(grid, cyl) & use
        if not pb.any():
            raise ValueError(f"parabolic boundary of radius {r} has no usable nodes")
        sups.append(float(np.max(u.values[pb] - uc)))
    sups = np.asarray(sups)
    if np.all(sups <= 0):
        flags.append("all boundary suprema vanish; growth fit is degenerate")
    return NondegProfile(np.asarray(radii, dtype=float), sups, kind, tuple(flags))


__all__ = ["oscillation", "plane_detrended_osc", "DetrendedOsc", "dyadic_osc_sequence",
           "ExponentFit", "fit_growth_exponent", "holder_seminorm", "time_holder_seminorm",
           "gradient_holder_seminorm", "gradient_field", "critical_set", "nondegeneracy_profile",
           "NondegProfile", "MeasurementWarning"]
