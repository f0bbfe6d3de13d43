"""Explicit Euler marching for the Cauchy-Dirichlet problem.

Output slices are those of the grid; the solver sub-steps between them with
a CFL-limited step, so ``grid.dt`` only fixes the storage resolution.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import CoefficientField, Exponents, SpaceTimeField, SpaceTimeGrid
from ._kernels import CAP_EXCEEDED, DIVERGED, NON_FINITE, euler_step, march
from .operator import RegularizationPolicy, grid_lipschitz

logger = logging.getLogger(__name__)


class NumericalFailure(RuntimeError):
    """Base class for CFL and divergence failures."""


class CFLViolation(NumericalFailure):
    pass


class DivergenceError(NumericalFailure):
    pass


@dataclass(frozen=True)
class SolveConfig:
    reg: Optional[RegularizationPolicy] = None
    cfl_safety: float = 0.9
    max_steps: int = 50_000_000
    grad_cap: Optional[float] = None
    auto_clamp: bool = True
    divergence_cap: float = 1e8

    def __post_init__(self):
        if not 0 < self.cfl_safety <= 1:
            raise ValueError(f"cfl_safety must lie in (0, 1], got {self.cfl_safety}")
        if self.grad_cap is not None and not self.grad_cap > 0:
            raise ValueError(f"grad_cap must be positive, got {self.grad_cap}")

    def epsilon(self, h: float) -> float:
        reg = self.reg or RegularizationPolicy.default_for(h)
        return reg.epsilon


@dataclass(frozen=True, eq=False)
class Solution(SpaceTimeField):
    """Solver output; ``info`` holds step counts and the CFL audit trail."""

    info: dict = field(default_factory=dict)


def h_max(exps: Exponents, a_plus: float, grad_cap: float, eps: float) -> float:
    m2 = grad_cap * grad_cap + eps * eps
    return m2 ** (exps.p_tilde / 2) + a_plus * m2 ** (exps.q_tilde / 2)


def cfl_dt(h: float, exps: Exponents, a_plus: float, config: SolveConfig, dim: int = 1,
           grad_cap: Optional[float] = None) -> float:
    """safety * h^2 / (2 dim H_max max(1, p - 1))."""
    cap = grad_cap if grad_cap is not None else (config.grad_cap or 1.0)
    hm = h_max(exps, a_plus, cap, config.epsilon(h))
    return config.cfl_safety * h * h / (2 * dim * hm * max(1.0, exps.p - 1))


def _as_sampler(data, grid: SpaceTimeGrid, what: str):
    """Turn a callable, SpaceTimeField or constant into ``sample(selector, t)``."""
    pts = grid.points()
    if isinstance(data, SpaceTimeField):
        if data.grid.shape != grid.shape or not np.allclose(data.grid.axis(), grid.axis()):
            raise ValueError(f"{what} grid does not match the solve grid")
        vals = data.values
        times = grid.times()

        def sample(sel, t):
            s = (t - times[0]) / grid.dt
            k = min(max(int(math.floor(s + 1e-9)), 0), grid.nt - 1)
            w = s - k
            lo = vals[k][sel]
            if w <= 1e-9 or k + 1 >= grid.nt:
                return lo
            return (1 - w) * lo + w * vals[k + 1][sel]
        return sample
    if callable(data):
        def sample(sel, t):
            x = pts[sel]
            return np.broadcast_to(np.asarray(data(x, t), dtype=float), x.shape[:-1])
        if getattr(data, "time_independent", False):
            cache = {}

            def cached(sel, t):
                key = repr(sel) if isinstance(sel, tuple) else id(sel)
                if key not in cache:
                    cache[key] = np.array(sample(sel, t))
                return cache[key]
            return cached
        return sample
    const = float(data)
    return lambda sel, t: np.full(pts[sel].shape[:-1], const)


def step(u: np.ndarray, t: float, dt: float, grid: SpaceTimeGrid, f: np.ndarray,
         coeff: CoefficientField, exps: Exponents, eps: float, boundary_next: np.ndarray,
         grad_cap: Optional[float] = None, a: Optional[np.ndarray] = None):
    """One forward Euler step on the interior, then the Dirichlet overwrite.

    ``f`` is the source on the full slice at time ``t``; ``boundary_next``
    holds the values at ``t + dt`` on ``grid.boundary_mask()``. Returns
    ``(u_next, max_grad)`` where ``max_grad`` is the realized interior
    |grad u| of the input slice.
    """
    if a is None:
        a = np.ascontiguousarray(np.broadcast_to(coeff(grid.points(), t), grid.spatial_shape))
    nxt = u.copy()
    max_grad = euler_step(u, nxt, grid.interior_mask(), np.ascontiguousarray(f, dtype=float), a,
                          grid.h, dt, eps, exps.p, exps.p_tilde, exps.q_tilde)
    if grad_cap is not None and max_grad > grad_cap:
        raise CFLViolation(f"realized |grad u| = {max_grad:.6g} exceeds grad_cap = {grad_cap:.6g} at t = {t:.6g}")
    nxt[grid.boundary_mask()] = boundary_next
    if not np.isfinite(max_grad) or not np.all(np.isfinite(nxt)):
        bad = tuple(int(i) for i in np.argwhere(~np.isfinite(nxt))[0]) if not np.all(np.isfinite(nxt)) else None
        local = _local_grad(u, bad, grid.h) if bad else float("nan")
        raise DivergenceError(f"non-finite value at node {bad}, t = {t + dt:.6g}; local |grad u| = {local:.6g}")
    return nxt, max_grad


def _local_grad(u, node, h):
    g = 0.0
    for ax in range(u.ndim):
        lo = list(node)
        hi = list(node)
        lo[ax] = max(node[ax] - 1, 0)
        hi[ax] = min(node[ax] + 1, u.shape[ax] - 1)
        g += ((u[tuple(hi)] - u[tuple(lo)]) / (2 * h)) ** 2
    return math.sqrt(g)


def _block_values(data, sampler, grid: SpaceTimeGrid, sel, pts_sel: np.ndarray, ts: np.ndarray) -> np.ndarray:
    """Values of ``data`` at the selected nodes for every time in ``ts``; shape (len(ts), n)."""
    n = pts_sel.shape[0]
    if callable(data) and not isinstance(data, SpaceTimeField):
        try:
            v = np.asarray(data(pts_sel[None, :, :], ts[:, None]), dtype=float)
            return np.ascontiguousarray(np.broadcast_to(v, (len(ts), n)))
        except (ValueError, TypeError, IndexError):
            pass
    return np.ascontiguousarray([np.broadcast_to(sampler(sel, t), (n,)) for t in ts], dtype=float)


def solve_cauchy_dirichlet(g, f, coeff: CoefficientField, exps: Exponents,
                           grid: SpaceTimeGrid, config: SolveConfig = SolveConfig()) -> Solution:
    """March u_t = H(x, t, grad u) Lap_p^N u + f from the bottom slice.

    ``g`` supplies the initial slice and the Dirichlet data on the mask
    boundary; ``f`` the source. Each may be a callable ``(points, t)``, a
    SpaceTimeField on ``grid`` (linear in time between slices) or a constant.
    Callables flagged ``time_independent`` are evaluated once, and then whole
    blocks of steps run inside the compiled loop.
    """
    t_start = time.perf_counter()
    dim = grid.dim
    eps = config.epsilon(grid.h)
    mask = grid.mask()
    bmask = grid.boundary_mask()
    interior = grid.interior_mask()
    bidx = np.nonzero(bmask)
    bi = np.ascontiguousarray(bidx[0], dtype=np.int64)
    bj = np.ascontiguousarray(bidx[1] if dim == 2 else bidx[0], dtype=np.int64)
    g_at = _as_sampler(g, grid, "boundary data")
    f_at = _as_sampler(f, grid, "source")
    times = grid.times()
    full = (slice(None),) * dim
    pts = grid.points()
    pts_b = pts[bmask]
    f_static = not isinstance(f, SpaceTimeField) and (
        not callable(f) or getattr(f, "time_independent", False))
    a_fixed = None
    if coeff.time_independent:
        a_fixed = np.ascontiguousarray(np.broadcast_to(coeff(pts, times[0]), grid.spatial_shape), dtype=float)
    block = 1024 if (f_static and a_fixed is not None) else 1

    u = np.array(g_at(full, times[0]), dtype=float)
    if not np.all(np.isfinite(u[mask])):
        raise ValueError("initial data is not finite on the domain")
    u = np.ascontiguousarray(np.where(np.isfinite(u), u, 0.0))
    tmp = np.empty_like(u)
    out = np.empty(grid.shape)
    out[0] = u

    fixed_cap = config.grad_cap
    lip0 = grid_lipschitz(u, grid.h, mask)
    cap = fixed_cap if fixed_cap is not None else 2 * lip0 + 1
    dt0 = cfl_dt(grid.h, exps, coeff.a_plus, config, dim, cap)
    if grid.dt > dt0 * (1 + 1e-12) and not config.auto_clamp:
        raise CFLViolation(f"grid dt = {grid.dt:.6g} exceeds the CFL bound {dt0:.6g} and auto-clamp is off")

    steps = 0
    max_grad = 0.0
    dt_min, dt_max = math.inf, 0.0
    for k in range(grid.nt - 1):
        t, t_next = times[k], times[k + 1]
        while t < t_next - 1e-12 * max(1.0, abs(t_next)):
            dt_c = cfl_dt(grid.h, exps, coeff.a_plus, config, dim, cap)
            remaining = t_next - t
            n = max(1, math.ceil(remaining / dt_c - 1e-9))
            dt = remaining / n
            nb = min(n, block)
            ts = t + dt * np.arange(1, nb + 1)
            if nb == n:
                ts[-1] = t_next
            bvals = _block_values(g, g_at, grid, bmask, pts_b, ts)
            fv = np.ascontiguousarray(np.broadcast_to(f_at(full, t), grid.spatial_shape), dtype=float)
            a = a_fixed if a_fixed is not None else np.ascontiguousarray(
                np.broadcast_to(coeff(pts, t), grid.spatial_shape), dtype=float)
            run_cap = fixed_cap if fixed_cap is not None else cap
            done, mg, status, last = march(u, tmp, interior, bi, bj, bvals, fv, a, grid.h, dt, eps,
                                           exps.p, exps.p_tilde, exps.q_tilde, run_cap,
                                           config.divergence_cap)
            max_grad = max(max_grad, mg)
            if done:
                dt_min, dt_max = min(dt_min, dt), max(dt_max, dt)
                t = float(ts[done - 1])
                steps += done
            if status == CAP_EXCEEDED:
                if fixed_cap is not None:
                    raise CFLViolation(f"realized |grad u| = {last:.6g} exceeds grad_cap = {fixed_cap:.6g} at t = {t:.6g}")
                cap = 2 * last + 1
                continue
            if status == NON_FINITE:
                bad = tuple(int(i) for i in np.argwhere(~np.isfinite(u))[0])
                raise DivergenceError(f"non-finite value at node {bad}, t = {t:.6g}; "
                                      f"local |grad u| before the step = {last:.6g}")
            if status == DIVERGED:
                node = np.unravel_index(np.argmax(np.where(mask, np.abs(u), 0)), u.shape)
                raise DivergenceError(f"|u| exceeded {config.divergence_cap:g} at node "
                                      f"{tuple(int(i) for i in node)}, t = {t:.6g}")
            if fixed_cap is None:
                cap = 2 * last + 1
            if steps > config.max_steps:
                raise NumericalFailure(f"step budget {config.max_steps} exhausted at t = {t:.6g}")
        out[k + 1] = u

    info = dict(steps=steps, max_grad=max_grad, grad_cap=cap, dt_min=dt_min, dt_max=dt_max,
                epsilon=eps, runtime=time.perf_counter() - t_start)
    logger.info("solve: %d steps, max|grad u| = %.4g, %.2fs", steps, max_grad, info["runtime"])
    return Solution(grid, out, None, info)
