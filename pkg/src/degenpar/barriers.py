"""Explicit barriers and a grid check that a sampled field is a supersolution.

NonDegBarrier is c(|x - x0|^(1+alpha) + (t0 - t)^((1+alpha)/theta)); with
alpha = 1/(1 + p_tilde) and theta = 1 + alpha it satisfies
dPhi/dt - H Lap_p^N Phi >= -|c0| once c <= |c0| / K.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CoefficientField, Exponents, SpaceTimeField, SpaceTimeGrid
from .operator import _eps, residual


@dataclass(frozen=True)
class NonDegBarrier:
    c: float
    alpha: float
    theta: float
    center: tuple = ((0.0, 0.0), 0.0)

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not self.theta > 0:
            raise ValueError(f"theta must be positive, got {self.theta}")

    @classmethod
    def canonical(cls, exps: Exponents, c: float, center=((0.0, 0.0), 0.0)) -> "NonDegBarrier":
        a = exps.alpha_star
        return cls(c, a, 1 + a, center)

    @property
    def x0(self) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.center[0], dtype=float))

    @property
    def t0(self) -> float:
        return float(self.center[1])

    def __call__(self, x, t):
        """Defined for t <= t0; later times are clipped to t0."""
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x - self.x0, axis=-1)
        lag = np.maximum(self.t0 - np.asarray(t, dtype=float), 0.0)
        e = 1 + self.alpha
        return self.c * (r ** e + lag ** (e / self.theta))

    def boundary_minimum(self, radius: float) -> float:
        """Smallest value on the parabolic boundary of Q_{radius, theta}: c r^(1+alpha)."""
        e = 1 + self.alpha
        return self.c * min(radius ** e, (radius ** self.theta) ** (e / self.theta))


@dataclass(frozen=True)
class TimeHolderBarrier:
    eta: float
    M1: float
    M2: float
    t0: float = 0.0

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")

    def __call__(self, x, t):
        x = np.asarray(x, dtype=float)
        return (self.eta + self.M1 * (np.asarray(t, dtype=float) - self.t0)
                + (self.M2 / self.eta) * np.sum(x * x, axis=-1))


def barrier_denominator(n: int, exps: Exponents, a_plus: float) -> float:
    """K = 1 + 2^(1+q_tilde) (1 + a+) (n - 1 + alpha (p - 1)) with alpha = alpha*."""
    return 1 + 2 ** (1 + exps.q_tilde) * (1 + a_plus) * (n - 1 + exps.alpha_star * (exps.p - 1))


def admissible_c(n: int, exps: Exponents, a_plus: float, c0_mag: float) -> float:
    """Largest c the non-degeneracy argument admits: min(1, |c0| / K).

    ``c0_mag`` is |c0| for a source with sup f <= c0 < 0.
    """
    if not c0_mag > 0:
        raise ValueError(f"|c0| must be positive, got {c0_mag}")
    return min(1.0, c0_mag / barrier_denominator(n, exps, a_plus))


def time_barrier_constant_C(n: int, p: float, a_plus: float, q_tilde: float) -> float:
    """max(1, p - 1) n 2^(1+q_tilde) (1 + a+).

    Bounds H(grad v) |Lap_p^N v| for v = (M2/eta)|x|^2 on B_1 after using
    |grad v| <= 2 M2/eta and Lap_p^N v <= max(1, p - 1) n 2 M2/eta.
    """
    return max(1.0, p - 1) * n * 2 ** (1 + q_tilde) * (1 + a_plus)


def time_barrier_constants(lip: float, sup_u: float, eta: float, exps: Exponents, a_plus: float,
                           n: int, p: float, sup_f: float):
    """(M1, M2) with M2 = lip^2 + (8/3)^2 sup_u^2 and
    M1 = C (M2^(1+pt)/eta^(1+pt) + M2^(1+qt)/eta^(1+qt)) + sup_f."""
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta}")
    M2 = lip ** 2 + (8 / 3) ** 2 * sup_u ** 2
    C = time_barrier_constant_C(n, p, a_plus, exps.q_tilde)
    pt, qt = exps.p_tilde, exps.q_tilde
    M1 = C * (M2 ** (1 + pt) / eta ** (1 + pt) + M2 ** (1 + qt) / eta ** (1 + qt)) + sup_f
    return M1, M2


@dataclass(frozen=True)
class SupersolutionReport:
    min_margin: float
    tol: float
    passed: bool
    witness: tuple
    checked: int

    def __str__(self):
        verdict = "PASS" if self.passed else "FAIL"
        return (f"{verdict} min margin = {self.min_margin:.6g} (tol = -{self.tol:.3g}) "
                f"over {self.checked} nodes; worst node {self.witness}")


def verify_supersolution(phi: SpaceTimeField, f_bound: float, coeff: CoefficientField,
                         exps: Exponents, reg=None, grid: SpaceTimeGrid = None,
                         center=None, exclude: float = None) -> SupersolutionReport:
    """Check dPhi/dt - H Lap_p^N Phi - f_bound >= -10(h + eps) on the grid.

    Nodes within ``exclude`` (default 2h) of the spatial ``center`` are
    skipped since Phi need not be C^2 there. Time derivatives are backward
    differences, so the bottom slice is never checked.
    """
    grid = grid or phi.grid
    if grid != phi.grid:
        raise ValueError("phi lives on a different grid")
    eps = _eps(reg)
    if center is None:
        center = np.zeros(grid.dim)
    exclude = 2 * grid.h if exclude is None else exclude
    res = residual(phi, lambda x, t: np.full(np.asarray(x).shape[:-1], float(f_bound)), coeff, exps, reg,
                   on_singular="skip")
    keep = res.valid & (grid.radius_from(np.atleast_1d(center)) > exclude + 1e-9 * grid.h)[None]
    if not keep.any():
        raise ValueError("grid too coarse: no interior nodes remain after excluding the singular neighbourhood")
    vals = np.where(keep, res.values, np.inf)
    flat = int(np.argmin(vals))
    idx = np.unravel_index(flat, vals.shape)
    margin = float(vals[idx])
    tol = 10 * (grid.h + eps)
    witness = (tuple(int(i) for i in idx[1:]), int(idx[0]))
    return SupersolutionReport(margin, tol, margin >= -tol, witness, int(keep.sum()))


__all__ = ["NonDegBarrier", "TimeHolderBarrier", "admissible_c", "barrier_denominator",
           "time_barrier_constants", "time_barrier_constant_C", "verify_supersolution",
           "SupersolutionReport"]
