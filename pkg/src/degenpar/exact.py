"""Closed-form solutions with their exact source terms.

Closures take points of shape ``(..., dim)`` and a time and are evaluated
on demand; nothing is tabulated.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import CoefficientField, Exponents, SpaceTimeField, SpaceTimeGrid


@dataclass(frozen=True)
class ReferenceSolution:
    u: Callable
    f: Callable
    coeff: CoefficientField
    exps: Exponents
    note: str = ""
    grad: Callable = None
    name: str = ""

    def sample(self, grid: SpaceTimeGrid) -> SpaceTimeField:
        return SpaceTimeField.from_function(grid, self.u)

    def source(self, grid: SpaceTimeGrid) -> SpaceTimeField:
        return SpaceTimeField.from_function(grid, self.f)


def _norm(x):
    return np.linalg.norm(np.asarray(x, dtype=float), axis=-1)


def sharp_example(n: int, p: float, q_tilde: float) -> ReferenceSolution:
    """u = |x|^(1 + 1/(1+pt)) + t with pt = p - 2 and a = 1.

    The growth at the critical point x = 0 is exactly 1 + 1/(1 + pt), the
    optimal rate along critical points.
    """
    if p < 2:
        raise ValueError(f"sharp example needs p >= 2 (so that p_tilde = p - 2 >= 0), got {p}")
    pt = p - 2.0
    exps = Exponents(p, pt, q_tilde)
    alpha = exps.alpha_star
    theta = (2.0 + pt) / (1.0 + pt)
    radial = n - 1 + (p - 1) / (1 + pt)
    c_p = theta ** (1 + pt)
    c_q = theta ** (1 + q_tilde)
    power = (q_tilde - pt) / (1 + pt)

    def u(x, t):
        return _norm(x) ** (1 + alpha) + t

    def f(x, t):
        r = _norm(x)
        return 1.0 - radial * (c_p + r ** power * c_q) + 0.0 * np.asarray(t)

    def grad(x, t):
        x = np.asarray(x, dtype=float)
        r = _norm(x)[..., None]
        with np.errstate(divide="ignore", invalid="ignore"):
            g = (1 + alpha) * np.where(r > 0, r ** (alpha - 1) * x, 0.0)
        return g

    f.time_independent = True
    return ReferenceSolution(
        u, f, CoefficientField.constant(1.0), exps,
        note=f"valid on B_1 x (-1, 0] in dimension {n}; not C^2 at x = 0",
        grad=grad, name="sharp",
    )


def affine_solution(b, c: float = 0.0, exps: Exponents = None,
                    coeff: CoefficientField = None) -> ReferenceSolution:
    b = np.asarray(b, dtype=float)

    def u(x, t):
        return np.asarray(x, dtype=float) @ b + c + 0.0 * np.asarray(t)

    def f(x, t):
        return np.zeros(np.asarray(x).shape[:-1])

    def grad(x, t):
        return np.broadcast_to(b, np.asarray(x).shape).copy()

    f.time_independent = True
    return ReferenceSolution(
        u, f, coeff or CoefficientField.constant(1.0), exps or Exponents(2.0),
        note="zero Hessian; solves the equation for any exponents and coefficient",
        grad=grad, name="affine",
    )


def heat_reference(k) -> ReferenceSolution:
    """u = exp(-2|k|^2 t) cos(k.x), solving du/dt = 2 Lap u (p = 2, H = 1 + a = 2)."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    k2 = float(k @ k)

    def u(x, t):
        return np.exp(-2 * k2 * t) * np.cos(np.asarray(x, dtype=float) @ k)

    def f(x, t):
        return np.zeros(np.asarray(x).shape[:-1])

    def grad(x, t):
        x = np.asarray(x, dtype=float)
        return -np.exp(-2 * k2 * t) * np.sin(x @ k)[..., None] * k

    f.time_independent = True
    return ReferenceSolution(
        u, f, CoefficientField.constant(1.0), Exponents(2.0, 0.0, 0.0),
        note="smooth everywhere", grad=grad, name="heat",
    )


REFERENCES = {"sharp", "affine", "heat"}
