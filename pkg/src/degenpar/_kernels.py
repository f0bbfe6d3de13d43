"""Fused numba loops for the explicit step.

These mirror ``operator.diffusion_term`` node for node; the test-suite
checks the two against each other. Reductions run in a fixed serial order.
"""

import math

from numba import njit


@njit(cache=True)
def _power(m, e):
    # small integer exponents are common and pow() dominates the step cost
    if e == 0.0:
        return 1.0
    if e == 1.0:
        return m
    if e == 2.0:
        return m * m
    k = int(e)
    if k == e and k <= 8:
        r = m
        for _ in range(k - 1):
            r *= m
        return r
    return m ** e


@njit(cache=True)
def euler_2d(u, out, interior, f, a, h, dt, eps, p, pt, qt):
    nx, ny = u.shape
    inv2h = 1.0 / (2.0 * h)
    invh2 = 1.0 / (h * h)
    inv4h2 = 1.0 / (4.0 * h * h)
    e2 = eps * eps
    gmax = 0.0
    for i in range(1, nx - 1):
        for j in range(1, ny - 1):
            if not interior[i, j]:
                continue
            c = u[i, j]
            ux = (u[i + 1, j] - u[i - 1, j]) * inv2h
            uy = (u[i, j + 1] - u[i, j - 1]) * inv2h
            uxx = (u[i + 1, j] - 2.0 * c + u[i - 1, j]) * invh2
            uyy = (u[i, j + 1] - 2.0 * c + u[i, j - 1]) * invh2
            uxy = (u[i + 1, j + 1] - u[i + 1, j - 1] - u[i - 1, j + 1] + u[i - 1, j - 1]) * inv4h2
            g2 = ux * ux + uy * uy
            m2 = g2 + e2
            quad = uxx * ux * ux + 2.0 * uxy * ux * uy + uyy * uy * uy
            lap = uxx + uyy + (p - 2.0) * quad / m2
            m = math.sqrt(m2)
            H = _power(m, pt) + a[i, j] * _power(m, qt)
            out[i, j] = c + dt * (H * lap + f[i, j])
            g = math.sqrt(g2)
            if g > gmax:
                gmax = g
    return gmax


@njit(cache=True)
def euler_1d(u, out, interior, f, a, h, dt, eps, p, pt, qt):
    nx = u.shape[0]
    inv2h = 1.0 / (2.0 * h)
    invh2 = 1.0 / (h * h)
    e2 = eps * eps
    gmax = 0.0
    for i in range(1, nx - 1):
        if not interior[i]:
            continue
        c = u[i]
        ux = (u[i + 1] - u[i - 1]) * inv2h
        uxx = (u[i + 1] - 2.0 * c + u[i - 1]) * invh2
        g2 = ux * ux
        m2 = g2 + e2
        lap = uxx + (p - 2.0) * uxx * g2 / m2
        m = math.sqrt(m2)
        H = _power(m, pt) + a[i] * _power(m, qt)
        out[i] = c + dt * (H * lap + f[i])
        g = abs(ux)
        if g > gmax:
            gmax = g
    return gmax


def euler_step(u, out, interior, f, a, h, dt, eps, p, pt, qt):
    if u.ndim == 1:
        return euler_1d(u, out, interior, f, a, h, dt, eps, p, pt, qt)
    return euler_2d(u, out, interior, f, a, h, dt, eps, p, pt, qt)


OK, CAP_EXCEEDED, NON_FINITE, DIVERGED = 0, 1, 2, 3


@njit(cache=True)
def march_2d(u, tmp, interior, bi, bj, bvals, f, a, h, dt, eps, p, pt, qt, cap, div_cap):
    """Run ``bvals.shape[0]`` Euler steps in place on ``u``.

    Returns ``(steps_done, max_grad, status, last_grad)``. A step whose input
    gradient exceeds ``cap`` is not applied.
    """
    gmax = 0.0
    g = 0.0
    nb = bi.shape[0]
    for s in range(bvals.shape[0]):
        tmp[:, :] = u
        g = euler_2d(u, tmp, interior, f, a, h, dt, eps, p, pt, qt)
        if g > cap:
            return s, gmax, CAP_EXCEEDED, g
        if g > gmax:
            gmax = g
        for k in range(nb):
            tmp[bi[k], bj[k]] = bvals[s, k]
        peak = 0.0
        for i in range(u.shape[0]):
            for j in range(u.shape[1]):
                v = tmp[i, j]
                if not math.isfinite(v):
                    u[:, :] = tmp
                    return s + 1, gmax, NON_FINITE, g
                if interior[i, j] and abs(v) > peak:
                    peak = abs(v)
        u[:, :] = tmp
        if peak > div_cap:
            return s + 1, gmax, DIVERGED, g
    return bvals.shape[0], gmax, OK, g


@njit(cache=True)
def march_1d(u, tmp, interior, bi, bj, bvals, f, a, h, dt, eps, p, pt, qt, cap, div_cap):
    gmax = 0.0
    g = 0.0
    nb = bi.shape[0]
    for s in range(bvals.shape[0]):
        tmp[:] = u
        g = euler_1d(u, tmp, interior, f, a, h, dt, eps, p, pt, qt)
        if g > cap:
            return s, gmax, CAP_EXCEEDED, g
        if g > gmax:
            gmax = g
        for k in range(nb):
            tmp[bi[k]] = bvals[s, k]
        peak = 0.0
        for i in range(u.shape[0]):
            v = tmp[i]
            if not math.isfinite(v):
                u[:] = tmp
                return s + 1, gmax, NON_FINITE, g
            if interior[i] and abs(v) > peak:
                peak = abs(v)
        u[:] = tmp
        if peak > div_cap:
            return s + 1, gmax, DIVERGED, g
    return bvals.shape[0], gmax, OK, g


def march(u, tmp, interior, bi, bj, bvals, f, a, h, dt, eps, p, pt, qt, cap, div_cap):
    fn = march_1d if u.ndim == 1 else march_2d
    return fn(u, tmp, interior, bi, bj, bvals, f, a, h, dt, eps, p, pt, qt, cap, div_cap)
