"""Hot numeric kernels.

Each FEM kernel exists twice: an explicit per-triangle loop that numba
compiles, and a vectorised numpy version. ``USE_NUMBA`` picks which one the
public names bind to. The radial Runge-Kutta stepper is a scalar loop with
no useful vectorised form, so it is the same code on both paths, compiled
or interpreted.
"""
import math

import numpy as np

from ._accel import USE_NUMBA, njit

# Quadrature rules on the reference triangle: barycentric points, weights
# summing to one.
QUAD3_POINTS = np.array(
    [[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]]
)
QUAD3_WEIGHTS = np.full(3, 1 / 3)

_a = (6.0 - math.sqrt(15.0)) / 21.0
_b = (6.0 + math.sqrt(15.0)) / 21.0
QUAD7_POINTS = np.array(
    [
        [1 / 3, 1 / 3, 1 / 3],
        [_a, _a, 1 - 2 * _a],
        [_a, 1 - 2 * _a, _a],
        [1 - 2 * _a, _a, _a],
        [_b, _b, 1 - 2 * _b],
        [_b, 1 - 2 * _b, _b],
        [1 - 2 * _b, _b, _b],
    ]
)
QUAD7_WEIGHTS = np.array(
    [9 / 40]
    + [(155.0 - math.sqrt(15.0)) / 1200.0] * 3
    + [(155.0 + math.sqrt(15.0)) / 1200.0] * 3
)


def quadrature(p: float):
    """Mass-term rule: 3-point (degree 2), 7-point (degree 5) when p > 4."""
    if p > 4:
        return QUAD7_POINTS, QUAD7_WEIGHTS
    return QUAD3_POINTS, QUAD3_WEIGHTS


def shape_gradients(vertices, triangles):
    """Constant P1 basis gradients per triangle, shape (n_tri, 3, 2), and areas."""
    p = vertices[triangles]
    x, y = p[..., 0], p[..., 1]
    area = 0.5 * ((x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0]))
    g = np.empty(triangles.shape + (2,))
    g[:, 0, 0] = y[:, 1] - y[:, 2]
    g[:, 0, 1] = x[:, 2] - x[:, 1]
    g[:, 1, 0] = y[:, 2] - y[:, 0]
    g[:, 1, 1] = x[:, 0] - x[:, 2]
    g[:, 2, 0] = y[:, 0] - y[:, 1]
    g[:, 2, 1] = x[:, 1] - x[:, 0]
    g /= (2.0 * area)[:, None, None]
    return g, area


def _spow(x, e):
    # sign(x) * |x|**e, finite at x == 0 for any e > 0
    return np.sign(x) * np.abs(x) ** e


# ---------------------------------------------------------------------------
# numpy path


def _energy_grad_np(u, tri, grads, area, p):
    g = np.einsum("tk,tkd->td", u[tri], grads)
    n2 = np.einsum("td,td->t", g, g)
    energy = float(np.sum(area * n2 ** (0.5 * p)))
    coef = p * area * np.where(n2 > 0, n2, 1.0) ** (0.5 * p - 1.0)
    coef[n2 == 0] = 0.0
    loc = coef[:, None] * np.einsum("td,tkd->tk", g, grads)
    out = np.bincount(tri.ravel(), weights=loc.ravel(), minlength=u.shape[0])
    return energy, out


def _hessian_np(u, tri, grads, area, p, eps):
    g = np.einsum("tk,tkd->td", u[tri], grads)
    s = np.einsum("td,td->t", g, g) + eps * eps
    a = p * area * s ** (0.5 * p - 1.0)
    b = p * (p - 2.0) * area * s ** (0.5 * p - 2.0)
    gg = np.einsum("tad,tbd->tab", grads, grads)
    gp = np.einsum("td,tkd->tk", g, grads)
    return a[:, None, None] * gg + b[:, None, None] * gp[:, :, None] * gp[:, None, :]


def _lp_np(u, tri, area, qpts, qw, p):
    uq = u[tri] @ qpts.T
    return float(np.sum(area * (np.abs(uq) ** p @ qw)))


def _lp_load_np(u, tri, area, qpts, qw, p):
    uq = u[tri] @ qpts.T
    f = _spow(uq, p - 1.0) * qw * area[:, None]
    loc = f @ qpts
    return np.bincount(tri.ravel(), weights=loc.ravel(), minlength=u.shape[0])


# ---------------------------------------------------------------------------
# loop path (numba)


@njit
def _energy_grad_loop(u, tri, grads, area, p):
    out = np.zeros(u.shape[0])
    energy = 0.0
    for t in range(tri.shape[0]):
        gx = 0.0
        gy = 0.0
        for k in range(3):
            gx += u[tri[t, k]] * grads[t, k, 0]
            gy += u[tri[t, k]] * grads[t, k, 1]
        n2 = gx * gx + gy * gy
        energy += area[t] * n2 ** (0.5 * p)
        if n2 == 0.0:
            continue
        c = p * area[t] * n2 ** (0.5 * p - 1.0)
        for k in range(3):
            out[tri[t, k]] += c * (gx * grads[t, k, 0] + gy * grads[t, k, 1])
    return energy, out


@njit
def _hessian_loop(u, tri, grads, area, p, eps):
    m = tri.shape[0]
    out = np.empty((m, 3, 3))
    for t in range(m):
        gx = 0.0
        gy = 0.0
        for k in range(3):
            gx += u[tri[t, k]] * grads[t, k, 0]
            gy += u[tri[t, k]] * grads[t, k, 1]
        s = gx * gx + gy * gy + eps * eps
        a = p * area[t] * s ** (0.5 * p - 1.0)
        b = p * (p - 2.0) * area[t] * s ** (0.5 * p - 2.0)
        for i in range(3):
            pi = gx * grads[t, i, 0] + gy * grads[t, i, 1]
            for j in range(3):
                pj = gx * grads[t, j, 0] + gy * grads[t, j, 1]
                out[t, i, j] = a * (grads[t, i, 0] * grads[t, j, 0] + grads[t, i, 1] * grads[t, j, 1]) + b * pi * pj
    return out


@njit
def _lp_loop(u, tri, area, qpts, qw, p):
    total = 0.0
    for t in range(tri.shape[0]):
        acc = 0.0
        for q in range(qw.shape[0]):
            v = 0.0
            for k in range(3):
                v += qpts[q, k] * u[tri[t, k]]
            acc += qw[q] * abs(v) ** p
        total += area[t] * acc
    return total


@njit
def _lp_load_loop(u, tri, area, qpts, qw, p):
    out = np.zeros(u.shape[0])
    for t in range(tri.shape[0]):
        for q in range(qw.shape[0]):
            v = 0.0
            for k in range(3):
                v += qpts[q, k] * u[tri[t, k]]
            if v == 0.0:
                continue
            f = area[t] * qw[q] * abs(v) ** (p - 1.0)
            if v < 0.0:
                f = -f
            for k in range(3):
                out[tri[t, k]] += f * qpts[q, k]
    return out


if USE_NUMBA:
    energy_grad = _energy_grad_loop
    hessian_blocks = _hessian_loop
    lp_power = _lp_loop
    lp_load = _lp_load_loop
else:
    energy_grad = _energy_grad_np
    hessian_blocks = _hessian_np
    lp_power = _lp_np
    lp_load = _lp_load_np


# ---------------------------------------------------------------------------
# radial Cauchy problem, flux form: y = (u, w), w = r^(N-1)|u'|^(p-2)u'

# Dormand-Prince 5(4) tableau
_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71 / 57600,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)


@njit
def radial_rhs(r, u, w, p, n):
    q = 1.0 / (p - 1.0)
    rn = r ** (n - 1.0)
    du = abs(w / rn) ** q
    if w < 0.0:
        du = -du
    dw = -rn * abs(u) ** (p - 1.0)
    if u < 0.0:
        dw = -dw
    return du, dw


@njit
def _dp_step(r, u, w, h, p, n):
    k1u, k1w = radial_rhs(r, u, w, p, n)
    k2u, k2w = radial_rhs(r + _C2 * h, u + h * _A21 * k1u, w + h * _A21 * k1w, p, n)
    k3u, k3w = radial_rhs(
        r + _C3 * h, u + h * (_A31 * k1u + _A32 * k2u), w + h * (_A31 * k1w + _A32 * k2w), p, n
    )
    k4u, k4w = radial_rhs(
        r + _C4 * h,
        u + h * (_A41 * k1u + _A42 * k2u + _A43 * k3u),
        w + h * (_A41 * k1w + _A42 * k2w + _A43 * k3w),
        p,
        n,
    )
    k5u, k5w = radial_rhs(
        r + _C5 * h,
        u + h * (_A51 * k1u + _A52 * k2u + _A53 * k3u + _A54 * k4u),
        w + h * (_A51 * k1w + _A52 * k2w + _A53 * k3w + _A54 * k4w),
        p,
        n,
    )
    k6u, k6w = radial_rhs(
        r + h,
        u + h * (_A61 * k1u + _A62 * k2u + _A63 * k3u + _A64 * k4u + _A65 * k5u),
        w + h * (_A61 * k1w + _A62 * k2w + _A63 * k3w + _A64 * k4w + _A65 * k5w),
        p,
        n,
    )
    un = u + h * (_B1 * k1u + _B3 * k3u + _B4 * k4u + _B5 * k5u + _B6 * k6u)
    wn = w + h * (_B1 * k1w + _B3 * k3w + _B4 * k4w + _B5 * k5w + _B6 * k6w)
    k7u, k7w = radial_rhs(r + h, un, wn, p, n)
    eu = h * (_E1 * k1u + _E3 * k3u + _E4 * k4u + _E5 * k5u + _E6 * k6u + _E7 * k7u)
    ew = h * (_E1 * k1w + _E3 * k3w + _E4 * k4w + _E5 * k5w + _E6 * k6w + _E7 * k7w)
    return un, wn, eu, ew


@njit
def dp_integrate(p, n, r0, u0, w0, r_end, rtol, atol, h0, max_steps, record):
    """Adaptive Dormand-Prince integration from r0 to r_end.

    Returns ``(status, rs, us, ws, count)``; status 0 is success, 1 means the
    step size underflowed, 2 means ``max_steps`` was exhausted. When
    ``record`` is false only the endpoint is stored.
    """
    size = max_steps + 1 if record else 2
    rs = np.empty(size)
    us = np.empty(size)
    ws = np.empty(size)
    rs[0] = r0
    us[0] = u0
    ws[0] = w0
    count = 1
    r = r0
    u = u0
    w = w0
    h = min(h0, r_end - r0)
    steps = 0
    while r < r_end:
        if steps >= max_steps:
            return 2, rs, us, ws, count
        last = False
        if r + h >= r_end:
            h = r_end - r
            last = True
        un, wn, eu, ew = _dp_step(r, u, w, h, p, n)
        su = atol + rtol * max(abs(u), abs(un))
        sw = atol + rtol * max(abs(w), abs(wn))
        err = math.sqrt(0.5 * ((eu / su) ** 2 + (ew / sw) ** 2))
        if err <= 1.0:
            r = r_end if last else r + h
            u = un
            w = wn
            steps += 1
            if record:
                rs[count] = r
                us[count] = u
                ws[count] = w
                count += 1
            else:
                rs[1] = r
                us[1] = u
                ws[1] = w
                count = 2
            fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
            h = h * fac
        else:
            fac = 0.2 if not math.isfinite(err) else max(0.1, 0.9 * err ** -0.2)
            h = h * fac
            if h < 1e-15 * max(1.0, abs(r)):
                return 1, rs, us, ws, count
    return 0, rs, us, ws, count
