# Compiled Dormand-Prince 5(4) kernels for the rotated quartic field.
#
# The state carries a third component w with w' = div f, so that crossing a
# section also yields the integral of the divergence along the arc.
# Parameters are packed as [alpha, beta, delta, lam, mu, gamma].
import math

import numpy as np
from numba import njit

# status codes shared with dynamics.py
OK = 0
TIME_LIMIT = 1
BLOW_UP = 2
EQUILIBRIUM = 3
UNDERFLOW = 4
MAX_STEPS = 5

C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = (
    71 / 57600,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)
# Hairer's dense output coefficients for DOPRI5
D1, D3, D4, D5, D6, D7 = (
    -12715105075 / 11282082432,
    87487479700 / 32700410799,
    -10690763975 / 1880347072,
    701980252875 / 199316789632,
    -1453857185 / 822651844,
    69997945 / 29380423,
)


@njit(cache=True)
def rhs(p, x, y):
    alpha, beta, delta, lam, mu, gamma = p[0], p[1], p[2], p[3], p[4], p[5]
    a = (alpha * x + beta) * x + 1.0
    ap = 2.0 * alpha * x + beta
    one_m = 1.0 - lam * x
    pred = delta + mu * y
    P = x * (one_m * a - y)
    Q = -y * (pred * a - x)
    px = one_m * a - y + x * (one_m * ap - lam * a)
    py = -x
    qx = -y * (pred * ap - 1.0)
    qy = x - pred * a - mu * y * a
    fx = P - gamma * Q
    fy = Q + gamma * P
    div = px + qy + gamma * (py - qx)
    return fx, fy, div


@njit(cache=True)
def _stage(p, tdir, x, y):
    fx, fy, dv = rhs(p, x, y)
    return tdir * fx, tdir * fy, tdir * dv


@njit(cache=True)
def _step(p, tdir, x, y, w, kx1, ky1, kw1, h):
    """One DOPRI5 step. Returns new state, error norm inputs and all stages."""
    kx2, ky2, kw2 = _stage(p, tdir, x + h * A21 * kx1, y + h * A21 * ky1)
    kx3, ky3, kw3 = _stage(p, tdir, x + h * (A31 * kx1 + A32 * kx2), y + h * (A31 * ky1 + A32 * ky2))
    kx4, ky4, kw4 = _stage(
        p, tdir,
        x + h * (A41 * kx1 + A42 * kx2 + A43 * kx3),
        y + h * (A41 * ky1 + A42 * ky2 + A43 * ky3),
    )
    kx5, ky5, kw5 = _stage(
        p, tdir,
        x + h * (A51 * kx1 + A52 * kx2 + A53 * kx3 + A54 * kx4),
        y + h * (A51 * ky1 + A52 * ky2 + A53 * ky3 + A54 * ky4),
    )
    kx6, ky6, kw6 = _stage(
        p, tdir,
        x + h * (A61 * kx1 + A62 * kx2 + A63 * kx3 + A64 * kx4 + A65 * kx5),
        y + h * (A61 * ky1 + A62 * ky2 + A63 * ky3 + A64 * ky4 + A65 * ky5),
    )
    xn = x + h * (B1 * kx1 + B3 * kx3 + B4 * kx4 + B5 * kx5 + B6 * kx6)
    yn = y + h * (B1 * ky1 + B3 * ky3 + B4 * ky4 + B5 * ky5 + B6 * ky6)
    wn = w + h * (B1 * kw1 + B3 * kw3 + B4 * kw4 + B5 * kw5 + B6 * kw6)
    kx7, ky7, kw7 = _stage(p, tdir, xn, yn)
    ex = h * (E1 * kx1 + E3 * kx3 + E4 * kx4 + E5 * kx5 + E6 * kx6 + E7 * kx7)
    ey = h * (E1 * ky1 + E3 * ky3 + E4 * ky4 + E5 * ky5 + E6 * ky6 + E7 * ky7)
    ks = np.empty((3, 7))
    ks[0, 0], ks[0, 1], ks[0, 2], ks[0, 3], ks[0, 4], ks[0, 5], ks[0, 6] = kx1, kx2, kx3, kx4, kx5, kx6, kx7
    ks[1, 0], ks[1, 1], ks[1, 2], ks[1, 3], ks[1, 4], ks[1, 5], ks[1, 6] = ky1, ky2, ky3, ky4, ky5, ky6, ky7
    ks[2, 0], ks[2, 1], ks[2, 2], ks[2, 3], ks[2, 4], ks[2, 5], ks[2, 6] = kw1, kw2, kw3, kw4, kw5, kw6, kw7
    return xn, yn, wn, ex, ey, ks


@njit(cache=True)
def _dense(y0, y1, k, h, th):
    """Hairer's 4th order continuous extension for one component."""
    dy = y1 - y0
    bspl = h * k[0] - dy
    r3 = dy - h * k[6] - bspl
    r4 = h * (D1 * k[0] + D3 * k[2] + D4 * k[3] + D5 * k[4] + D6 * k[5] + D7 * k[6])
    th1 = 1.0 - th
    return y0 + th * (dy + th1 * (bspl + th * (r3 + th1 * r4)))


@njit(cache=True)
def _initial_h(p, tdir, x, y, kx, ky, rtol, atol):
    sx = atol + rtol * abs(x)
    sy = atol + rtol * abs(y)
    d0 = math.sqrt(0.5 * ((x / sx) ** 2 + (y / sy) ** 2))
    d1 = math.sqrt(0.5 * ((kx / sx) ** 2 + (ky / sy) ** 2))
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    h0 = min(h0, 0.1)
    return max(h0, 1e-10)


@njit(cache=True)
def integrate_path(p, x0, y0, t_end, rtol, atol, h_max, blowup, eq_tol, max_steps):
    """Integrate from t=0 to t_end (either sign), recording accepted steps.

    Returns (status, n, t, x, y, w) with arrays of length max_steps+1; only
    the first n entries are valid.
    """
    tdir = 1.0 if t_end >= 0 else -1.0
    T = abs(t_end)
    ts = np.empty(max_steps + 1)
    xs = np.empty(max_steps + 1)
    ys = np.empty(max_steps + 1)
    ws = np.empty(max_steps + 1)
    x, y, w, t = x0, y0, 0.0, 0.0
    ts[0], xs[0], ys[0], ws[0] = 0.0, x, y, 0.0
    n = 1
    kx, ky, kw = _stage(p, tdir, x, y)
    if math.hypot(kx, ky) < eq_tol:
        return EQUILIBRIUM, n, ts, xs, ys, ws
    h = min(_initial_h(p, tdir, x, y, kx, ky, rtol, atol), h_max)
    status = TIME_LIMIT
    while True:
        if t >= T:
            status = TIME_LIMIT
            break
        if n > max_steps:
            status = MAX_STEPS
            break
        h = min(h, T - t, h_max)
        xn, yn, wn, ex, ey, ks = _step(p, tdir, x, y, w, kx, ky, kw, h)
        sx = atol + rtol * max(abs(x), abs(xn))
        sy = atol + rtol * max(abs(y), abs(yn))
        err = math.sqrt(0.5 * ((ex / sx) ** 2 + (ey / sy) ** 2))
        if not math.isfinite(err):
            err = 1e10
        if err <= 1.0:
            t += h
            x, y, w = xn, yn, wn
            kx, ky, kw = ks[0, 6], ks[1, 6], ks[2, 6]
            ts[n], xs[n], ys[n], ws[n] = tdir * t, x, y, w
            n += 1
            if math.hypot(x, y) > blowup:
                status = BLOW_UP
                break
            if math.hypot(kx, ky) < eq_tol:
                status = EQUILIBRIUM
                break
            fac = 0.9 * err ** -0.2 if err > 0 else 5.0
            h *= min(5.0, max(0.2, fac))
        else:
            h *= max(0.2, 0.9 * err ** -0.2)
            if h < 1e-14:
                status = UNDERFLOW
                break
    return status, n, ts, xs, ys, ws


@njit(cache=True)
def _locate(x, y, w, xn, yn, wn, ks, h, ax, ay, nx, ny, g0, g1, tol):
    """Illinois root search for the signed section distance on one step."""
    lo, hi = 0.0, 1.0
    glo, ghi = g0, g1
    th = 0.0
    side = 0
    for _ in range(200):
        th = (lo * ghi - hi * glo) / (ghi - glo)
        xt = _dense(x, xn, ks[0], h, th)
        yt = _dense(y, yn, ks[1], h, th)
        g = nx * (xt - ax) + ny * (yt - ay)
        if abs(g) <= tol or hi - lo < 1e-15:
            break
        if (g > 0) == (ghi > 0):
            hi, ghi = th, g
            if side == 1:
                glo *= 0.5
            side = 1
        else:
            lo, glo = th, g
            if side == -1:
                ghi *= 0.5
            side = -1
    xt = _dense(x, xn, ks[0], h, th)
    yt = _dense(y, yn, ks[1], h, th)
    wt = _dense(w, wn, ks[2], h, th)
    return th, xt, yt, wt


@njit(cache=True)
def section_crossing(p, x0, y0, t_max, ax, ay, dx, dy, smin, smax, orient,
                     rtol, atol, h_max, blowup, eq_tol, loc_tol, max_steps):
    """First crossing of the segment anchor + s*dir, s in [smin, smax].

    The signed distance is g = n.(pt - anchor) with n = (-dy, dx). ``orient``
    selects crossings with g going from negative to positive (+1), positive to
    negative (-1) or either (0). Integration runs backward when t_max < 0.

    Returns (status, s, t, x, y, w).
    """
    tdir = 1.0 if t_max >= 0 else -1.0
    T = abs(t_max)
    nx, ny = -dy, dx
    x, y, w, t = x0, y0, 0.0, 0.0
    kx, ky, kw = _stage(p, tdir, x, y)
    if math.hypot(kx, ky) < eq_tol:
        return EQUILIBRIUM, np.nan, 0.0, x, y, 0.0
    h = min(_initial_h(p, tdir, x, y, kx, ky, rtol, atol), h_max)
    g = nx * (x - ax) + ny * (y - ay)
    if abs(g) < 1e-13 * (1.0 + abs(x) + abs(y)):
        g = 0.0  # a start on the section is not a crossing
    steps = 0
    while t < T:
        steps += 1
        if steps > max_steps:
            return MAX_STEPS, np.nan, tdir * t, x, y, w
        h = min(h, T - t, h_max)
        xn, yn, wn, ex, ey, ks = _step(p, tdir, x, y, w, kx, ky, kw, h)
        sx = atol + rtol * max(abs(x), abs(xn))
        sy = atol + rtol * max(abs(y), abs(yn))
        err = math.sqrt(0.5 * ((ex / sx) ** 2 + (ey / sy) ** 2))
        if not math.isfinite(err):
            err = 1e10
        if err > 1.0:
            h *= max(0.2, 0.9 * err ** -0.2)
            if h < 1e-14:
                return UNDERFLOW, np.nan, tdir * t, x, y, w
            continue
        gn = nx * (xn - ax) + ny * (yn - ay)
        hit = False
        if orient >= 0 and g < 0.0 and gn >= 0.0:
            hit = True
        if orient <= 0 and g > 0.0 and gn <= 0.0:
            hit = True
        if hit:
            th, xt, yt, wt = _locate(x, y, w, xn, yn, wn, ks, h, ax, ay, nx, ny, g, gn, loc_tol)
            s = dx * (xt - ax) + dy * (yt - ay)
            if smin <= s <= smax:
                return OK, s, tdir * (t + th * h), xt, yt, wt
        t += h
        x, y, w, g = xn, yn, wn, gn
        kx, ky, kw = ks[0, 6], ks[1, 6], ks[2, 6]
        if math.hypot(x, y) > blowup:
            return BLOW_UP, np.nan, tdir * t, x, y, w
        if math.hypot(kx, ky) < eq_tol:
            return EQUILIBRIUM, np.nan, tdir * t, x, y, w
        fac = 0.9 * err ** -0.2 if err > 0 else 5.0
        h *= min(5.0, max(0.2, fac))
    return TIME_LIMIT, np.nan, tdir * t, x, y, w


@njit(cache=True)
def return_map_grid(p, ss, t_max, ax, ay, dx, dy, orient, rtol, atol, h_max, blowup, eq_tol, loc_tol, max_steps):
    """Return values for section parameters ``ss`` (nan when no return).

    ``orient=0`` takes the crossing sign from the field at each start point.
    """
    out = np.empty(ss.shape[0])
    for i in range(ss.shape[0]):
        s = ss[i]
        o = orient
        if o == 0:
            fx, fy, _ = rhs(p, ax + s * dx, ay + s * dy)
            o = 1 if (-dy * fx + dx * fy) * (1.0 if t_max >= 0 else -1.0) > 0 else -1
        st, s1, _, _, _, _ = section_crossing(
            p, ax + s * dx, ay + s * dy, t_max, ax, ay, dx, dy, 0.0, np.inf, o,
            rtol, atol, h_max, blowup, eq_tol, loc_tol, max_steps,
        )
        out[i] = s1 if st == OK else np.nan
    return out
