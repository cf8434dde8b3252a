"""Orbits, saddle separatrices, Poincare return maps and limit cycles.

Integration uses the compiled Dormand-Prince 5(4) pair in ``_kernels`` with
dense output for section events. Return maps are taken on rays
``anchor + s * direction`` (``s >= 0``), usually from a focus.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from . import _kernels as K
from .equilibria import Equilibrium, contour_index
from .model import ModelParams, PhasePoint, eval_jacobian

__all__ = [
    "IntegratorOptions",
    "Orbit",
    "Section",
    "LimitCycle",
    "IntegrationError",
    "NoReturnError",
    "NotASaddleError",
    "InconsistentStabilityError",
    "integrate",
    "separatrices",
    "return_map",
    "return_map_grid",
    "return_data",
    "displacement_scan",
    "find_cycles",
    "refine_cycle",
    "cycle_stability",
    "stability_label",
    "encloses",
    "loop_index",
    "saddle_eigenvectors",
]

STABILITY_TOL = 1e-3
SEMI_STABLE_TOL = 1e-6
FIXED_POINT_TOL = 1e-8

TERMINAL = {
    K.TIME_LIMIT: "time-limit",
    K.BLOW_UP: "blow-up",
    K.EQUILIBRIUM: "equilibrium-capture",
}


class IntegrationError(RuntimeError):
    """Step-size underflow or an exhausted step budget."""


class NoReturnError(RuntimeError):
    pass


class NotASaddleError(ValueError):
    pass


class InconsistentStabilityError(RuntimeError):
    pass


@dataclass(frozen=True)
class IntegratorOptions:
    rtol: float = 1e-10
    atol: float = 1e-12
    h_max: float = math.inf
    blowup: float = 1e6
    eq_tol: float = 1e-13
    loc_tol: float = 1e-12
    max_steps: int = 200_000
    t_limit: float = 1e4

    def __post_init__(self):
        for name in ("rtol", "atol"):
            v = getattr(self, name)
            if not 1e-14 <= v <= 1e-2:
                raise ValueError(f"{name}={v} outside [1e-14, 1e-2]")


DEFAULT_OPTIONS = IntegratorOptions()


def _packed(p: ModelParams, rotated: bool) -> np.ndarray:
    arr = p.as_array()
    if not rotated:
        arr[5] = 0.0
    return arr


@dataclass(frozen=True)
class Orbit:
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    terminal_reason: str
    div_integral: float = 0.0  # integral of the divergence along the orbit

    @property
    def states(self) -> list[tuple[float, PhasePoint]]:
        return [(float(t), PhasePoint(float(x), float(y))) for t, x, y in zip(self.t, self.x, self.y)]

    @property
    def end(self) -> PhasePoint:
        return PhasePoint(float(self.x[-1]), float(self.y[-1]))

    def points(self) -> np.ndarray:
        return np.column_stack([self.x, self.y])


def integrate(p: ModelParams, start, t_span: float, rotated: bool = True,
              options: IntegratorOptions = DEFAULT_OPTIONS) -> Orbit:
    """Adaptive orbit from ``start`` over ``t_span`` (negative runs backward)."""
    o = options
    st, n, t, x, y, w = K.integrate_path(
        _packed(p, rotated), float(start[0]), float(start[1]), float(t_span),
        o.rtol, o.atol, o.h_max, o.blowup, o.eq_tol, o.max_steps,
    )
    if st == K.UNDERFLOW:
        raise IntegrationError(f"step-size underflow at t={t[n - 1]:.6g}, state=({x[n - 1]:.6g}, {y[n - 1]:.6g})")
    if st == K.MAX_STEPS:
        raise IntegrationError(f"step budget {o.max_steps} exhausted at t={t[n - 1]:.6g}")
    return Orbit(t[:n].copy(), x[:n].copy(), y[:n].copy(), TERMINAL[st], float(w[n - 1]))


def separatrices(p: ModelParams, saddle: Equilibrium, rotated: bool = True, t_span: float = 200.0,
                 options: IntegratorOptions = DEFAULT_OPTIONS) -> dict[str, Orbit]:
    """The four separatrix branches of a saddle.

    Keys are ``unstable+``, ``unstable-``, ``stable+``, ``stable-``; the
    sign is that of the eigenvector, normalised to have a nonnegative
    y-component (x-component for horizontal vectors). Stable branches are
    integrated backward, so their time stamps are negative.
    """
    if saddle.classification != "saddle":
        raise NotASaddleError(f"{saddle.location} is a {saddle.classification}")
    loc = np.asarray(saddle.location, float)
    eps = 1e-6 * (1.0 + np.hypot(*loc))
    out = {}
    for name, vec in zip(("unstable", "stable"), saddle_eigenvectors(p, saddle.location, rotated)):
        for sign, label in ((1.0, "+"), (-1.0, "-")):
            start = loc + sign * eps * vec
            span = t_span if name == "unstable" else -t_span
            out[name + label] = integrate(p, start, span, rotated, options)
    return out


def saddle_eigenvectors(p: ModelParams, pt, rotated: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Unit (unstable, stable) eigenvectors at a saddle, sign-normalised."""
    J = eval_jacobian(p, pt, rotated).as_array()
    vals, vecs = np.linalg.eig(J)
    if np.iscomplexobj(vals) and np.any(np.abs(vals.imag) > 0):
        raise NotASaddleError("complex eigenvalues")
    vals = vals.real
    vecs = vecs.real
    if not vals.max() > 0 > vals.min():
        raise NotASaddleError(f"eigenvalues {vals}")
    out = []
    for i in (int(np.argmax(vals)), int(np.argmin(vals))):
        v = vecs[:, i] / np.hypot(*vecs[:, i])
        key = v[1] if abs(v[1]) > 1e-12 else v[0]
        out.append(v if key >= 0 else -v)
    return out[0], out[1]


@dataclass(frozen=True)
class Section:
    """Ray ``anchor + s * direction`` for ``0 <= s``; scans use ``s <= length``.

    ``orientation`` is the crossing sign of the field relative to the
    direction (+1 counterclockwise, -1 clockwise); 0 means "take it from the
    field at each start point".
    """

    anchor: PhasePoint
    direction: tuple[float, float] = (1.0, 0.0)
    length: float = 1.0
    orientation: int = 0

    def __post_init__(self):
        d = np.asarray(self.direction, float)
        nrm = float(np.hypot(*d))
        if nrm == 0 or not self.length > 0:
            raise ValueError("section needs a nonzero direction and positive length")
        object.__setattr__(self, "direction", (float(d[0] / nrm), float(d[1] / nrm)))
        object.__setattr__(self, "anchor", PhasePoint(float(self.anchor[0]), float(self.anchor[1])))
        object.__setattr__(self, "length", float(self.length))

    def point(self, s: float) -> np.ndarray:
        return np.array(self.anchor) + s * np.array(self.direction)


@dataclass(frozen=True)
class LimitCycle:
    section: Section
    s_star: float
    period: float
    loop: np.ndarray = field(repr=False)
    derivative: float
    stability: str
    multiplier: float = math.nan  # exp of the divergence integral over one period
    residual: float = math.nan  # |Pi(s*) - s*|
    params: ModelParams | None = field(default=None, repr=False)

    @property
    def point(self) -> np.ndarray:
        return self.section.point(self.s_star)

    @property
    def amplitude(self) -> float:
        return self.s_star

    def encloses(self, pt) -> bool:
        return encloses(self.loop, pt)


def stability_label(derivative: float, tol: float = STABILITY_TOL) -> str:
    if derivative < 1.0 - tol:
        return "stable"
    if derivative > 1.0 + tol:
        return "unstable"
    return "semi-stable"


def encloses(loop: np.ndarray, pt) -> bool:
    """Even-odd point-in-polygon test."""
    x, y = float(pt[0]), float(pt[1])
    xs, ys = loop[:, 0], loop[:, 1]
    x2, y2 = np.roll(xs, -1), np.roll(ys, -1)
    cond = (ys > y) != (y2 > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = xs + (y - ys) * (x2 - xs) / (y2 - ys)
    return bool(np.count_nonzero(cond & (x < xint)) % 2)


def _orient_arg(sec: Section) -> int:
    return int(sec.orientation)


def return_data(p: ModelParams, sec: Section, s: float, rotated: bool = True,
                options: IntegratorOptions = DEFAULT_OPTIONS, t_limit: float | None = None):
    """``(s', T, w)``: next same-orientation crossing, its time and the divergence integral."""
    o = options
    t_max = o.t_limit if t_limit is None else t_limit
    arr = _packed(p, rotated)
    ax, ay = sec.anchor
    dx, dy = sec.direction
    x0, y0 = ax + s * dx, ay + s * dy
    orient = _orient_arg(sec)
    if orient == 0:
        fx, fy, _ = K.rhs(arr, x0, y0)
        cross = -dy * fx + dx * fy
        if cross == 0:
            raise NoReturnError(f"field tangent to the section at s={s}")
        orient = 1 if cross * math.copysign(1.0, t_max) > 0 else -1
    st, s1, t, _, _, w = K.section_crossing(
        arr, x0, y0, t_max, ax, ay, dx, dy, 0.0, math.inf, orient,
        o.rtol, o.atol, o.h_max, o.blowup, o.eq_tol, o.loc_tol, o.max_steps,
    )
    if st != K.OK:
        reason = {K.UNDERFLOW: "step-size underflow", K.MAX_STEPS: "step budget exhausted"}.get(st, TERMINAL.get(st, str(st)))
        raise NoReturnError(f"no return from s={s:.10g}: {reason}")
    return float(s1), float(t), float(w)


def return_map(p: ModelParams, sec: Section, s: float, rotated: bool = True,
               options: IntegratorOptions = DEFAULT_OPTIONS) -> float:
    """Poincare map of the section: arc parameter of the next same-orientation crossing."""
    return return_data(p, sec, s, rotated, options)[0]


def return_map_grid(p: ModelParams, sec: Section, ss, rotated: bool = True,
                    options: IntegratorOptions = DEFAULT_OPTIONS) -> np.ndarray:
    """Vectorised return map; nan where there is no return."""
    o = options
    ax, ay = sec.anchor
    dx, dy = sec.direction
    return K.return_map_grid(
        _packed(p, rotated), np.asarray(ss, float), o.t_limit, ax, ay, dx, dy, _orient_arg(sec),
        o.rtol, o.atol, o.h_max, o.blowup, o.eq_tol, o.loc_tol, o.max_steps,
    )


def displacement_scan(p: ModelParams, sec: Section, n: int = 200, rotated: bool = True,
                      options: IntegratorOptions = DEFAULT_OPTIONS, s_min: float | None = None):
    """``(s, d(s))`` on a geometric grid from ``1e-4 * length`` to ``length``."""
    lo = 1e-4 * sec.length if s_min is None else s_min
    ss = np.geomspace(lo, sec.length, n)
    return ss, return_map_grid(p, sec, ss, rotated, options) - ss


def _loop(p: ModelParams, sec: Section, s: float, period: float, rotated: bool, options: IntegratorOptions) -> np.ndarray:
    orb = integrate(p, sec.point(s), period, rotated, options)
    pts = orb.points()
    # densify long steps so the polygon follows the orbit
    seg = np.hypot(*np.diff(pts, axis=0).T)
    h = np.median(seg) if len(seg) else 0.0
    if h > 0 and seg.max() > 4 * h:
        dense = integrate(p, sec.point(s), period, rotated, replace(options, h_max=period / 400))
        pts = dense.points()
    return pts


def _derivative(f, s: float, rel: float) -> float:
    h = rel * max(abs(s), 1e-12)
    return (f(s + h) - f(s - h)) / (2 * h)


def refine_cycle(p: ModelParams, sec: Section, s_star: float, rotated: bool = True,
                 options: IntegratorOptions = DEFAULT_OPTIONS, rel_step: float = 1e-5,
                 semi_stable: bool = False) -> LimitCycle:
    """Assemble a :class:`LimitCycle` at a located fixed point."""
    s1, T, w = return_data(p, sec, s_star, rotated, options)
    pm = lambda s: return_map(p, sec, s, rotated, options)  # noqa: E731
    deriv = 1.0 if semi_stable else _derivative(pm, s_star, rel_step)
    mult = math.exp(w)
    label = "semi-stable" if semi_stable else stability_label(deriv)
    loop = _loop(p, sec, s_star, T, rotated, options)
    return LimitCycle(sec, float(s_star), T, loop, float(deriv), label, mult, abs(s1 - s_star), p)


def _root(d, a: float, b: float, da: float, db: float, xtol: float) -> float:
    return brentq(d, a, b, xtol=xtol, rtol=1e-15, maxiter=200)


def find_cycles(p: ModelParams, sec: Section, rotated: bool = True,
                options: IntegratorOptions = DEFAULT_OPTIONS, n: int = 200,
                s_min: float | None = None) -> list[LimitCycle]:
    """Limit cycles crossing the section, sorted by ``s_star``.

    Scans ``d(s) = Pi(s) - s`` on a geometric grid, refines each sign change
    with Brent's method (bisection with secant/inverse-quadratic steps) to
    ``|d| <= 1e-8 * length``, and examines local extrema of ``|d|`` below
    ``1e-6 * length`` without a sign change as semi-stable candidates.
    Grid points without a return are skipped.
    """
    ss, dd = displacement_scan(p, sec, n, rotated, options, s_min)
    L = sec.length
    tol = FIXED_POINT_TOL * L

    def d(s):
        return return_map(p, sec, s, rotated, options) - s

    def d_safe(s):
        try:
            return d(s)
        except NoReturnError:
            return math.nan

    roots: list[tuple[float, bool]] = []
    ok = np.isfinite(dd)
    for i in range(len(ss) - 1):
        if not (ok[i] and ok[i + 1]):
            continue
        if dd[i] == 0.0:
            roots.append((ss[i], False))
        elif dd[i] * dd[i + 1] < 0:
            try:
                roots.append((_root(d, ss[i], ss[i + 1], dd[i], dd[i + 1], 1e-3 * tol), False))
            except (NoReturnError, ValueError):
                continue
    # tangencies: interior local minima of |d| with no sign change nearby
    for i in range(1, len(ss) - 1):
        if not (ok[i - 1] and ok[i] and ok[i + 1]):
            continue
        if not (abs(dd[i]) <= abs(dd[i - 1]) and abs(dd[i]) <= abs(dd[i + 1])):
            continue
        if dd[i - 1] * dd[i] <= 0 or dd[i] * dd[i + 1] <= 0:
            continue
        if abs(dd[i]) > SEMI_STABLE_TOL * L:
            continue
        sign = math.copysign(1.0, dd[i])
        res = minimize_scalar(lambda s: sign * d_safe(s) if math.isfinite(d_safe(s)) else math.inf,
                              bounds=(ss[i - 1], ss[i + 1]), method="bounded",
                              options={"xatol": 1e-12 * L, "maxiter": 200})
        s_ext = float(res.x)
        d_ext = d_safe(s_ext)
        if not math.isfinite(d_ext):
            continue
        if d_ext * dd[i] < 0:
            # the extremum crosses zero: two nearby simple cycles
            for a, b in ((ss[i - 1], s_ext), (s_ext, ss[i + 1])):
                try:
                    roots.append((_root(d, a, b, 0, 0, 1e-3 * tol), False))
                except (NoReturnError, ValueError):
                    pass
        elif abs(d_ext) <= tol:
            roots.append((s_ext, True))
    out = []
    for s, semi in sorted(roots):
        if out and abs(s - out[-1].s_star) <= 1e-9 * L:
            continue
        try:
            out.append(refine_cycle(p, sec, s, rotated, options, semi_stable=semi))
        except NoReturnError:
            continue
    return out


def cycle_stability(p: ModelParams, c: LimitCycle, rotated: bool = True,
                    options: IntegratorOptions = DEFAULT_OPTIONS, rel_step: float = 1e-5) -> LimitCycle:
    """Richardson-refined return-map derivative, cross-checked against the
    divergence integral along the loop.

    Raises :class:`InconsistentStabilityError` if the two estimates give
    different stability labels.
    """
    pm = lambda s: return_map(p, c.section, s, rotated, options)  # noqa: E731
    d1 = _derivative(pm, c.s_star, rel_step)
    d2 = _derivative(pm, c.s_star, rel_step / 2)
    deriv = (4 * d2 - d1) / 3
    _, T, w = return_data(p, c.section, c.s_star, rotated, options)
    mult = math.exp(w)
    lab, lab_div = stability_label(deriv), stability_label(mult)
    if lab != lab_div:
        raise InconsistentStabilityError(
            f"return-map derivative {deriv:.8g} ({lab}) vs divergence multiplier {mult:.8g} ({lab_div})"
        )
    return replace(c, derivative=float(deriv), multiplier=mult, stability=lab, period=T)


def loop_index(c: LimitCycle, p: ModelParams | None = None, rotated: bool = True) -> int:
    """Winding number of the field along the loop (periodic orbits give +1)."""
    pts = c.loop[:-1]
    # positive orientation
    area = 0.5 * np.sum(pts[:, 0] * np.roll(pts[:, 1], -1) - np.roll(pts[:, 0], -1) * pts[:, 1])
    if area < 0:
        pts = pts[::-1]
    return contour_index(p if p is not None else c.params, pts, rotated=rotated)
