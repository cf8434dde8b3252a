"""Hopf points, continuation of cycles in a rotation parameter, folds of
cycles, separatrix loops and the staged scenario with its cycle-count
harness.
"""
from __future__ import annotations

import json
import math
import os
import warnings
from dataclasses import dataclass, field, replace
from typing import Any, Iterable

import numpy as np
from scipy.optimize import brentq

from . import _kernels as K
from .equilibria import Equilibrium, _make, _polish, first_quadrant_triple, full_census, verify_configuration
from .dynamics import (
    DEFAULT_OPTIONS,
    IntegratorOptions,
    LimitCycle,
    NoReturnError,
    Section,
    _packed,
    encloses,
    find_cycles,
    refine_cycle,
    return_map,
    return_map_grid,
    saddle_eigenvectors,
    stability_label,
)
from .model import ModelParams, eval_jacobian

__all__ = [
    "BifurcationEvent",
    "CycleBranch",
    "StepPolicy",
    "NoMergeError",
    "HarnessBreach",
    "hopf_detect",
    "hopf_closed_form",
    "hopf_criticality",
    "continue_cycle",
    "detect_fold",
    "split_function",
    "homoclinic_scan",
    "count_cycles",
    "cycle_count_harness",
    "standard_sections",
    "survey_cycles",
    "run_scenario",
]

PARAMETERS = ("alpha", "beta", "gamma")
SPLIT_HALF_WIDTH = 5.0


class NoMergeError(RuntimeError):
    pass


class HarnessBreach(AssertionError):
    """More cycles than the at-most-two bound allows at some sampled parameter set."""

    def __init__(self, message: str, params: dict):
        super().__init__(f"{message}: {json.dumps(params, sort_keys=True)}")
        self.params = params


@dataclass
class BifurcationEvent:
    kind: str  # hopf, fold-of-cycles, homoclinic-small-loop, homoclinic-big-loop, eight-loop, cycle-from-infinity-candidate
    parameter: str
    value: float
    subject: Any = None
    residual: float = math.nan
    diagnostics: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        subj = self.subject
        if isinstance(subj, Equilibrium):
            subj = {"equilibrium": [subj.location.x, subj.location.y], "classification": subj.classification}
        elif isinstance(subj, LimitCycle):
            subj = {"cycle_s_star": subj.s_star, "derivative": subj.derivative, "stability": subj.stability}
        return {
            "kind": self.kind,
            "parameter": self.parameter,
            "value": self.value,
            "residual": self.residual,
            "subject": subj,
            "diagnostics": _jsonable(self.diagnostics),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


@dataclass
class CycleBranch:
    parameter: str
    samples: list[tuple[float, LimitCycle]] = field(default_factory=list)
    termination: str = "parameter-bound"  # fold, homoclinic, parameter-bound, lost
    diagnostics: dict = field(default_factory=dict)

    @property
    def values(self) -> np.ndarray:
        return np.array([v for v, _ in self.samples])

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([c.s_star for _, c in self.samples])

    @property
    def last(self) -> tuple[float, LimitCycle]:
        return self.samples[-1]


@dataclass(frozen=True)
class StepPolicy:
    """Natural-parameter continuation settings.

    ``step`` is the signed initial step; the step is halved after a failure
    and grown by ``grow`` after ``grow_after`` consecutive successes, within
    ``[min_frac, max_frac] * |bound - start|``.
    """

    step: float
    bound: float
    min_frac: float = 1e-8
    max_frac: float = 1e-2
    grow: float = 1.5
    grow_after: int = 3
    max_samples: int = 2000
    period_cap: float = 1e3
    saddle_distance: float = 1e-4
    fold_tol: float = 0.05  # |derivative - 1| below which a lost branch is called a fold


# ---------------------------------------------------------------- Hopf


def hopf_closed_form(p: ModelParams, pt) -> float:
    """Rotation value making the trace of the rotated Jacobian vanish."""
    J = eval_jacobian(p, pt, rotated=False)
    return -J.trace / (J.pxy - J.qyx)


def _track(p: ModelParams, eq: Equilibrium, name: str, values: np.ndarray):
    """Equilibrium locations along a parameter path (re-polished for alpha/beta)."""
    locs = []
    x, y = eq.location
    lost = False
    for v in values:
        q = p.with_(**{name: float(v)})
        if name != "gamma" and not lost:
            x1, y1 = _polish(q, x, y)
            # a jump means the point merged with a neighbour and disappeared
            lost = not (math.isfinite(x1) and math.isfinite(y1)) or math.hypot(x1 - x, y1 - y) > 0.2 * (1 + math.hypot(x, y))
            x, y = x1, y1
        locs.append(None if lost else (x, y))
    return locs


def hopf_detect(p: ModelParams, eq: Equilibrium, parameter: str = "gamma", rng: tuple[float, float] = (-2.0, 2.0),
                n: int = 400, include_neutral: bool = False) -> list[BifurcationEvent]:
    """Zeros of the rotated-Jacobian trace with positive determinant.

    The trace is sampled on ``n`` points of ``rng``, sign changes are refined
    by Brent's method to 1e-12. For gamma the closed form is attached as a
    diagnostic. Trace zeros with nonpositive determinant are neutral saddles,
    returned only with ``include_neutral``.
    """
    if parameter not in PARAMETERS:
        raise ValueError(f"parameter must be one of {PARAMETERS}")
    a, b = rng
    vals = np.linspace(a, b, n)
    locs = _track(p, eq, parameter, vals)

    def trace_at(v, loc):
        q = p.with_(**{parameter: float(v)})
        return eval_jacobian(q, loc, rotated=True).trace

    tr = np.array([trace_at(v, loc) if loc is not None else math.nan for v, loc in zip(vals, locs)])
    out = []
    for i in range(n - 1):
        if not (tr[i] == 0 or tr[i] * tr[i + 1] < 0):
            continue
        start = locs[i]

        def f(v):
            q = p.with_(**{parameter: float(v)})
            loc = start if parameter == "gamma" else _polish(q, *start)
            return eval_jacobian(q, loc, rotated=True).trace

        try:
            v = vals[i] if tr[i] == 0 else brentq(f, vals[i], vals[i + 1], xtol=1e-13, rtol=1e-15, maxiter=200)
        except ValueError:
            continue
        q = p.with_(**{parameter: float(v)})
        loc = start if parameter == "gamma" else _polish(q, *start)
        J = eval_jacobian(q, loc, rotated=True)
        e = _make(q, *loc)
        diag = {"trace": J.trace, "determinant": J.determinant, "location": list(loc),
                "frequency": math.sqrt(J.determinant) if J.determinant > 0 else 0.0}
        if parameter == "gamma":
            g = hopf_closed_form(p, loc)
            diag["closed_form"] = g
            diag["closed_form_error"] = abs(g - v)
        if J.determinant > 0:
            out.append(BifurcationEvent("hopf", parameter, float(v), e, abs(J.trace), diag))
        elif include_neutral:
            out.append(BifurcationEvent("neutral-saddle", parameter, float(v), e, abs(J.trace), diag))
    return out


def hopf_criticality(p: ModelParams, pt, rel_radius: float = 1e-2,
                     options: IntegratorOptions = DEFAULT_OPTIONS) -> tuple[str, float]:
    """Sign of the cubic term of the displacement map at a weak focus.

    ``p`` must sit at the Hopf value. Returns ('supercritical' | 'subcritical',
    d(s)/s^3) from a return map on the +x ray at ``s = rel_radius * (1 + |pt|)``.
    """
    s = rel_radius * (1.0 + math.hypot(*pt))
    tight = replace(options, rtol=1e-12, atol=1e-14, loc_tol=1e-14)
    sec = Section(pt, (1.0, 0.0), 10 * s)
    c3 = (return_map(p, sec, s, True, tight) - s) / s**3
    return ("supercritical" if c3 < 0 else "subcritical"), c3


# ---------------------------------------------------------------- continuation


def _locate_near(p: ModelParams, sec: Section, s0: float, window: float, options: IntegratorOptions) -> float | None:
    """Fixed point of the return map in ``[s0 - window, s0 + window]`` closest to ``s0``."""
    L = sec.length

    def d(s):
        return return_map(p, sec, s, True, options) - s

    try:
        d0 = d(s0)
    except NoReturnError:
        return None
    # no tolerance shortcut: near a weak focus |d| ~ s^3 is tiny without a cycle
    if d0 == 0.0:
        return s0
    h = max(1e-6 * L, 1e-3 * window)
    while h <= window:
        for s1 in (s0 - h, s0 + h):
            if s1 <= 0:
                continue
            try:
                d1 = d(s1)
            except NoReturnError:
                continue
            if d0 * d1 < 0:
                a, b = sorted((s0, s1))
                try:
                    return brentq(d, a, b, xtol=1e-11 * L, rtol=1e-15, maxiter=200)
                except (NoReturnError, ValueError):
                    return None
        h *= 2.0
    return None


def _min_distance(loop: np.ndarray, pts: Iterable) -> float:
    best = math.inf
    for q in pts:
        best = min(best, float(np.min(np.hypot(loop[:, 0] - q[0], loop[:, 1] - q[1]))))
    return best


def continue_cycle(p: ModelParams, c: LimitCycle, parameter: str, policy: StepPolicy,
                   saddles: Iterable = (), options: IntegratorOptions = DEFAULT_OPTIONS) -> CycleBranch:
    """Natural-parameter continuation of a limit cycle.

    Each step re-locates the fixed point of the return map near the previous
    ``s_star`` (within 10% of the section length). Terminations: ``fold`` when
    the branch is lost with derivative near 1, ``homoclinic`` when the period
    exceeds ``policy.period_cap`` with the loop within
    ``policy.saddle_distance`` of a saddle, ``parameter-bound`` and ``lost``.
    """
    if parameter not in PARAMETERS:
        raise ValueError(f"parameter must be one of {PARAMETERS}")
    v0 = getattr(p, parameter)
    span = abs(policy.bound - v0)
    if span == 0:
        raise ValueError("empty continuation range")
    direction = math.copysign(1.0, policy.bound - v0)
    h_min, h_max = policy.min_frac * span, policy.max_frac * span
    h = min(max(abs(policy.step), h_min), h_max)
    saddles = [tuple(s.location) if isinstance(s, Equilibrium) else tuple(s) for s in saddles]
    sec = c.section
    branch = CycleBranch(parameter, [(v0, c)])
    v, s_prev = v0, c.s_star
    streak = 0
    window = 0.1 * sec.length
    termination = "lost"
    while len(branch.samples) < policy.max_samples:
        if direction * (policy.bound - v) <= 0:
            termination = "parameter-bound"
            break
        v_try = v + direction * h
        if direction * (v_try - policy.bound) > 0:
            v_try = policy.bound
        q = p.with_(**{parameter: float(v_try)})
        s_new = _locate_near(q, sec, s_prev, window, options)
        cyc = None
        if s_new is not None:
            try:
                cyc = refine_cycle(q, sec, s_new, True, options)
            except NoReturnError:
                cyc = None
        if cyc is None:
            if h <= h_min * (1 + 1e-12):
                break
            h = max(h / 2, h_min)
            streak = 0
            continue
        branch.samples.append((float(v_try), cyc))
        v, s_prev = v_try, cyc.s_star
        if saddles and cyc.period > policy.period_cap and _min_distance(cyc.loop, saddles) < policy.saddle_distance:
            termination = "homoclinic"
            break
        streak += 1
        if streak >= policy.grow_after:
            h = min(h * policy.grow, h_max)
            streak = 0
    else:
        termination = "lost"
    last = branch.samples[-1][1]
    # a Hopf cycle also has derivative near 1 as it shrinks onto the focus
    collapsed = last.s_star < 1e-2 * sec.length
    if termination == "lost" and not collapsed and abs(last.derivative - 1.0) < policy.fold_tol:
        termination = "fold"
    branch.termination = termination
    branch.diagnostics = {
        "collapsed_to_anchor": collapsed,
        "final_period": last.period,
        "final_derivative": last.derivative,
        "min_saddle_distance": _min_distance(last.loop, saddles) if saddles else math.nan,
        "final_step": h,
    }
    return branch


def _pair_exists(p: ModelParams, sec: Section, lo: float, hi: float, options: IntegratorOptions, n: int = 24):
    """Two fixed points of the return map in ``[lo, hi]`` (or a touching extremum).

    Returns (exists, s_extremum, d_extremum).
    """
    from scipy.optimize import minimize_scalar

    def d(s):
        return return_map(p, sec, s, True, options) - s

    ss = np.linspace(lo, hi, n)
    dd = np.array([d(s) for s in ss])
    sg = np.sign(dd)
    if np.count_nonzero(sg[1:] != sg[:-1]) >= 2:
        i = int(np.argmax(-sg[0] * dd))
        return True, float(ss[i]), float(dd[i])
    # the sign opposite to the ends is only reachable at the extremum
    sign = sg[0] if sg[0] != 0 else sg[-1]
    res = minimize_scalar(lambda s: sign * d(s), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-13 * sec.length, "maxiter": 500})
    de = d(float(res.x))
    return bool(de * sign <= 0), float(res.x), float(de)


def detect_fold(b1: CycleBranch, b2: CycleBranch, p: ModelParams | None = None,
                tol: float = 1e-10, options: IntegratorOptions = DEFAULT_OPTIONS) -> BifurcationEvent:
    """Fold of cycles where two branches of opposite stability merge.

    Both branches must be continued in the same parameter on the same
    section and end close to each other. The merge value is bisected on the
    existence of the cycle pair between the branches' last fixed points.
    """
    if b1.parameter != b2.parameter:
        raise NoMergeError("branches use different parameters")
    name = b1.parameter
    (v1, c1), (v2, c2) = b1.last, b2.last
    kinds = {b1.samples[0][1].stability, b2.samples[0][1].stability}
    if kinds != {"stable", "unstable"}:
        raise NoMergeError(f"branches are not of opposite stability: {sorted(kinds)}")
    sec = c1.section
    if sec != c2.section:
        raise NoMergeError("branches use different sections")
    base = p if p is not None else c1.params
    lo_s, hi_s = sorted((c1.s_star, c2.s_star))
    gap = hi_s - lo_s
    if gap > 0.25 * sec.length:
        raise NoMergeError(f"branches end {gap:.3g} apart on the section")
    # start from the branch end lying furthest along the continuation direction
    first = b1.samples[0][0]
    towards = math.copysign(1.0, v1 - first) if v1 != first else -math.copysign(1.0, v2 - b2.samples[0][0])
    v_in = min(v1, v2) if towards > 0 else max(v1, v2)
    step = max(abs(v1 - v2), 1e-9)
    lo_w, hi_w = max(lo_s - gap - 1e-3 * sec.length, 1e-6 * sec.length), hi_s + gap + 1e-3 * sec.length

    def exists(v):
        q = base.with_(**{name: float(v)})
        try:
            return _pair_exists(q, sec, lo_w, hi_w, options)[0]
        except NoReturnError:
            return False

    a = v_in
    if not exists(a):
        raise NoMergeError("cycle pair not found at the branch ends")
    b = a + towards * step
    k = 0
    while exists(b):
        a, b = b, b + towards * step * 2 ** k
        k += 1
        if k > 60:
            raise NoMergeError("no merge in range")
    while abs(b - a) > tol:
        m = 0.5 * (a + b)
        if exists(m):
            a = m
        else:
            b = m
    v_fold = a
    q = base.with_(**{name: float(v_fold)})
    _, s_ext, d_ext = _pair_exists(q, sec, lo_w, hi_w, options)
    semi = refine_cycle(q, sec, s_ext, True, options)
    h = 1e-4 * max(abs(hi_s - lo_s), 1e-4 * sec.length)
    try:
        deriv = (return_map(q, sec, s_ext + h, True, options) - return_map(q, sec, s_ext - h, True, options)) / (2 * h)
    except NoReturnError:
        deriv = math.nan
    semi = replace(semi, derivative=float(deriv), stability=stability_label(deriv))
    diag = {"bracket": [a, b], "d_at_extremum": d_ext, "s_star": s_ext, "multiplier": semi.multiplier}
    return BifurcationEvent("fold-of-cycles", name, float(v_fold), semi, abs(deriv - 1.0), diag)


# ---------------------------------------------------------------- loops


def _saddle_geometry(p: ModelParams, loc):
    eu, es = saddle_eigenvectors(p, loc, rotated=True)
    return np.asarray(loc, float), eu, es


def split_function(p: ModelParams, saddle_loc, unstable: int, stable: int, t_max: float = 2000.0,
                   options: IntegratorOptions = DEFAULT_OPTIONS):
    """Signed split between an unstable and a stable separatrix of a saddle.

    The transversal lies perpendicular to the stable eigenvector at
    ``S + stable * rho * e_s`` with ``rho = 1e-2 (1 + |S|)`` and extends
    ``SPLIT_HALF_WIDTH * rho`` to either side. The stable branch (integrated
    backward) and the unstable branch (integrated forward, crossing toward
    the saddle) are intersected with it; the split is the difference of
    their coordinates along the segment. The unstable branch is only tested
    after it has left the disc of radius ``2 * SPLIT_HALF_WIDTH * rho``
    around the saddle, so its outgoing leg does not count.
    Returns ``(split, (start, t))`` with the unstable-branch start point and
    crossing time, or ``(nan, None)`` if a branch does not reach the segment.
    """
    S, eu, es = _saddle_geometry(p, saddle_loc)
    size = 1.0 + float(np.hypot(*S))
    rho = 1e-2 * size
    eps = 1e-6 * size
    half = SPLIT_HALF_WIDTH * rho
    n = np.array([-es[1], es[0]])
    anchor = S + stable * rho * es - half * n
    arr = _packed(p, True)
    o = options

    def cross(start, t, orient_):
        return K.section_crossing(arr, start[0], start[1], t, anchor[0], anchor[1], n[0], n[1], 0.0, 2 * half,
                                  orient_, o.rtol, o.atol, o.h_max, o.blowup, o.eq_tol, o.loc_tol, o.max_steps)

    st_s, eta_s, *_ = cross(S + stable * eps * es, -t_max, 0)
    if st_s != K.OK:
        return math.nan, None
    u0 = S + unstable * eps * eu
    st, m, t, x, y, _ = K.integrate_path(arr, u0[0], u0[1], min(t_max, 500.0), o.rtol, o.atol, o.h_max, o.blowup,
                                         o.eq_tol, o.max_steps)
    far = np.nonzero(np.hypot(x[:m] - S[0], y[:m] - S[1]) > 2.0 * half)[0]
    if far.size == 0:
        return math.nan, None
    k = int(far[0])
    st_u, eta_u, t_u, *_ = cross((x[k], y[k]), t_max - t[k], stable)
    if st_u != K.OK:
        return math.nan, None
    return float(eta_u - eta_s), (u0, float(t[k] + t_u))


def _loop_polygon(p: ModelParams, start, t_end: float, options: IntegratorOptions) -> np.ndarray:
    arr = _packed(p, True)
    o = options
    st, n, t, x, y, w = K.integrate_path(arr, start[0], start[1], t_end, o.rtol, o.atol, max(t_end / 2000, 1e-3),
                                         o.blowup, o.eq_tol, o.max_steps)
    return np.column_stack([x[:n], y[:n]])


def homoclinic_scan(p: ModelParams, saddle: Equilibrium, parameter: str = "gamma",
                    rng: tuple[float, float] = (-1.0, 0.0), n: int = 41, antisaddles: Iterable = (),
                    tol: float = 1e-10, t_max: float = 2000.0,
                    options: IntegratorOptions = DEFAULT_OPTIONS) -> list[BifurcationEvent]:
    """Separatrix loops of a saddle along a parameter interval.

    For each of the four (unstable, stable) branch pairings the split
    function is sampled on ``n`` parameter values, sign changes between
    consecutive samples with a return are bisected to ``tol``, and the loop
    is labelled by the antisaddles it encloses. Two small loops around
    different antisaddles within 1e-6 of each other give an eight-loop.
    Samples where a branch escapes are skipped and counted in the
    diagnostics.
    """
    if parameter not in PARAMETERS:
        raise ValueError(f"parameter must be one of {PARAMETERS}")
    vals = np.linspace(rng[0], rng[1], n)
    anti = [tuple(a.location) if isinstance(a, Equilibrium) else tuple(a) for a in antisaddles]
    names = {}
    if anti:
        order = sorted(range(len(anti)), key=lambda i: anti[i][0])
        names = {order[k]: f"A{k + 1}" for k in range(len(anti))}
    events: list[BifurcationEvent] = []

    def loc_at(v):
        q = p.with_(**{parameter: float(v)})
        loc = tuple(saddle.location) if parameter == "gamma" else _polish(q, *saddle.location)
        return q, loc

    for uns in (1, -1):
        for stb in (1, -1):
            samples, skipped = [], 0
            for v in vals:
                q, loc = loc_at(v)
                sp, _ = split_function(q, loc, uns, stb, t_max, options)
                if math.isnan(sp):
                    skipped += 1
                samples.append(sp)
            def raw(v):
                q, loc = loc_at(v)
                return split_function(q, loc, uns, stb, t_max, options)[0]

            def f(v):
                sp = raw(v)
                if math.isnan(sp):
                    raise NoReturnError("branch escapes")
                return sp

            for i in range(n - 1):
                a, b = samples[i], samples[i + 1]
                if math.isfinite(a) and math.isfinite(b):
                    if a * b > 0:
                        continue
                    bracket = (vals[i], vals[i + 1], a)
                elif math.isfinite(a) or math.isfinite(b):
                    # near a loop the branch reaches the transversal on both
                    # sides, so a sign change hides next to the return boundary
                    bracket = _edge_bracket(raw, vals[i], a, vals[i + 1], b, tol)
                    if bracket is None:
                        continue
                else:
                    continue
                try:
                    v_star = _bisect(f, *bracket, tol)
                except NoReturnError:
                    continue
                q, loc = loc_at(v_star)
                sp, path = split_function(q, loc, uns, stb, t_max, options)
                enclosed = []
                if path is not None and anti:
                    poly = _loop_polygon(q, path[0], path[1], options)
                    poly = np.vstack([poly, np.asarray(loc)[None, :]])
                    enclosed = [names[k] for k, a_ in enumerate(anti) if encloses(poly, a_)]
                kind = "homoclinic-big-loop" if len(enclosed) >= 2 else "homoclinic-small-loop"
                diag = {"unstable_branch": uns, "stable_branch": stb, "encloses": sorted(enclosed),
                        "bracket": [float(vals[i]), float(vals[i + 1])], "skipped_samples": skipped,
                        "split_slope": _slope(raw, bracket)}
                events.append(BifurcationEvent(kind, parameter, float(v_star), saddle,
                                               abs(sp) if math.isfinite(sp) else math.nan, diag))
    events.sort(key=lambda e: e.value)
    small = [e for e in events if e.kind == "homoclinic-small-loop" and e.diagnostics["encloses"]]
    for i, e1 in enumerate(small):
        for e2 in small[i + 1:]:
            if abs(e1.value - e2.value) <= 1e-6 and e1.diagnostics["encloses"] != e2.diagnostics["encloses"]:
                events.append(BifurcationEvent("eight-loop", parameter, 0.5 * (e1.value + e2.value), saddle,
                                               max(e1.residual, e2.residual),
                                               {"loops": [e1.diagnostics, e2.diagnostics]}))
    events.sort(key=lambda e: e.value)
    return events


def _slope(f, bracket) -> float:
    lo, hi, flo = bracket
    fhi = f(hi)
    return (fhi - flo) / (hi - lo) if math.isfinite(fhi) else math.nan


def _edge_bracket(f, va: float, a: float, vb: float, b: float, tol: float):
    """Bisect between a returning and a non-returning sample for a sign change.

    Returns ``(lo, hi, f(lo))`` bracketing a zero, or None once the interval
    shrinks below ``tol`` without one.
    """
    if math.isnan(a):
        va, a, vb, b = vb, b, va, a
    v_nan = vb
    while abs(v_nan - va) > tol:
        m = 0.5 * (va + v_nan)
        fm = f(m)
        if math.isnan(fm):
            v_nan = m
        elif (fm > 0) == (a > 0):
            va, a = m, fm
        else:
            return (va, m, a) if va < m else (m, va, fm)
    return None


def _bisect(f, a: float, b: float, fa: float, tol: float) -> float:
    while abs(b - a) > tol:
        m = 0.5 * (a + b)
        fm = f(m)
        if fm == 0:
            return m
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)


# ---------------------------------------------------------------- counting and scenario


def _triple(p: ModelParams):
    """(A1, S, A2) in the first quadrant, or None."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        pts = first_quadrant_triple(p)
    if len(pts) != 3 or not (pts[0].is_antisaddle and pts[1].is_saddle and pts[2].is_antisaddle):
        return None
    return tuple(pts)


def _sign_changes(d: np.ndarray) -> int:
    ok = np.isfinite(d)
    sg = np.sign(d)
    return int(np.count_nonzero(ok[:-1] & ok[1:] & (sg[:-1] * sg[1:] < 0)))


@dataclass
class CycleCount:
    around_a1: int
    around_a2: int
    around_s: int

    @property
    def total(self) -> int:
        # a cycle around the saddle encloses both antisaddles and shows on all three rays
        return self.around_a1 + self.around_a2 - self.around_s

    @property
    def concentric(self) -> int:
        return max(self.around_a1, self.around_a2)


def _refine_edges(p, sec, ss, dd, opts, m):
    """Resample between neighbours where the return map starts or stops existing.

    An outer cycle close to a saddle loop sits right at the edge of the
    returning region, which a coarse grid steps over.
    """
    ok = np.isfinite(dd)
    extra = []
    for i in np.nonzero(ok[:-1] != ok[1:])[0]:
        extra.append(np.linspace(ss[i], ss[i + 1], m + 2)[1:-1])
    if not extra or m <= 0:
        return ss, dd
    es = np.concatenate(extra)
    ed = return_map_grid(p, sec, es, True, opts) - es
    s_all = np.concatenate([ss, es])
    d_all = np.concatenate([dd, ed])
    order = np.argsort(s_all)
    return s_all[order], d_all[order]


def count_cycles(p: ModelParams, triple=None, n: int = 40, t_limit: float = 500.0, rtol: float = 1e-8,
                 reach: float = 3.0, edge_points: int = 8) -> CycleCount | None:
    """Sign changes of the displacement function on three rays.

    Rays: from A1 toward -x, from A2 toward +x and from S toward +y, each of
    length ``reach * (1 + |S|)``, sampled geometrically with ``edge_points``
    extra samples wherever the return map starts or stops existing. Returns None without three antisaddle /
    saddle / antisaddle points in the first quadrant.
    """
    if triple is None:
        triple = _triple(p)
    if triple is None:
        return None
    a1, s, a2 = (np.asarray(e.location if isinstance(e, Equilibrium) else e, float) for e in triple)
    L = reach * (1.0 + float(np.hypot(*s)))
    opts = replace(DEFAULT_OPTIONS, rtol=rtol, atol=1e-12, t_limit=t_limit, loc_tol=1e-12)
    out = []
    for anchor, direction in ((a1, (-1.0, 0.0)), (a2, (1.0, 0.0)), (s, (0.0, 1.0))):
        sec = Section(anchor, direction, L)
        ss = np.geomspace(1e-3 * L, L, n)
        dd = return_map_grid(p, sec, ss, True, opts) - ss
        ss, dd = _refine_edges(p, sec, ss, dd, opts, edge_points)
        out.append(_sign_changes(dd))
    return CycleCount(*out)


def cycle_count_harness(base: ModelParams, grid: dict[str, Iterable[float]], n_rays: int = 40,
                        raise_on_breach: bool = True, max_total: int = 2, max_concentric: int = 2):
    """Cycle counts on a parameter grid (cartesian product of ``grid``).

    Raises :class:`HarnessBreach` with the offending parameters serialised
    if any sample exceeds the bounds. Returns a summary dict.
    """
    names = list(grid)
    axes = [np.asarray(list(grid[k]), float) for k in names]
    mesh = np.meshgrid(*axes, indexing="ij")
    flat = [m.ravel() for m in mesh]
    jitter = os.environ.get("QBL_SEED")
    rng = np.random.default_rng(int(jitter)) if jitter else None
    samples = 0
    skipped = 0
    max_t = max_c = 0
    histogram: dict[int, int] = {}
    breaches = []
    triple_cache = None
    for idx in range(flat[0].size):
        changes = {k: float(f[idx]) for k, f in zip(names, flat)}
        if rng is not None:
            for k, ax in zip(names, axes):
                step = (ax[-1] - ax[0]) / max(len(ax) - 1, 1)
                changes[k] += rng.uniform(-0.25, 0.25) * step
        p = base.with_(**changes)
        if triple_cache is None or any(k != "gamma" for k in names):
            triple_cache = _triple(p)
        cc = count_cycles(p, triple_cache, n=n_rays)
        if cc is None:
            skipped += 1
            continue
        samples += 1
        max_t, max_c = max(max_t, cc.total), max(max_c, cc.concentric)
        histogram[cc.total] = histogram.get(cc.total, 0) + 1
        if cc.total > max_total or cc.concentric > max_concentric:
            info = {**p.as_dict(), "around_a1": cc.around_a1, "around_a2": cc.around_a2, "around_s": cc.around_s}
            breaches.append(info)
            if raise_on_breach:
                raise HarnessBreach("cycle-count bound exceeded", info)
    return {"samples": samples, "skipped": skipped, "max_total": max_t, "max_concentric": max_c,
            "histogram": dict(sorted(histogram.items())), "breaches": breaches}


def standard_sections(p: ModelParams, reach: float = 3.0, triple=None) -> list[tuple[str, Section]]:
    """Sections that together cross every cycle in the first quadrant once.

    With an (A1, S, A2) triple: the segments from each antisaddle toward
    the saddle (cycles around one antisaddle) and the ray from S upward
    (cycles around all three). Otherwise a +x ray from each first-quadrant
    antisaddle of focus or node type.
    """
    if triple is None:
        triple = _triple(p)
    if triple is not None:
        a1, s, a2 = (np.asarray(e.location, float) for e in triple)
        out = []
        for name, a in (("A1", a1), ("A2", a2)):
            v = s - a
            out.append((name, Section(a, v, 0.999 * float(np.hypot(*v)))))
        out.append(("S", Section(s, (0.0, 1.0), reach * (1.0 + float(np.hypot(*s))))))
        return out
    out = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        pts = first_quadrant_triple(p)
    for k, e in enumerate(e for e in pts if e.is_antisaddle):
        out.append((f"A{k + 1}", Section(e.location, (1.0, 0.0), reach * (1.0 + math.hypot(*e.location)))))
    return out


def survey_cycles(p: ModelParams, reach: float = 3.0, n: int = 200,
                  options: IntegratorOptions = DEFAULT_OPTIONS) -> list[tuple[str, LimitCycle, list[str]]]:
    """All cycles found on :func:`standard_sections`.

    Returns ``(section label, cycle, enclosed first-quadrant equilibria)``
    triples; each cycle is reported once.
    """
    triple = _triple(p)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        named = {}
        if triple is not None:
            named = dict(zip(("A1", "S", "A2"), (e.location for e in triple)))
        else:
            for k, e in enumerate(e for e in first_quadrant_triple(p) if e.is_antisaddle):
                named[f"A{k + 1}"] = e.location
    out = []
    for label, sec in standard_sections(p, reach, triple):
        for c in find_cycles(p, sec, True, options, n=n):
            out.append((label, c, [k for k, v in named.items() if c.encloses(v)]))
    return out


def run_scenario(config: dict, options: IntegratorOptions = DEFAULT_OPTIONS, harness: bool = True) -> dict:
    """Replay the staged sweep described by ``config`` and return an event log.

    ``config`` keys: ``quadratic``, ``cubic``, ``quartic`` (parameter dicts),
    ``gamma_sweep`` ({"base": params, "range": [a, b], "samples": n}) and
    optionally ``harness`` ({"base": params, "grid": {name: [lo, hi, n]}}).
    """
    log: dict = {"stages": [], "events": [], "max_cycles": 0, "max_concentric": 0}

    def params(d):
        return ModelParams(**{**d, "strict": d.get("strict", True)}) if "strict" in d else ModelParams(**d)

    for stage in ("quadratic", "cubic", "quartic"):
        if stage not in config:
            continue
        p = params(config[stage])
        census = full_census(p)
        report = verify_configuration(census)
        cycles = []
        for e in census.antisaddles():
            if e.location.x <= 0 or e.location.y <= 0 or "focus" not in e.classification:
                continue
            reach = config.get("outer_reach", 2.0) * (1.0 + math.hypot(*e.location))
            sec = Section(e.location, (-1.0, 0.0), reach)
            for c in find_cycles(p, sec, True, options, n=config.get("scan_points", 120)):
                cycles.append({"around": [e.location.x, e.location.y], "s_star": c.s_star,
                               "stability": c.stability, "derivative": c.derivative})
        log["stages"].append({"stage": stage, "params": p.as_dict(), "finite": len(census.finite),
                              "infinite": [s.type for s in census.infinite],
                              "index_identity": report.index_identity, "cycles": cycles})
    sweep = config.get("gamma_sweep")
    if sweep:
        p = params(sweep["base"])
        triple = _triple(p)
        g0, g1 = sweep["range"]
        if triple is not None:
            a1, s, a2 = triple
            for e in (a1, a2):
                log["events"] += [ev.as_dict() for ev in hopf_detect(p, e, "gamma", (g0, g1), 400)]
            loops = homoclinic_scan(p, s, "gamma", (g0, g1), sweep.get("loop_samples", 41), (a1, a2),
                                    options=options)
            log["events"] += [ev.as_dict() for ev in loops]
            if "fold_from" in sweep:
                q = p.with_(gamma=float(sweep["fold_from"]))
                sec = dict(standard_sections(q, triple=triple))["A1"]
                pair = find_cycles(q, sec, True, options)
                labels = {c.stability for c in pair}
                if len(pair) == 2 and labels == {"stable", "unstable"}:
                    policy = StepPolicy(step=1e-3 * (g1 - g0), bound=g1)
                    legs = [continue_cycle(q, c, "gamma", policy, (s,), options) for c in pair]
                    try:
                        log["events"].append(detect_fold(*legs, p=q, options=options).as_dict())
                    except NoMergeError as exc:
                        log["events"].append({"kind": "no-merge", "value": float(sweep["fold_from"]),
                                              "message": str(exc)})
            counts = []
            for g in np.linspace(g0, g1, sweep.get("samples", 101)):
                cc = count_cycles(p.with_(gamma=float(g)), triple)
                counts.append({"gamma": float(g), "total": cc.total, "around_a1": cc.around_a1,
                               "around_a2": cc.around_a2, "around_s": cc.around_s})
                log["max_cycles"] = max(log["max_cycles"], cc.total)
                log["max_concentric"] = max(log["max_concentric"], cc.concentric)
                if cc.total > 2 or cc.concentric > 2:
                    raise HarnessBreach("cycle-count bound exceeded", {**p.with_(gamma=float(g)).as_dict()})
            log["gamma_counts"] = counts
        log["events"].sort(key=lambda e: e["value"])
    h = config.get("harness")
    if harness and h:
        grid = {k: np.linspace(*v[:2], int(v[2])) for k, v in h["grid"].items()}
        summary = cycle_count_harness(params(h["base"]), grid)
        log["harness"] = summary
        log["max_cycles"] = max(log["max_cycles"], summary["max_total"])
        log["max_concentric"] = max(log["max_concentric"], summary["max_concentric"])
    return log
