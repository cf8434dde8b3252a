"""Finite singular points: enumeration, classification, Poincare indices and
the index-theoretic configuration checks."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model import ModelParams, PhasePoint, eval_field, eval_jacobian, eval_rotated_field

__all__ = [
    "Equilibrium",
    "Census",
    "ConfigurationReport",
    "RootFindingError",
    "SingularContourError",
    "AmbiguousWindingError",
    "ANTISADDLES",
    "classify",
    "axis_equilibria",
    "interior_equilibria",
    "first_quadrant_triple",
    "circle",
    "contour_index",
    "full_census",
    "verify_configuration",
]

DEDUP_DIST = 1e-7
ZERO_EIG_TOL = 1e-6
TRACE_TOL = 1e-8
LEADING_CUT = 1e-30

INDEX = {
    "saddle": -1,
    "stable-node": 1,
    "unstable-node": 1,
    "stable-focus": 1,
    "unstable-focus": 1,
    "center-or-weak-focus": 1,
    "saddle-node": 0,
    "degenerate": 0,
}
ANTISADDLES = frozenset(k for k, v in INDEX.items() if v == 1)


class RootFindingError(RuntimeError):
    pass


class SingularContourError(ValueError):
    pass


class AmbiguousWindingError(ValueError):
    pass


@dataclass
class Equilibrium:
    location: PhasePoint
    eigenvalues: tuple[complex, complex]
    classification: str
    index: int
    residual: float
    contour_index: int | None = None

    @property
    def is_saddle(self) -> bool:
        return self.classification == "saddle"

    @property
    def is_antisaddle(self) -> bool:
        return self.classification in ANTISADDLES

    @property
    def is_simple(self) -> bool:
        return self.classification not in ("saddle-node", "degenerate")


def classify(eigenvalues, trace: float | None = None, det: float | None = None) -> str:
    """Label a planar equilibrium from its eigenvalue pair."""
    l1, l2 = (complex(e) for e in eigenvalues)
    if trace is None:
        trace = (l1 + l2).real
    if det is None:
        det = (l1 * l2).real
    a1, a2 = abs(l1), abs(l2)
    z1 = a1 < ZERO_EIG_TOL * max(1.0, a2)
    z2 = a2 < ZERO_EIG_TOL * max(1.0, a1)
    if z1 and z2:
        return "degenerate"
    if z1 or z2:
        return "saddle-node"
    if l1.imag != 0.0:
        if abs(trace) < TRACE_TOL * (1.0 + abs(det)):
            return "center-or-weak-focus"
        return "stable-focus" if trace < 0 else "unstable-focus"
    if l1.real * l2.real < 0:
        return "saddle"
    return "stable-node" if l1.real < 0 else "unstable-node"


def _make(p: ModelParams, x: float, y: float) -> Equilibrium:
    jac = eval_jacobian(p, (x, y), rotated=True)
    eig = jac.eigenvalues
    cls = classify(eig, jac.trace, jac.determinant)
    P, Q = eval_field(p, (x, y))
    return Equilibrium(PhasePoint(float(x), float(y)), eig, cls, INDEX[cls], math.hypot(P, Q))


def _dedup(points: list[tuple[float, float]]) -> list[tuple[float, float]]:
    out: list[tuple[float, float]] = []
    for q in points:
        if all(math.hypot(q[0] - r[0], q[1] - r[1]) > DEDUP_DIST * (1 + math.hypot(*r)) for r in out):
            out.append(q)
    return out


def _axis_points(p: ModelParams) -> list[tuple[float, float]]:
    pts = [(0.0, 0.0)]
    if p.mu > 0:
        pts.append((0.0, -p.delta / p.mu))
    pts.append((1.0 / p.lam, 0.0))
    if p.alpha > 0:
        disc = p.beta * p.beta - 4.0 * p.alpha
        if disc >= 0:
            sq = math.sqrt(disc)
            # stable quadratic formula
            q = -0.5 * (p.beta + math.copysign(sq, p.beta)) if p.beta != 0 else 0.5 * sq
            roots = {q / p.alpha, 1.0 / q} if q != 0 else {0.5 * sq / p.alpha}
            pts.extend((r, 0.0) for r in sorted(roots))
    elif p.beta != 0:
        pts.append((-1.0 / p.beta, 0.0))
    # subnormal parameters can push a point to infinity
    return _dedup([q for q in pts if math.isfinite(q[0]) and math.isfinite(q[1])])


def axis_equilibria(p: ModelParams) -> list[Equilibrium]:
    """Singular points on the invariant axes of the unrotated field.

    These are ``(0, 0)``, ``(0, -delta/mu)`` when ``mu > 0``, ``(1/lam, 0)``
    and the real zeros of ``A`` on the x-axis (a double zero gives one point).
    """
    return [_make(p, x, y) for x, y in _axis_points(p)]


def _interior_poly(p: ModelParams, scale: float) -> np.polynomial.Polynomial:
    # x = scale * xi;  delta A + mu (1 - lam x) A^2 - x  as a polynomial in xi
    Poly = np.polynomial.Polynomial
    A = Poly([1.0, p.beta * scale, p.alpha * scale * scale])
    lin = Poly([1.0, -p.lam * scale])
    f = p.delta * A + p.mu * lin * A * A - Poly([0.0, scale])
    c = f.coef
    # leading coefficients this small only carry roots beyond ~1e30
    top = len(c)
    while top > 1 and abs(c[top - 1]) <= LEADING_CUT * np.max(np.abs(c)):
        top -= 1
    return Poly(c[:top])


def _polish(p: ModelParams, x: float, y: float, iters: int = 8) -> tuple[float, float]:
    """Newton on the reduced interior system g = (1 - lam x) A - y, h = (delta + mu y) A - x."""
    for _ in range(iters):
        a = (p.alpha * x + p.beta) * x + 1.0
        ap = 2.0 * p.alpha * x + p.beta
        pred = p.delta + p.mu * y
        g = (1.0 - p.lam * x) * a - y
        h = pred * a - x
        j11 = (1.0 - p.lam * x) * ap - p.lam * a
        j12 = -1.0
        j21 = pred * ap - 1.0
        j22 = p.mu * a
        det = j11 * j22 - j12 * j21
        if det == 0 or not math.isfinite(det):
            break
        dx = (g * j22 - j12 * h) / det
        dy = (j11 * h - j21 * g) / det
        x, y = x - dx, y - dy
        if abs(dx) + abs(dy) <= 1e-16 * (1 + abs(x) + abs(y)):
            break
    return x, y


def _interior_points(p: ModelParams, scale: float | None = None) -> list[tuple[float, float]]:
    if scale is None:
        scale = 1.0 / p.lam
    f = _interior_poly(p, scale)
    try:
        roots = f.roots()
    except np.linalg.LinAlgError as exc:
        raise RootFindingError(f"companion eigenvalue solve failed for {p}") from exc
    if not np.all(np.isfinite(roots)):
        raise RootFindingError(f"non-finite roots for {p}")
    axis = _axis_points(p)
    pts = []
    for r in roots:
        if abs(r.imag) > 1e-6 * (1.0 + abs(r.real)):
            continue
        x = float(r.real) * scale
        y = (1.0 - p.lam * x) * ((p.alpha * x + p.beta) * x + 1.0)
        x, y = _polish(p, x, y)
        pts.append((x, y))
    pts = _dedup(pts)
    return [q for q in pts if all(math.hypot(q[0] - a[0], q[1] - a[1]) > DEDUP_DIST * (1 + math.hypot(*a)) for a in axis)]


def interior_equilibria(p: ModelParams, scale: float | None = None) -> list[Equilibrium]:
    """Singular points off the axes, from the isocline intersections.

    Substituting the prey isocline into ``y (delta + mu y) = x (1 - lam x)``
    leaves the factor ``1 - lam x`` (the point ``(1/lam, 0)``) times
    ``delta A + mu (1 - lam x) A^2 - x``; the real zeros of the latter are
    found as companion-matrix eigenvalues after substituting ``x = scale * xi``
    and then Newton-polished on the two isocline equations.
    """
    return sorted((_make(p, x, y) for x, y in _interior_points(p, scale)), key=lambda e: e.location)


def first_quadrant_triple(p: ModelParams, equilibria: Sequence[Equilibrium] | None = None):
    """The first-quadrant interior points sorted by x, as ``(A1, S, A2)`` when there are three.

    Returns the sorted list; warns when three points do not alternate as
    antisaddle, saddle, antisaddle.
    """
    if equilibria is None:
        equilibria = interior_equilibria(p)
    pts = sorted((e for e in equilibria if e.location.x > 0 and e.location.y > 0), key=lambda e: e.location.x)
    if len(pts) == 3 and not (pts[0].is_antisaddle and pts[1].is_saddle and pts[2].is_antisaddle):
        warnings.warn(
            "first-quadrant points do not alternate antisaddle/saddle/antisaddle: "
            + ", ".join(e.classification for e in pts),
            stacklevel=2,
        )
    return pts


def circle(center, radius: float, n: int = 256) -> np.ndarray:
    """Counterclockwise closed polyline (first vertex not repeated)."""
    th = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    return np.column_stack([center[0] + radius * np.cos(th), center[1] + radius * np.sin(th)])


def _field_angles(p: ModelParams, pts: np.ndarray, rotated: bool):
    f = eval_rotated_field if rotated else eval_field
    P, Q = f(p, (pts[:, 0], pts[:, 1]))
    return np.arctan2(Q, P), np.hypot(P, Q)


def contour_index(p: ModelParams, curve, rotated: bool = True, max_refine: int = 12) -> int:
    """Winding number of the field direction along a closed, positively oriented polyline.

    Segments whose angle increment exceeds pi/4 are bisected until every
    increment is small (up to ``max_refine`` levels).
    """
    pts = np.asarray(curve, dtype=float)
    if np.allclose(pts[0], pts[-1]):
        pts = pts[:-1]
    x, y = pts[:, 0], pts[:, 1]
    area = 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
    if area <= 0:
        raise ValueError("contour must be positively oriented")
    closed = np.vstack([pts, pts[:1]])
    total = 0.0
    for a, b in zip(closed[:-1], closed[1:]):
        total += _segment_winding(p, a, b, rotated, max_refine)
    j = total / (2.0 * np.pi)
    k = int(round(j))
    if abs(j - k) > 1e-3:
        raise AmbiguousWindingError(f"winding sum {j} is not close to an integer")
    return k


def _segment_winding(p, a, b, rotated, depth) -> float:
    ts = np.linspace(0.0, 1.0, 9)
    seg = a[None, :] + ts[:, None] * (b - a)[None, :]
    ang, norm = _field_angles(p, seg, rotated)
    if np.min(norm) < 1e-12:
        raise SingularContourError("field vanishes (norm < 1e-12) on the contour")
    d = np.diff(ang)
    d = (d + np.pi) % (2.0 * np.pi) - np.pi
    if np.max(np.abs(d)) <= np.pi / 4:
        return float(np.sum(d))
    if depth == 0:
        if np.max(np.abs(d)) >= np.pi / 2:
            raise AmbiguousWindingError("field direction turns too fast along the contour")
        return float(np.sum(d))
    return sum(_segment_winding(p, seg[i], seg[i + 1], rotated, depth - 1) for i in range(len(seg) - 1))


@dataclass
class Census:
    params: ModelParams
    finite: list[Equilibrium]
    infinite: list = field(default_factory=list)

    def saddles(self) -> list[Equilibrium]:
        return [e for e in self.finite if e.is_saddle]

    def antisaddles(self) -> list[Equilibrium]:
        return [e for e in self.finite if e.is_antisaddle]


def _probe_radius(e: Equilibrium, others: Sequence[Equilibrium]) -> float:
    r = 1e-3 * (1.0 + math.hypot(*e.location))
    for o in others:
        if o is e:
            continue
        r = min(r, 0.25 * math.hypot(o.location.x - e.location.x, o.location.y - e.location.y))
    return r


def full_census(p: ModelParams, with_contours: bool = True) -> Census:
    """All finite singular points (sorted by location) and the infinite ones."""
    from .compactification import infinite_census

    pts = _dedup(_axis_points(p) + _interior_points(p))
    finite = sorted((_make(p, x, y) for x, y in pts), key=lambda e: e.location)
    if with_contours:
        for e in finite:
            r = _probe_radius(e, finite)
            try:
                e.contour_index = contour_index(p, circle(e.location, r, 64))
            except (SingularContourError, AmbiguousWindingError):
                e.contour_index = None
    return Census(p, finite, infinite_census(p))


# -- configuration checks ---------------------------------------------------

PASS, FAIL, INAPPLICABLE = "PASS", "FAIL", "INAPPLICABLE"


@dataclass
class ConfigurationReport:
    index_identity: str
    alternation: str
    berlinskii: str
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return FAIL not in (self.index_identity, self.alternation, self.berlinskii)


def _index_identity(c: Census, details: dict) -> str:
    if not all(e.is_simple for e in c.finite):
        details["index_identity"] = "finite saddle-node or degenerate point present"
        return INAPPLICABLE
    inf_index = {"node": 1, "triple-node": 1, "saddle": -1, "saddle-node": 0}
    if any(s.type not in inf_index for s in c.infinite):
        details["index_identity"] = "unclassified infinite point"
        return INAPPLICABLE
    n = sum(1 for e in c.finite if e.classification.endswith("node"))
    nf = sum(1 for e in c.finite if e.classification.endswith("focus") and e.classification != "center-or-weak-focus")
    nc = sum(1 for e in c.finite if e.classification == "center-or-weak-focus")
    cs = sum(1 for e in c.finite if e.is_saddle)
    n_inf = sum(1 for s in c.infinite if inf_index[s.type] == 1)
    c_inf = sum(1 for s in c.infinite if inf_index[s.type] == -1)
    details["counts"] = {"N": n, "N_f": nf, "N_c": nc, "C": cs, "N_inf": n_inf, "C_inf": c_inf}
    return PASS if n + nf + nc + n_inf == cs + c_inf + 1 else FAIL


def _branches(p: ModelParams, finite: Sequence[Equilibrium]):
    """Smooth isocline branches without multiple points, each as a list of
    (arc key, equilibrium)."""
    tol = 1e-7
    out = []

    def on_prey(e):
        x, y = e.location
        return abs(y - (1.0 - p.lam * x) * ((p.alpha * x + p.beta) * x + 1.0)) <= tol * (1 + abs(y))

    def on_pred(e):
        x, y = e.location
        a = (p.alpha * x + p.beta) * x + 1.0
        return abs((p.delta + p.mu * y) * a - x) <= tol * (1 + abs(x))

    # x = 0 line, cut where it meets the prey cubic at (0, 1)
    on_y_axis = [e for e in finite if abs(e.location.x) <= tol]
    out.append([(e.location.y, e) for e in on_y_axis if e.location.y < 1.0])
    out.append([(e.location.y, e) for e in on_y_axis if e.location.y > 1.0])
    # prey cubic graph, cut at x = 0
    prey = [e for e in finite if on_prey(e)]
    out.append([(e.location.x, e) for e in prey if e.location.x < 0])
    out.append([(e.location.x, e) for e in prey if e.location.x > 0])
    # y = 0 line, cut at the zeros of delta A(x) - x
    cuts = sorted(r.real for r in np.polynomial.Polynomial([p.delta, p.delta * p.beta - 1.0, p.delta * p.alpha]).trim().roots()
                  if abs(r.imag) < 1e-12) if (p.delta * p.alpha != 0 or p.delta * p.beta - 1.0 != 0) else []
    on_x_axis = [e for e in finite if abs(e.location.y) <= tol]
    out.extend(_split(on_x_axis, lambda e: e.location.x, cuts))
    # predator curve: graph over x when mu > 0, cut at y = 0 and at poles of 1/A
    if p.mu > 0:
        pred = [e for e in finite if on_pred(e) and abs(e.location.y) > tol]
        poles = []
        if p.alpha != 0 or p.beta != 0:
            poles = [r.real for r in np.polynomial.Polynomial([1.0, p.beta, p.alpha]).trim().roots() if abs(r.imag) < 1e-12]
        pieces = _split(pred, lambda e: e.location.x, sorted(poles + cuts))
        out.extend(pieces)
    return [sorted(b, key=lambda t: t[0]) for b in out if len(b) >= 2]


def _split(items, key, cuts):
    edges = [-math.inf] + list(cuts) + [math.inf]
    return [[(key(e), e) for e in items if lo < key(e) < hi] for lo, hi in zip(edges[:-1], edges[1:])]


def _alternation(c: Census, details: dict) -> str:
    if not all(e.is_simple for e in c.finite):
        details["alternation"] = "non-simple point present"
        return INAPPLICABLE
    bad = []
    for branch in _branches(c.params, c.finite):
        for (_, e1), (_, e2) in zip(branch[:-1], branch[1:]):
            if e1.is_saddle == e2.is_saddle:
                bad.append((tuple(e1.location), tuple(e2.location)))
    details["alternation_violations"] = bad
    return FAIL if bad else PASS


def _convex_hull(points: np.ndarray) -> list[int]:
    idx = sorted(range(len(points)), key=lambda i: (points[i][0], points[i][1]))

    def cross(o, a, b):
        return (points[a][0] - points[o][0]) * (points[b][1] - points[o][1]) - (
            points[a][1] - points[o][1]
        ) * (points[b][0] - points[o][0])

    lower: list[int] = []
    for i in idx:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], i) <= 0:
            lower.pop()
        lower.append(i)
    upper: list[int] = []
    for i in reversed(idx):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], i) <= 0:
            upper.pop()
        upper.append(i)
    return lower[:-1] + upper[:-1]


def _berlinskii(c: Census, details: dict) -> str:
    if c.params.alpha != 0 or c.params.beta != 0:
        details["berlinskii"] = "not a quadratic system"
        return INAPPLICABLE
    if len(c.finite) != 4 or not all(e.is_simple for e in c.finite):
        details["berlinskii"] = "needs exactly four simple finite points"
        return INAPPLICABLE
    pts = np.array([e.location for e in c.finite])
    hull = _convex_hull(pts)
    sad = [e.is_saddle for e in c.finite]
    if len(hull) == 4:
        details["berlinskii_case"] = "convex quadrilateral"
        ok = sad[hull[0]] == sad[hull[2]] and sad[hull[1]] == sad[hull[3]] and sad[hull[0]] != sad[hull[1]]
    elif len(hull) == 3:
        details["berlinskii_case"] = "triangle with interior point"
        inner = ({0, 1, 2, 3} - set(hull)).pop()
        ok = all(sad[i] != sad[inner] for i in hull)
    else:
        details["berlinskii_case"] = "collinear"
        return INAPPLICABLE
    return PASS if ok else FAIL


def verify_configuration(c: Census) -> ConfigurationReport:
    """Index identity, saddle/antisaddle alternation along isoclines, and the
    four-point convexity rule for quadratic systems."""
    details: dict = {}
    return ConfigurationReport(_index_identity(c, details), _alternation(c, details), _berlinskii(c, details), details)
