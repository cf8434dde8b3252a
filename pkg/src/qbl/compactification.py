"""Singular points at infinity through the charts ``u = y/x, z = 1/x`` and
``v = x/y, z = 1/y``.

The chart fields are built from the coefficients of the (rotated) polynomial
field, multiplied through by ``z^d`` (``d`` the total degree), so for
``gamma = 0`` the equator equations reduce to ``(1-mu)u^2 + (1+lam)u``,
``mu u^2 - lam u`` and ``lam v^4 - mu v^3`` (up to a constant factor) in the
three stages.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from numpy.polynomial import Polynomial

from .model import ModelParams

__all__ = [
    "InfiniteSingularity",
    "DegenerateChartError",
    "UnclassifiableError",
    "field_coefficients",
    "chart_polynomial",
    "chart_field",
    "infinite_census",
    "classify_infinite",
]

SAMPLE_RADII = (1e-3, 1e-4)
N_RAYS = 64


class DegenerateChartError(ValueError):
    pass


class UnclassifiableError(RuntimeError):
    pass


@dataclass(frozen=True)
class InfiniteSingularity:
    chart: str  # "u" or "v"
    coordinate: float
    type: str = "unclassified"
    multiplicity: int = 1
    type_lower: str = ""  # verdict on the z < 0 half-disc
    note: str = ""

    def __post_init__(self):
        object.__setattr__(self, "coordinate", float(self.coordinate))
        object.__setattr__(self, "multiplicity", int(self.multiplicity))

    @property
    def direction(self) -> tuple[float, float]:
        """Unit vector (x, y) of the direction, on the z > 0 side of the chart."""
        if self.chart == "u":
            v = np.array([1.0, self.coordinate])
        else:
            v = np.array([self.coordinate, 1.0])
        v /= np.hypot(*v)
        return float(v[0]), float(v[1])


def field_coefficients(p: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Coefficient arrays ``C[i, j]`` of ``x^i y^j`` for the rotated field."""
    a, b, d, lam, mu, g = p.alpha, p.beta, p.delta, p.lam, p.mu, p.gamma
    P = np.zeros((5, 5))
    Q = np.zeros((5, 5))
    # P = -lam a x^4 + (a - lam b) x^3 + (b - lam) x^2 + x - x y
    P[4, 0] = -lam * a
    P[3, 0] = a - lam * b
    P[2, 0] = b - lam
    P[1, 0] = 1.0
    P[1, 1] = -1.0
    # Q = -y((d + mu y) A - x)
    Q[2, 1] = -d * a
    Q[1, 1] = 1.0 - d * b
    Q[0, 1] = -d
    Q[2, 2] = -mu * a
    Q[1, 2] = -mu * b
    Q[0, 2] = -mu
    return P - g * Q, Q + g * P


def _degree(*cs: np.ndarray) -> int:
    deg = 0
    for c in cs:
        for (i, j), v in np.ndenumerate(c):
            if v != 0:
                deg = max(deg, i + j)
    return deg


def _chart_coeffs(c: np.ndarray, d: int, chart: str) -> np.ndarray:
    """Coefficients ``K[k, l]`` of ``s^k z^l`` for ``z^d c(x, y)`` in a chart with coordinate s."""
    out = np.zeros((d + 1, d + 1))
    for (i, j), v in np.ndenumerate(c):
        if v == 0:
            continue
        k = j if chart == "u" else i
        out[k, d - i - j] += v
    return out


def chart_field(p: ModelParams, chart: str):
    """Polynomial chart field as a callable ``(s, z) -> (s', z')``.

    Also returns the coefficient arrays of the two components.
    """
    P, Q = field_coefficients(p)
    d = _degree(P, Q)
    if chart == "u":
        num, den = _chart_coeffs(Q, d, "u"), _chart_coeffs(P, d, "u")
    elif chart == "v":
        num, den = _chart_coeffs(P, d, "v"), _chart_coeffs(Q, d, "v")
    else:
        raise ValueError(f"unknown chart {chart!r}")
    # s' = num - s * den,  z' = -z * den
    ds = np.zeros((d + 2, d + 2))
    ds[: d + 1, : d + 1] += num
    ds[1:, : d + 1] -= den
    dz = np.zeros((d + 2, d + 2))
    dz[: d + 1, 1:] -= den

    def f(s, z):
        return np.polynomial.polynomial.polyval2d(s, z, ds), np.polynomial.polynomial.polyval2d(s, z, dz)

    return f, ds, dz


def chart_polynomial(p: ModelParams, chart: str) -> Polynomial:
    """The equator equation of a chart: ``s'`` restricted to ``z = 0``."""
    _, ds, _ = chart_field(p, chart)
    return Polynomial(ds[:, 0]).trim()


def _roots_with_multiplicity(poly: Polynomial) -> list[tuple[float, int]]:
    c = poly.coef.copy()
    scale = np.max(np.abs(c)) if c.size else 0.0
    if scale == 0.0:
        raise DegenerateChartError("chart polynomial vanishes identically")
    c[np.abs(c) < 1e-14 * scale] = 0.0
    k0 = 0
    while k0 < len(c) and c[k0] == 0.0:
        k0 += 1
    out: list[tuple[float, int]] = []
    if k0:
        out.append((0.0, k0))
    rest = Polynomial(c[k0:]).trim()
    if rest.degree() >= 1:
        roots = rest.roots()
        used = np.zeros(len(roots), bool)
        for i, r in enumerate(roots):
            if used[i]:
                continue
            cluster = [j for j in range(len(roots)) if not used[j] and abs(roots[j] - r) <= 1e-5 * (1 + abs(r))]
            for j in cluster:
                used[j] = True
            z = np.mean(roots[cluster])
            if abs(z.imag) > 1e-7 * (1 + abs(z.real)):
                continue
            x = float(z.real)
            if len(cluster) == 1:
                d1 = rest.deriv()
                for _ in range(5):
                    fx, dfx = rest(x), d1(x)
                    if dfx == 0:
                        break
                    x -= fx / dfx
            out.append((x, len(cluster)))
    return sorted(out)


def infinite_census(p: ModelParams, classify: bool = True) -> list[InfiniteSingularity]:
    """Directions of singular points at infinity, one per antipodal pair.

    All real roots of the u-chart equation are reported; the v-chart adds
    only ``v = 0`` (the ends of the y-axis), every other v-root being a
    u-chart direction ``u = 1/v``.
    """
    pts = [InfiniteSingularity("u", u, multiplicity=m) for u, m in _roots_with_multiplicity(chart_polynomial(p, "u"))]
    for v, m in _roots_with_multiplicity(chart_polynomial(p, "v")):
        if v == 0.0:
            pts.append(InfiniteSingularity("v", 0.0, multiplicity=m))
    if classify:
        pts = [classify_infinite(p, s) for s in pts]
    return sorted(pts, key=lambda s: (s.chart, s.coordinate))


def _pattern(f, c: float, r: float, lower: bool) -> str:
    """Sector structure on a half-circle around ``(c, 0)``.

    Characteristic directions are the zeros of the angular component ``G``
    (the two equator directions always are, the equator being invariant).
    The arc flow between consecutive ones runs from ``a`` to ``b``; with
    ``F`` the radial component the sector is hyperbolic if ``F(a) < 0 < F(b)``,
    elliptic if ``F(a) > 0 > F(b)`` and parabolic otherwise.
    """
    th = np.linspace(0.0, np.pi, 8 * N_RAYS + 1)
    if lower:
        th = -th
    cs, sn = np.cos(th), np.sin(th)
    fs, fz = f(c + r * cs, r * sn)
    F = fs * cs + fz * sn
    G = cs * fz - sn * fs
    if lower:
        G = -G  # keep "positive" meaning away from the first equator direction
    scale = max(np.max(np.abs(F)), np.max(np.abs(G)))
    if scale == 0:
        return "other-degenerate"
    g = np.where(np.abs(G) <= 1e-12 * scale, 0.0, np.sign(G))
    g[0] = g[-1] = 0.0
    # characteristic directions: the ends plus interior sign changes or zero runs of G
    marks = [0]
    last = 0.0
    for i in range(1, len(th) - 1):
        if g[i] == 0.0:
            if marks[-1] != i - 1:
                marks.append(i)
            continue
        if last != 0.0 and g[i] != last and marks[-1] < i - 1:
            marks.append(i)
        last = g[i]
    marks.append(len(th) - 1)
    marks = sorted(set(marks))
    fsign = np.sign(np.where(np.abs(F) <= 1e-12 * scale, 0.0, F))
    if np.any(fsign[marks] == 0):
        return "other-degenerate"
    kinds = []
    for a, b in zip(marks[:-1], marks[1:]):
        inner = g[a + 1:b]
        inner = inner[inner != 0]
        if inner.size == 0:
            continue
        if inner[0] < 0:
            a, b = b, a
        fa, fb = fsign[a], fsign[b]
        kinds.append("hyperbolic" if fa < 0 < fb else "elliptic" if fa > 0 > fb else "parabolic")
    h = kinds.count("hyperbolic")
    if "elliptic" in kinds or not kinds:
        return "other-degenerate"
    if h == 0:
        return "node"
    if h == len(kinds) and h == 2:
        return "saddle"
    if h == 1:
        return "saddle-node"
    return "other-degenerate"


def _label(sector: str, multiplicity: int) -> tuple[str, str]:
    if sector == "node":
        if multiplicity == 1:
            return "node", ""
        if multiplicity == 3:
            return "triple-node", ""
    elif sector == "saddle" and multiplicity == 1:
        return "saddle", ""
    elif sector == "saddle-node" and multiplicity == 2:
        return "saddle-node", ""
    return "other-degenerate", f"{sector} sectors with root multiplicity {multiplicity}"


def classify_infinite(p: ModelParams, s: InfiniteSingularity) -> InfiniteSingularity:
    """Fill in the type of an infinite singularity.

    Hyperbolic points are labelled from the chart Jacobian; otherwise the
    sectors found on half-circles of radius 1e-3 and 1e-4 decide (both radii
    must agree).
    """
    f, ds, dz = chart_field(p, s.chart)
    c = s.coordinate
    P2 = np.polynomial.polynomial
    fs_s = P2.polyval2d(c, 0.0, P2.polyder(ds, axis=0))
    fz_z = P2.polyval2d(c, 0.0, P2.polyder(dz, axis=1))
    size = max(1.0, abs(fs_s), abs(fz_z))
    if s.multiplicity == 1 and abs(fs_s) > 1e-9 * size and abs(fz_z) > 1e-9 * size:
        kind = "node" if fs_s * fz_z > 0 else "saddle"
        return replace(s, type=kind, type_lower=kind)
    upper = [_pattern(f, c, r, lower=False) for r in SAMPLE_RADII]
    lower = [_pattern(f, c, r, lower=True) for r in SAMPLE_RADII]
    if upper[0] != upper[1]:
        raise UnclassifiableError(f"sector sampling disagrees across radii at {s.chart}={c}: {upper}")
    kind, note = _label(upper[0], s.multiplicity)
    low_kind = _label(lower[0], s.multiplicity)[0] if lower[0] == lower[1] else "unclassifiable"
    return replace(s, type=kind, type_lower=low_kind, note=note)
