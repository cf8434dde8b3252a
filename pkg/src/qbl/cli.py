"""Command-line interface: ``qbl <command> [parameter flags] [options]``.

Parameters come from ``--alpha/--beta/--delta/--lambda/--mu/--gamma`` or a
``key = value`` config file given with ``--config``; flags win over the file.

Exit codes: 0 all verifications passed, 1 usage or configuration error,
2 verification failure, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import sys
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import fixtures
from .bifurcation import (
    HarnessBreach,
    StepPolicy,
    _triple,
    continue_cycle,
    hopf_detect,
    homoclinic_scan,
    run_scenario,
    standard_sections,
    survey_cycles,
)
from .compactification import InfiniteSingularity, UnclassifiableError, infinite_census
from .dynamics import (
    DEFAULT_OPTIONS,
    IntegrationError,
    IntegratorOptions,
    LimitCycle,
    NoReturnError,
    Section,
    find_cycles,
    separatrices,
)
from .equilibria import (
    Census,
    Equilibrium,
    RootFindingError,
    first_quadrant_triple,
    full_census,
    verify_configuration,
)
from .model import ModelParams, PhasePoint, ellipse_residual, eval_rotated_field, predator_isocline, prey_isocline

SCHEMA = "qbl/1"
COMMANDS = ("equilibria", "infinity", "portrait", "cycles", "hopf", "continue", "scenario", "verify", "sweep")
BRANCH_HEADER = ["parameter", "s_star", "period", "derivative", "stability"]
PARAM_KEYS = {"alpha": "alpha", "beta": "beta", "delta": "delta", "lambda": "lam", "lam": "lam", "mu": "mu",
              "gamma": "gamma"}

EXIT_OK, EXIT_USAGE, EXIT_VERIFY, EXIT_NUMERIC = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------- run config


@dataclass
class SweepSpec:
    parameter: str = "gamma"
    lo: float = -1.0
    hi: float = 0.0
    samples: int = 21

    def __post_init__(self):
        if self.parameter not in ("alpha", "beta", "gamma"):
            raise ConfigError(f"sweep parameter must be alpha, beta or gamma, got {self.parameter!r}")
        if not self.hi > self.lo:
            raise ConfigError("sweep range is empty")
        if self.samples < 2:
            raise ConfigError("a sweep needs at least 2 samples")

    def values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.samples)


@dataclass
class RunConfig:
    params: ModelParams
    command: str
    window: tuple[tuple[float, float], tuple[float, float]] | None = None
    output: Path | None = None
    csv_output: Path | None = None
    fmt: str = "json"
    sweep: SweepSpec | None = None
    rtol: float = DEFAULT_OPTIONS.rtol
    atol: float = DEFAULT_OPTIONS.atol
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        for name in ("rtol", "atol"):
            v = getattr(self, name)
            if not 1e-14 <= v <= 1e-2:
                raise ConfigError(f"{name} must lie in [1e-14, 1e-2], got {v}")
        if self.window is not None:
            (x0, x1), (y0, y1) = self.window
            if not (x1 > x0 and y1 > y0):
                raise ConfigError("plot window is empty")
        if self.fmt not in ("json", "csv"):
            raise ConfigError(f"format must be json or csv, got {self.fmt!r}")

    @property
    def options(self) -> IntegratorOptions:
        return replace(DEFAULT_OPTIONS, rtol=self.rtol, atol=self.atol)


def read_config_file(path: str | Path) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment."""
    text = Path(path).read_text(encoding="utf-8")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    try:
        cp.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file {path}: {exc}") from exc
    return dict(cp["run"])


def _float(v, name):
    try:
        return float(v)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number, got {v!r}") from None


def params_from(values: dict) -> ModelParams:
    kw = {}
    for k, v in values.items():
        if k in PARAM_KEYS and v is not None:
            kw[PARAM_KEYS[k]] = _float(v, k)
    strict = str(values.get("strict", "true")).lower() not in ("false", "0", "no")
    try:
        return ModelParams(**kw, strict=strict)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------- census documents


def _eq_dict(e: Equilibrium) -> dict:
    return {
        "x": e.location.x,
        "y": e.location.y,
        "classification": e.classification,
        "index": e.index,
        "contour_index": e.contour_index,
        "eigenvalues": [[complex(z).real, complex(z).imag] for z in e.eigenvalues],
        "residual": e.residual,
    }


def _inf_dict(s: InfiniteSingularity) -> dict:
    return {"chart": s.chart, "coordinate": s.coordinate, "type": s.type, "multiplicity": s.multiplicity,
            "type_lower": s.type_lower, "note": s.note}


CSV_CENSUS_HEADER = ["kind", "x", "y", "classification", "index", "contour_index", "eig1_re", "eig1_im",
                     "eig2_re", "eig2_im", "residual", "chart", "coordinate", "type", "multiplicity",
                     "type_lower", "note"]


def emit_census(c: Census, fmt: str = "json") -> str:
    """Serialise a census; finite points sorted by (x, y), infinite by (chart, coordinate)."""
    report = verify_configuration(c)
    finite = sorted(c.finite, key=lambda e: (e.location.x, e.location.y))
    infinite = sorted(c.infinite, key=lambda s: (s.chart, s.coordinate))
    if fmt == "json":
        doc = {
            "schema": SCHEMA,
            "params": c.params.as_dict(),
            "strict": c.params.strict,
            "index_identity": report.index_identity,
            "finite": [_eq_dict(e) for e in finite],
            "infinite": [_inf_dict(s) for s in infinite],
        }
        return json.dumps(doc, indent=2) + "\n"
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    buf = io.StringIO()
    pd = c.params.as_dict()
    buf.write(f"# schema={SCHEMA} index_identity={report.index_identity} strict={c.params.strict} "
              + " ".join(f"{k}={v!r}" for k, v in pd.items()) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_CENSUS_HEADER)
    for e in finite:
        (a, b), (cc, d) = ((complex(z).real, complex(z).imag) for z in e.eigenvalues)
        w.writerow(["finite", repr(e.location.x), repr(e.location.y), e.classification, e.index,
                    "" if e.contour_index is None else e.contour_index, repr(a), repr(b), repr(cc), repr(d),
                    repr(e.residual), "", "", "", "", "", ""])
    for s in infinite:
        w.writerow(["infinite"] + [""] * 10 + [s.chart, repr(s.coordinate), s.type, s.multiplicity,
                                               s.type_lower, s.note])
    return buf.getvalue()


def parse_census(text: str) -> Census:
    """Inverse of :func:`emit_census` for either format."""
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        if doc.get("schema") != SCHEMA:
            raise ValueError(f"unsupported schema {doc.get('schema')!r}")
        p = ModelParams(**doc["params"], strict=doc.get("strict", True))
        finite = [Equilibrium(PhasePoint(d["x"], d["y"]), tuple(complex(*z) for z in d["eigenvalues"]),
                              d["classification"], d["index"], d["residual"], d["contour_index"])
                  for d in doc["finite"]]
        infinite = [InfiniteSingularity(**d) for d in doc["infinite"]]
        return Census(p, finite, infinite)
    lines = text.splitlines()
    meta = dict(kv.split("=", 1) for kv in lines[0].lstrip("# ").split())
    if meta.get("schema") != SCHEMA:
        raise ValueError(f"unsupported schema {meta.get('schema')!r}")
    p = ModelParams(**{k: float(meta[k]) for k in ("alpha", "beta", "delta", "lam", "mu", "gamma")},
                    strict=meta.get("strict") == "True")
    finite, infinite = [], []
    for row in csv.DictReader(lines[1:]):
        if row["kind"] == "finite":
            eig = (complex(float(row["eig1_re"]), float(row["eig1_im"])),
                   complex(float(row["eig2_re"]), float(row["eig2_im"])))
            ci = int(row["contour_index"]) if row["contour_index"] else None
            finite.append(Equilibrium(PhasePoint(float(row["x"]), float(row["y"])), eig, row["classification"],
                                      int(row["index"]), float(row["residual"]), ci))
        else:
            infinite.append(InfiniteSingularity(row["chart"], float(row["coordinate"]), row["type"],
                                                int(row["multiplicity"]), row["type_lower"], row["note"]))
    return Census(p, finite, infinite)


# ---------------------------------------------------------------- branch tables


def cycle_rows(rows: Sequence[tuple[float, LimitCycle]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BRANCH_HEADER)
    for v, c in rows:
        w.writerow([repr(float(v)), repr(c.s_star), repr(c.period), repr(c.derivative), c.stability])
    return buf.getvalue()


def _cycle_dict(c: LimitCycle, **extra) -> dict:
    return {"s_star": c.s_star, "period": c.period, "derivative": c.derivative, "multiplier": c.multiplier,
            "stability": c.stability, "residual": c.residual,
            "section": {"anchor": list(c.section.anchor), "direction": list(c.section.direction),
                        "length": c.section.length}, **extra}


# ---------------------------------------------------------------- portrait


def _g(v: float) -> str:
    return f"{v:.6g}"


def default_window(p: ModelParams) -> tuple[tuple[float, float], tuple[float, float]]:
    x_a2 = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            pts = first_quadrant_triple(p)
        except RootFindingError:
            pts = []
    if pts:
        x_a2 = max(e.location.x for e in pts)
    x_hi = 1.5 * max(1.0 / p.lam, x_a2)
    y_lo = -1.5 * p.delta / p.mu if p.mu > 0 else -1.5 * p.delta
    return (-0.5, x_hi), (y_lo, 2.0)


MARKERS = {
    "saddle": ("#c0392b", "square"),
    "stable-node": ("#1f618d", "circle"),
    "unstable-node": ("#f39c12", "circle"),
    "stable-focus": ("#1f618d", "diamond"),
    "unstable-focus": ("#f39c12", "diamond"),
    "center-or-weak-focus": ("#7d3c98", "diamond"),
    "saddle-node": ("#16a085", "triangle"),
    "degenerate": ("#000000", "triangle"),
}


def render_portrait(p: ModelParams, config: RunConfig | None = None, cycles: Sequence[LimitCycle] = (),
                    size: int = 600, grid: int = 21, t_sep: float = 60.0) -> str:
    """SVG 1.1 phase portrait of the rotated field.

    Layers, in order: direction glyphs, prey and predator isoclines, the
    rotation ellipse ``E = 0``, saddle separatrices, the given cycles and
    equilibrium markers. Numbers carry 6 significant digits.
    """
    window = config.window if config is not None and config.window is not None else default_window(p)
    options = config.options if config is not None else DEFAULT_OPTIONS
    (x0, x1), (y0, y1) = window
    sx = size / (x1 - x0)
    sy = size / (y1 - y0)

    def X(x):
        return (x - x0) * sx

    def Y(y):
        return size - (y - y0) * sy

    def polyline(xs, ys):
        """Split into runs that stay finite and inside a padded window."""
        runs, cur = [], []
        pad_x, pad_y = 0.5 * (x1 - x0), 0.5 * (y1 - y0)
        for x, y in zip(xs, ys):
            if np.isfinite(x) and np.isfinite(y) and x0 - pad_x <= x <= x1 + pad_x and y0 - pad_y <= y <= y1 + pad_y:
                cur.append(f"{_g(X(x))},{_g(Y(y))}")
            elif cur:
                runs.append(cur)
                cur = []
        if cur:
            runs.append(cur)
        return [" ".join(r) for r in runs if len(r) > 1]

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f"<desc>{json.dumps(p.as_dict(), sort_keys=True)}</desc>",
        '<defs><clipPath id="frame"><rect x="0" y="0" width="%d" height="%d"/></clipPath></defs>' % (size, size),
        '<rect x="0" y="0" width="%d" height="%d" fill="white" stroke="black"/>' % (size, size),
        '<g clip-path="url(#frame)">',
    ]
    # axes
    out.append('<g class="axes" stroke="#999" stroke-width="0.5">')
    if x0 < 0 < x1:
        out.append(f'<line x1="{_g(X(0))}" y1="0" x2="{_g(X(0))}" y2="{size}"/>')
    if y0 < 0 < y1:
        out.append(f'<line x1="0" y1="{_g(Y(0))}" x2="{size}" y2="{_g(Y(0))}"/>')
    out.append("</g>")
    # direction field
    out.append('<g class="direction-field" stroke="#bbb" stroke-width="0.8">')
    gx = np.linspace(x0, x1, grid + 2)[1:-1]
    gy = np.linspace(y0, y1, grid + 2)[1:-1]
    glyph = 0.35 * size / (grid + 1)
    for yv in gy:
        for xv in gx:
            u, v = eval_rotated_field(p, (xv, yv))
            u, v = u * sx, -v * sy
            n = math.hypot(u, v)
            if not np.isfinite(n) or n == 0:
                continue
            cx, cy = X(xv), Y(yv)
            dx, dy = glyph * u / n, glyph * v / n
            out.append(f'<line x1="{_g(cx - dx)}" y1="{_g(cy - dy)}" x2="{_g(cx + dx)}" y2="{_g(cy + dy)}"/>')
    out.append("</g>")
    # isoclines and ellipse
    xs = np.linspace(x0, x1, 400)
    curves = [("prey-isocline", "#27ae60", xs, prey_isocline(p, xs))]
    if p.mu > 0:
        curves.append(("predator-isocline", "#8e44ad", xs, predator_isocline(p, xs)))
    for cls, color, cx_, cy_ in curves:
        for pts in polyline(cx_, cy_):
            out.append(f'<polyline class="{cls}" fill="none" stroke="{color}" stroke-width="1.2" points="{pts}"/>')
    # E = 0: y (delta + mu y) = x (1 - lam x), solved for y
    rhs = xs * (1.0 - p.lam * xs)
    if p.mu > 0:
        disc = p.delta ** 2 + 4.0 * p.mu * rhs
        with np.errstate(invalid="ignore"):
            root = np.where(disc >= 0, np.sqrt(np.where(disc >= 0, disc, 0.0)), np.nan)
        branches = [(-p.delta + root) / (2 * p.mu), (-p.delta - root) / (2 * p.mu)]
    else:
        branches = [rhs / p.delta]
    for yb in branches:
        for pts in polyline(xs, yb):
            out.append(f'<polyline class="ellipse" fill="none" stroke="#e67e22" stroke-dasharray="4,3" '
                       f'stroke-width="1" points="{pts}"/>')
    # separatrices
    census = full_census(p, with_contours=False)
    out.append('<g class="separatrices" fill="none" stroke-width="1">')
    for s in census.saddles():
        try:
            branches_ = separatrices(p, s, True, t_sep, options)
        except (IntegrationError, ValueError):
            continue
        for name in sorted(branches_):
            o = branches_[name]
            color = "#c0392b" if name.startswith("unstable") else "#2471a3"
            for pts in polyline(o.x, o.y):
                out.append(f'<polyline class="separatrix {name}" stroke="{color}" points="{pts}"/>')
    out.append("</g>")
    # cycles
    for k, c in enumerate(cycles):
        pts = c.loop
        d = "M " + " L ".join(f"{_g(X(x))},{_g(Y(y))}" for x, y in pts[:-1]) + " Z"
        out.append(f'<path class="cycle {c.stability}" id="cycle{k}" fill="none" stroke="black" '
                   f'stroke-width="1.6" d="{d}"/>')
    # equilibria
    out.append('<g class="equilibria">')
    for e in census.finite:
        color, shape = MARKERS.get(e.classification, ("#000000", "circle"))
        cx, cy = X(e.location.x), Y(e.location.y)
        title = f"<title>{e.classification} ({_g(e.location.x)}, {_g(e.location.y)})</title>"
        if shape == "circle":
            out.append(f'<circle class="{e.classification}" cx="{_g(cx)}" cy="{_g(cy)}" r="4" fill="{color}">'
                       f"{title}</circle>")
        elif shape == "square":
            out.append(f'<rect class="{e.classification}" x="{_g(cx - 4)}" y="{_g(cy - 4)}" width="8" height="8" '
                       f'fill="{color}">{title}</rect>')
        else:
            if shape == "diamond":
                verts = [(cx, cy - 5), (cx + 5, cy), (cx, cy + 5), (cx - 5, cy)]
            else:
                verts = [(cx, cy - 5), (cx + 5, cy + 4), (cx - 5, cy + 4)]
            pts = " ".join(f"{_g(a)},{_g(b)}" for a, b in verts)
            out.append(f'<polygon class="{e.classification}" points="{pts}" fill="{color}">{title}</polygon>')
    out.append("</g>")
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------- sweep


def run_sweep(config: RunConfig) -> tuple[dict, str, int]:
    """Cycle counts and events along a one-parameter sweep.

    Returns ``(report, csv_table, exit_code)``; the exit code is 2 when an
    index identity check failed at some sample, 3 when a sample raised a
    numerical error, 0 otherwise. Per-sample errors are recorded, not raised.
    """
    spec = config.sweep or SweepSpec()
    options = config.options
    samples, rows = [], []
    verify_failed = numeric_failed = False
    reach = float(config.extra.get("reach", 3.0))
    for v in spec.values():
        entry: dict = {"value": float(v)}
        try:
            p = config.params.with_(**{spec.parameter: float(v)})
            report = verify_configuration(full_census(p))
            entry["index_identity"] = report.index_identity
            if report.index_identity == "FAIL":
                verify_failed = True
            found = survey_cycles(p, reach=reach, n=int(config.extra.get("scan_points", 120)), options=options)
            entry["cycles"] = [_cycle_dict(c, section=label, encloses=enc) for label, c, enc in found]
            entry["count"] = len(found)
            rows += [(float(v), c) for _, c, _ in found]
        except (RootFindingError, IntegrationError, NoReturnError, UnclassifiableError) as exc:
            entry["error"] = f"{type(exc).__name__}: {exc}"
            numeric_failed = True
        except ValueError as exc:
            entry["error"] = f"{type(exc).__name__}: {exc}"
        samples.append(entry)
    events = []
    base = config.params
    triple = _triple(base) if spec.parameter == "gamma" else None
    try:
        if spec.parameter == "gamma":
            if triple is not None:
                antis = (triple[0], triple[2])
                saddle = triple[1]
            else:
                c = full_census(base, with_contours=False)
                antis = tuple(e for e in c.antisaddles() if e.location.x > 0 and e.location.y > 0)
                saddle = None
            for e in antis:
                events += [ev.as_dict() for ev in hopf_detect(base, e, "gamma", (spec.lo, spec.hi))]
            if saddle is not None:
                events += [ev.as_dict() for ev in homoclinic_scan(base, saddle, "gamma", (spec.lo, spec.hi),
                                                                  options=options, antisaddles=antis)]
    except (RootFindingError, IntegrationError) as exc:
        events.append({"kind": "error", "message": str(exc)})
        numeric_failed = True
    events.sort(key=lambda e: e.get("value", math.inf))
    counts = [s["count"] for s in samples if "count" in s]
    report = {
        "schema": SCHEMA,
        "params": base.as_dict(),
        "sweep": {"parameter": spec.parameter, "lo": spec.lo, "hi": spec.hi, "samples": spec.samples},
        "samples": samples,
        "events": events,
        "max_cycles": max(counts) if counts else 0,
    }
    code = EXIT_VERIFY if verify_failed else EXIT_NUMERIC if numeric_failed else EXIT_OK
    return report, cycle_rows(rows), code


# ---------------------------------------------------------------- argument handling


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="qbl", description="Bifurcation toolkit for a quartic predator-prey family.")
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("parameters")
    for name in ("alpha", "beta", "delta", "lambda", "mu", "gamma"):
        g.add_argument(f"--{name}", type=float, default=None)
    g.add_argument("--loose", action="store_true", help="waive the beta >= -2 sqrt(alpha) check")
    common.add_argument("--config", help="file of 'key = value' lines")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--rtol", type=float, default=None)
    common.add_argument("--atol", type=float, default=None)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("equilibria", parents=[common], help="finite and infinite singular points")
    sub.add_parser("infinity", parents=[common], help="singular points at infinity")
    sp = sub.add_parser("portrait", parents=[common], help="SVG phase portrait")
    sp.add_argument("--window", type=float, nargs=4, metavar=("X0", "X1", "Y0", "Y1"))
    sp.add_argument("--cycles", action="store_true", help="locate and draw limit cycles")
    sp = sub.add_parser("cycles", parents=[common], help="limit cycles on a section")
    sp.add_argument("--anchor", default="auto", help="A1, A2, S, 'x,y' or auto (all standard sections)")
    sp.add_argument("--direction", type=float, nargs=2, default=None)
    sp.add_argument("--length", type=float, default=None)
    sp.add_argument("--points", type=int, default=200)
    sp = sub.add_parser("hopf", parents=[common], help="Hopf points along a parameter")
    sp.add_argument("--parameter", choices=("alpha", "beta", "gamma"), default="gamma")
    sp.add_argument("--range", type=float, nargs=2, default=(-2.0, 2.0))
    sp = sub.add_parser("continue", parents=[common], help="continue a cycle in a parameter")
    sp.add_argument("--parameter", choices=("alpha", "beta", "gamma"), default="gamma")
    sp.add_argument("--anchor", default="A1")
    sp.add_argument("--which", type=int, default=0, help="index of the cycle on the section")
    sp.add_argument("--step", type=float, default=1e-4)
    sp.add_argument("--bound", type=float, required=True)
    sp = sub.add_parser("scenario", parents=[common], help="staged scenario from the fixtures file")
    sp.add_argument("--fixtures", default=None, help="fixtures JSON (default: bundled)")
    sp.add_argument("--no-harness", action="store_true")
    sub.add_parser("verify", parents=[common], help="index identity, alternation and convexity checks")
    sp = sub.add_parser("sweep", parents=[common], help="cycle counts and events along a parameter")
    sp.add_argument("--parameter", choices=("alpha", "beta", "gamma"), default="gamma")
    sp.add_argument("--range", type=float, nargs=2, required=True)
    sp.add_argument("--samples", type=int, default=21)
    sp.add_argument("--csv-out", help="branch table path")
    return ap


def config_from_args(args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if args.config:
        try:
            values.update(read_config_file(args.config))
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
    for name in ("alpha", "beta", "delta", "lambda", "mu", "gamma"):
        v = getattr(args, name)
        if v is not None:
            values[name] = v
    if args.loose:
        values["strict"] = "false"
    p = params_from(values)
    rtol = args.rtol if args.rtol is not None else _float(values.get("rtol", DEFAULT_OPTIONS.rtol), "rtol")
    atol = args.atol if args.atol is not None else _float(values.get("atol", DEFAULT_OPTIONS.atol), "atol")
    window = None
    if getattr(args, "window", None):
        x0, x1, y0, y1 = args.window
        window = ((x0, x1), (y0, y1))
    sweep = None
    if args.command == "sweep":
        sweep = SweepSpec(args.parameter, args.range[0], args.range[1], args.samples)
    return RunConfig(p, args.command, window, Path(args.out) if args.out else None,
                     Path(args.csv_out) if getattr(args, "csv_out", None) else None, args.format, sweep,
                     rtol, atol, {k: v for k, v in values.items() if k not in PARAM_KEYS})


def _write(text: str, path: Path | None):
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text, encoding="utf-8")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, default=_default) + "\n"


def _default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"not serialisable: {type(o).__name__}")


def _section_for(p: ModelParams, anchor: str, direction, length) -> list[tuple[str, Section]]:
    if anchor == "auto":
        return standard_sections(p)
    std = dict(standard_sections(p))
    if anchor in std and direction is None and length is None:
        return [(anchor, std[anchor])]
    if anchor in std:
        pt = std[anchor].anchor
    else:
        try:
            pt = tuple(float(t) for t in anchor.split(","))
        except ValueError:
            raise ConfigError(f"bad anchor {anchor!r}") from None
        if len(pt) != 2:
            raise ConfigError(f"bad anchor {anchor!r}")
    d = direction or (1.0, 0.0)
    L = length or 3.0 * (1.0 + math.hypot(*pt))
    return [(anchor, Section(pt, tuple(d), L))]


def execute(cfg: RunConfig, args: argparse.Namespace) -> int:
    p = cfg.params
    cmd = cfg.command
    if cmd in ("equilibria", "verify"):
        census = full_census(p)
        report = verify_configuration(census)
        if cmd == "equilibria":
            _write(emit_census(census, cfg.fmt), cfg.output)
        else:
            _write(_dump({"schema": SCHEMA, "params": p.as_dict(), "index_identity": report.index_identity,
                          "alternation": report.alternation, "berlinskii": report.berlinskii,
                          "details": report.details}), cfg.output)
        return EXIT_OK if report.ok else EXIT_VERIFY
    if cmd == "infinity":
        pts = infinite_census(p)
        if cfg.fmt == "csv":
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(["chart", "coordinate", "type", "multiplicity", "type_lower", "note"])
            for s in pts:
                w.writerow([s.chart, repr(s.coordinate), s.type, s.multiplicity, s.type_lower, s.note])
            _write(buf.getvalue(), cfg.output)
        else:
            _write(_dump({"schema": SCHEMA, "params": p.as_dict(), "infinite": [_inf_dict(s) for s in pts]}),
                   cfg.output)
        return EXIT_OK
    if cmd == "portrait":
        cycles = [c for _, c, _ in survey_cycles(p, options=cfg.options)] if args.cycles else []
        _write(render_portrait(p, cfg, cycles), cfg.output)
        return EXIT_OK
    if cmd == "cycles":
        found = []
        for label, sec in _section_for(p, args.anchor, args.direction, args.length):
            found += [(label, c) for c in find_cycles(p, sec, True, cfg.options, n=args.points)]
        if cfg.fmt == "csv":
            _write(cycle_rows([(p.gamma, c) for _, c in found]), cfg.output)
        else:
            _write(_dump({"schema": SCHEMA, "params": p.as_dict(),
                          "cycles": [_cycle_dict(c, section_label=lab) for lab, c in found]}), cfg.output)
        return EXIT_OK
    if cmd == "hopf":
        census = full_census(p, with_contours=False)
        events = []
        for e in census.antisaddles():
            events += hopf_detect(p, e, args.parameter, tuple(args.range))
        _write(_dump({"schema": SCHEMA, "params": p.as_dict(),
                      "events": sorted((ev.as_dict() for ev in events), key=lambda d: d["value"])}), cfg.output)
        return EXIT_OK
    if cmd == "continue":
        secs = _section_for(p, args.anchor, None, None)
        cycles = find_cycles(p, secs[0][1], True, cfg.options)
        if not 0 <= args.which < len(cycles):
            sys.stderr.write(f"qbl: {len(cycles)} cycle(s) on section {args.anchor}\n")
            return EXIT_NUMERIC
        start = getattr(p, args.parameter)
        branch = continue_cycle(p, cycles[args.which], args.parameter,
                                StepPolicy(step=args.step, bound=args.bound), options=cfg.options)
        if cfg.fmt == "csv":
            _write(cycle_rows(branch.samples), cfg.output)
        else:
            _write(_dump({"schema": SCHEMA, "params": p.as_dict(), "parameter": args.parameter, "start": start,
                          "termination": branch.termination, "diagnostics": branch.diagnostics,
                          "samples": [_cycle_dict(c, parameter=v) for v, c in branch.samples]}), cfg.output)
        return EXIT_OK
    if cmd == "scenario":
        data = fixtures.load(args.fixtures)
        try:
            log = run_scenario(data["scenario"], cfg.options, harness=not args.no_harness)
        except HarnessBreach as exc:
            _write(_dump({"schema": SCHEMA, "breach": {"message": str(exc), "params": exc.params}}), cfg.output)
            return EXIT_VERIFY
        _write(_dump({"schema": SCHEMA, **log}), cfg.output)
        return EXIT_OK
    if cmd == "sweep":
        report, table, code = run_sweep(cfg)
        if cfg.fmt == "csv" and cfg.csv_output is None:
            _write(table, cfg.output)
        else:
            _write(_dump(report), cfg.output)
            if cfg.csv_output is not None:
                cfg.csv_output.write_text(table, encoding="utf-8")
        return code
    raise ConfigError(f"unhandled command {cmd}")


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
    except ConfigError as exc:
        sys.stderr.write(f"qbl: {exc}\n")
        return EXIT_USAGE
    try:
        return execute(cfg, args)
    except ConfigError as exc:
        sys.stderr.write(f"qbl: {exc}\n")
        return EXIT_USAGE
    except (RootFindingError, IntegrationError, NoReturnError, UnclassifiableError, ArithmeticError) as exc:
        sys.stderr.write(f"qbl: numerical failure: {type(exc).__name__}: {exc}\n")
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
