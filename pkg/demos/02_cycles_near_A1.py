"""Life and death of the cycles around the focus A1.

Along the rotation parameter gamma the focus A1 loses stability in a
subcritical Hopf bifurcation. The unstable cycle born there sits inside a
stable cycle; both meet in a fold of cycles on one side, and the outer one
grows into a separatrix loop of the saddle S on the other.

    python3 demos/02_cycles_near_A1.py [portrait.svg]
"""
import sys

from qbl import fixtures
from qbl.bifurcation import (StepPolicy, continue_cycle, detect_fold, homoclinic_scan, hopf_criticality,
                             hopf_detect, standard_sections)
from qbl.cli import render_portrait
from qbl.dynamics import find_cycles
from qbl.equilibria import first_quadrant_triple

p = fixtures.params("nested_pair")
a1, s, a2 = first_quadrant_triple(p)
print(f"A1 = {tuple(a1.location)}, S = {tuple(s.location)}, A2 = {tuple(a2.location)}")

hopf = hopf_detect(p, a1, "gamma", (-1.0, 0.0))[0]
kind, c3 = hopf_criticality(p.with_(gamma=hopf.value), a1.location)
print(f"Hopf at gamma* = {hopf.value:.12f} ({kind}, cubic coefficient {c3:.3g})")

sec = dict(standard_sections(p))["A1"]
pair = find_cycles(p, sec)
for c in pair:
    print(f"gamma = {p.gamma}: {c.stability:9s} cycle s* = {c.s_star:.6f}, period {c.period:.3f}, "
          f"derivative {c.derivative:.4f}")

legs = [continue_cycle(p, c, "gamma", StepPolicy(1e-4, -0.48), (s,)) for c in pair]
fold = detect_fold(*legs, p=p)
print(f"fold of cycles at gamma = {fold.value:.12f}, semi-stable s* = {fold.subject.s_star:.6f}")

outer = continue_cycle(p, pair[1], "gamma", StepPolicy(-1e-4, -0.51), (s,))
print(f"outer cycle continued down to gamma = {outer.last[0]:.9f} ({outer.termination}), "
      f"period {outer.diagnostics['final_period']:.1f}")
loops = homoclinic_scan(p, s, "gamma", (-0.507, -0.504), 7, (a1, a2))
for e in loops:
    print(f"{e.kind} at gamma = {e.value:.12f} enclosing {e.diagnostics['encloses']}")

if len(sys.argv) > 1:
    with open(sys.argv[1], "w", encoding="utf-8") as fh:
        fh.write(render_portrait(p, cycles=pair))
    print(f"portrait written to {sys.argv[1]}")
