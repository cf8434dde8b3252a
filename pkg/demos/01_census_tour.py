"""Finite and infinite singular points through the three stages.

Start from the quadratic predator-prey field, switch on beta < 0 (cubic),
then alpha > 0 (quartic), and watch the census and the index identity.

    python3 demos/01_census_tour.py
"""
from qbl.equilibria import full_census, verify_configuration
from qbl.model import ModelParams

STAGES = {
    "quadratic": ModelParams(0.0, 0.0, 0.2, 0.3, 1.5),
    "cubic": ModelParams(0.0, -0.4, 0.2, 0.3, 1.5, strict=False),
    "quartic": ModelParams(0.5, -0.5, 0.2, 0.3, 1.0),
}

for name, p in STAGES.items():
    c = full_census(p)
    r = verify_configuration(c)
    print(f"\n== {name}: {p.as_dict()}")
    for e in c.finite:
        print(f"  finite   ({e.location.x:9.5f}, {e.location.y:9.5f})  {e.classification:<22} "
              f"index {e.index:+d}  contour {e.contour_index}")
    for s in c.infinite:
        print(f"  infinite {s.chart}={s.coordinate:<9.5g} {s.type:<16} multiplicity {s.multiplicity}")
    print(f"  index identity {r.index_identity}, alternation {r.alternation}, convex-hull check {r.berlinskii}")

# the rotated field keeps every finite singular point in place
p = STAGES["quartic"]
same = [e.location for e in full_census(p, False).finite] == [e.location for e in full_census(p.with_(gamma=-0.7), False).finite]
print(f"\nfinite points unchanged under rotation gamma=-0.7: {same}")
