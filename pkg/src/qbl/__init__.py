"""Bifurcation toolkit for the quartic predator-prey family and its rotated
companion: singular points (finite and at infinity), return-map limit
cycles, Hopf/fold/separatrix-loop events and a cycle-count harness."""
from .model import (
    FieldValue,
    Jacobian2,
    ModelParams,
    PhasePoint,
    divergence,
    ellipse_residual,
    eval_field,
    eval_jacobian,
    eval_rotated_field,
    predator_isocline,
    prey_isocline,
    response,
    rotation_determinants,
)
from .equilibria import (
    Census,
    Equilibrium,
    axis_equilibria,
    contour_index,
    full_census,
    interior_equilibria,
    verify_configuration,
)
from .compactification import InfiniteSingularity, classify_infinite, infinite_census
from .dynamics import (
    IntegratorOptions,
    LimitCycle,
    Orbit,
    Section,
    cycle_stability,
    find_cycles,
    integrate,
    return_map,
    separatrices,
)
from .bifurcation import (
    BifurcationEvent,
    CycleBranch,
    StepPolicy,
    continue_cycle,
    detect_fold,
    homoclinic_scan,
    hopf_detect,
    run_scenario,
)

__version__ = "0.1.0"
