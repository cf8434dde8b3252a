import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from qbl.bifurcation import standard_sections
from qbl.dynamics import (
    DEFAULT_OPTIONS,
    IntegrationError,
    NoReturnError,
    NotASaddleError,
    Section,
    cycle_stability,
    find_cycles,
    integrate,
    loop_index,
    return_map,
    separatrices,
    stability_label,
)
from qbl.equilibria import Equilibrium, _make, interior_equilibria
from qbl.model import ModelParams

QUARTIC = ModelParams(0.5, -0.5, 0.2, 0.3, 1.0)


@pytest.fixture(scope="module")
def pair(regime):
    p = regime("nested_pair")
    sec = dict(standard_sections(p))["A1"]
    return p, sec, find_cycles(p, sec)


class TestIntegrate:
    @given(st.floats(0.05, 4.0), st.floats(-1.0, 1.0))
    @settings(max_examples=15)
    def test_x_axis_invariant(self, x0, gamma):
        o = integrate(QUARTIC.with_(gamma=gamma), (x0, 0.0), 30.0, rotated=False)
        assert np.max(np.abs(o.y)) <= 1e-8

    def test_y_axis_invariant(self):
        o = integrate(QUARTIC, (0.0, 2.0), 30.0, rotated=False)
        assert np.max(np.abs(o.x)) <= 1e-8

    def test_times_increase_and_reverse(self):
        fwd = integrate(QUARTIC, (1.5, 0.5), 10.0)
        assert np.all(np.diff(fwd.t) > 0)
        back = integrate(QUARTIC, fwd.end, -10.0)
        assert np.all(np.diff(back.t) < 0)
        # the backward run amplifies the forward error by exp(div integral)
        amp = math.exp(abs(back.div_integral))
        assert np.hypot(back.end.x - 1.5, back.end.y - 0.5) < 1e-9 * amp

    def test_one_dimensional_reduction(self):
        p = QUARTIC
        o = integrate(p, (0.2, 0.0), 20.0, rotated=False)
        assert o.t[-1] == pytest.approx(20.0)

        def f(t, x):
            return x * (1 - p.lam * x) * (p.alpha * x * x + p.beta * x + 1)

        ref = solve_ivp(f, (0, 20), [0.2], method="DOP853", rtol=1e-13, atol=1e-15, dense_output=True)
        assert np.max(np.abs(ref.sol(o.t)[0] - o.x)) <= 1e-8

    def test_equilibrium_capture(self):
        o = integrate(QUARTIC, (2.0, 0.8), 50.0)
        assert o.terminal_reason == "equilibrium-capture" and len(o.t) <= 2

    def test_blow_up(self):
        o = integrate(ModelParams(0.5, -0.5, 0.2, 0.3, 1.0, 2.0), (5.0, 5.0), -100.0)
        assert o.terminal_reason in ("blow-up", "time-limit")

    def test_tolerance_convergence(self):
        start, T = (1.5, 0.5), 20.0
        ref = integrate(QUARTIC, start, T, options=replace(DEFAULT_OPTIONS, rtol=1e-13, atol=1e-14)).end
        errs = []
        for rtol in (1e-7, 5e-8):
            e = integrate(QUARTIC, start, T, options=replace(DEFAULT_OPTIONS, rtol=rtol, atol=rtol * 1e-2)).end
            errs.append(math.hypot(e.x - ref.x, e.y - ref.y))
        # the global error scales with the tolerance, so halving it must not
        # leave the error above ten times the proportional prediction
        assert errs[1] <= 10 * errs[0] / 2

    def test_step_budget(self):
        with pytest.raises(IntegrationError):
            integrate(QUARTIC, (1.5, 0.5), 1e3, options=replace(DEFAULT_OPTIONS, max_steps=10))


class TestSeparatrices:
    def test_origin_on_axes(self):
        br = separatrices(QUARTIC, _make(QUARTIC, 0.0, 0.0), rotated=False, t_span=30.0)
        assert set(br) == {"unstable+", "unstable-", "stable+", "stable-"}
        for k in ("unstable+", "unstable-"):
            assert np.max(np.abs(br[k].y)) <= 1e-8
        for k in ("stable+", "stable-"):
            assert np.max(np.abs(br[k].x)) <= 1e-8
            assert np.all(br[k].t <= 0)

    def test_time_reversal(self):
        p = QUARTIC.with_(gamma=-0.5)
        br = separatrices(p, _make(p, 2.0, 0.8), t_span=5.0)
        o = br["stable+"]
        # running the stable branch forward brings it back to the saddle
        fwd = integrate(p, (o.x[-1], o.y[-1]), -o.t[-1])
        assert math.hypot(fwd.end.x - 2.0, fwd.end.y - 0.8) < 1e-5

    def test_not_a_saddle(self):
        a1 = [e for e in interior_equilibria(QUARTIC) if e.classification != "saddle"][0]
        with pytest.raises(NotASaddleError):
            separatrices(QUARTIC, a1)


class TestReturnMap:
    def test_fixed_points(self, pair, fx):
        p, sec, cycles = pair
        expected = fx["regimes"]["nested_pair"]["cycles_on_section"]
        assert [c.stability for c in cycles] == [e["stability"] for e in expected]
        for c, e in zip(cycles, expected):
            assert c.s_star == pytest.approx(e["s_star"], abs=1e-7)
            assert abs(return_map(p, sec, c.s_star) - c.s_star) <= 1e-8 * sec.length
            assert c.residual <= 1e-8 * sec.length

    def test_displacement_sign(self, pair):
        p, sec, (inner, outer) = pair
        d = lambda s: return_map(p, sec, s) - s  # noqa: E731
        # between the cycles orbits move out toward the stable one
        assert d(0.5 * (inner.s_star + outer.s_star)) > 0
        assert d(outer.s_star + 0.05) < 0
        assert d(inner.s_star - 0.05) < 0

    def test_spiral_sink(self):
        a1 = (0.8364034765584941, 0.6978297085711669)
        sec = Section(a1, (1.0, 0.0), 0.5)
        s = 0.1
        for _ in range(6):
            s2 = return_map(QUARTIC, sec, s)
            assert s2 < s
            s = s2
        assert s < 1e-3

    def test_no_return(self):
        with pytest.raises(NoReturnError):
            return_map(QUARTIC, Section((3.5, 0.5), (1.0, 0.0), 1.0), 0.5)

    def test_section_validation(self):
        with pytest.raises(ValueError):
            Section((0, 0), (0.0, 0.0), 1.0)
        with pytest.raises(ValueError):
            Section((0, 0), (1.0, 0.0), -1.0)


class TestCycles:
    def test_quadratic_stage_has_none(self):
        p = ModelParams(0.0, 0.0, 0.2, 0.3, 1.0)
        a = interior_equilibria(p)[0]
        assert find_cycles(p, Section(a.location, (1.0, 0.0), 3.0)) == []

    def test_supercritical_hopf(self, fx, regime):
        r = fx["regimes"]["hopf_super"]
        p = regime("hopf_super", gamma=r["gamma_star"] - 1e-4)
        cs = find_cycles(p, Section(tuple(r["equilibrium"]), (1.0, 0.0), 0.5))
        assert len(cs) == 1 and cs[0].stability == "stable"
        p = regime("hopf_super", gamma=r["gamma_star"] + 1e-4)
        assert find_cycles(p, Section(tuple(r["equilibrium"]), (1.0, 0.0), 0.5)) == []

    def test_stability_two_ways(self, pair):
        p, _, cycles = pair
        for c in cycles:
            r = cycle_stability(p, c)
            assert r.stability == c.stability
            assert r.multiplier == pytest.approx(r.derivative, rel=1e-3)
        inner, outer = cycles
        assert outer.derivative < 1 and math.log(outer.multiplier) < 0
        assert inner.derivative > 1 and math.log(inner.multiplier) > 0

    def test_loop_properties(self, pair, triple_fx):
        p, _, cycles = pair
        a1, s, a2 = triple_fx
        for c in cycles:
            assert loop_index(c) == 1
            assert c.encloses(a1.location)
            assert not c.encloses(s.location) and not c.encloses(a2.location)
            assert c.period > 0

    def test_small_step_keeps_labels(self, pair):
        p, sec, cycles = pair
        nxt = find_cycles(p.with_(gamma=p.gamma + 1e-4), sec)
        assert [c.stability for c in nxt] == [c.stability for c in cycles]

    @pytest.mark.parametrize("d,label", [(0.5, "stable"), (1.5, "unstable"), (1.0005, "semi-stable")])
    def test_labels(self, d, label):
        assert stability_label(d) == label
