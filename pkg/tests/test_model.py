import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qbl.model import (
    ModelParams,
    PoleError,
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

from conftest import model_params, points


class TestParams:
    @pytest.mark.parametrize(
        "kw",
        [
            dict(alpha=-0.1),
            dict(delta=0.0),
            dict(lam=0.0),
            dict(mu=-1e-3),
            dict(alpha=1.0, beta=-2.1),
            dict(gamma=math.inf),
        ],
    )
    def test_rejects_invalid(self, kw):
        with pytest.raises(ValueError):
            ModelParams(**kw)

    def test_boundary_and_loose(self):
        ModelParams(alpha=1.0, beta=-2.0)
        ModelParams(alpha=0.0, beta=0.0)
        p = ModelParams(alpha=0.0, beta=-0.5, strict=False)
        assert p.stage == "cubic"
        with pytest.raises(ValueError):
            ModelParams(alpha=0.0, beta=-0.5)
        with pytest.raises(ValueError):
            ModelParams(alpha=0.0, beta=-0.5, delta=-1.0, strict=False)

    def test_stage_and_copy(self):
        p = ModelParams(0.5, -0.5, 0.2, 0.3, 1.0)
        assert p.stage == "quartic"
        assert ModelParams().stage == "quadratic"
        q = p.with_(gamma=0.3)
        assert q.gamma == 0.3 and p.gamma == 0.0
        assert list(q.as_array()) == [0.5, -0.5, 0.2, 0.3, 1.0, 0.3]


class TestField:
    def test_examples(self):
        p = ModelParams(0.7, 0.2, 0.3, 0.8, 0.4)
        assert eval_field(p, (0.0, 0.0)) == (0.0, 0.0)
        P, Q = eval_field(p, (1 / p.lam, 0.0))
        assert abs(P) < 1e-15 and Q == 0.0
        q = ModelParams(0.0, 0.0, 0.3, 0.8, 0.4)
        assert eval_field(q, (0.0, 1.0)) == pytest.approx((0.0, -(q.delta + q.mu)))

    def test_rotated(self):
        p = ModelParams(0.7, 0.2, 0.3, 0.8, 0.4)
        pt = (0.4, 1.3)
        assert eval_rotated_field(p, pt) == eval_field(p, pt)
        a, b = eval_field(p, pt)
        assert eval_rotated_field(p.with_(gamma=1.0), pt) == pytest.approx((a - b, b + a))

    def test_response_and_isocline(self):
        assert response(ModelParams(), 0.0) == 0.0
        assert response(ModelParams(), 2.0) == 2.0
        assert response(ModelParams(alpha=1.0), 1.0) == 0.5
        with pytest.raises(PoleError):
            response(ModelParams(alpha=1.0, beta=-2.0), 1.0)
        p = ModelParams(0.7, 0.2, 0.3, 0.8, 0.4)
        assert prey_isocline(p, 1 / p.lam) == pytest.approx(0.0, abs=1e-15)
        assert prey_isocline(p, 0.0) == 1.0
        q = ModelParams(lam=0.8)
        xs = np.linspace(-1, 3, 7)
        assert np.allclose(prey_isocline(q, xs), 1 - 0.8 * xs)
        assert np.isnan(predator_isocline(ModelParams(mu=0.0), 1.0))

    def test_predator_isocline_zeroes_q(self):
        p = ModelParams(0.7, 0.2, 0.3, 0.8, 0.4)
        xs = np.linspace(0.1, 2, 9)
        _, Q = eval_field(p, (xs, predator_isocline(p, xs)))
        assert np.allclose(Q, 0.0, atol=1e-12)


class TestJacobian:
    def test_origin(self):
        p = ModelParams(0.7, 0.2, 0.3, 0.8, 0.4)
        J = eval_jacobian(p, (0.0, 0.0))
        assert (J.pxx, J.pxy, J.qyx, J.qyy) == (1.0, 0.0, 0.0, -0.3)
        assert sorted(z.real for z in J.eigenvalues) == [-0.3, 1.0]

    def test_quadratic_prey_point(self):
        p = ModelParams(0.0, 0.0, 0.3, 0.8, 0.4)
        eig = sorted(z.real for z in eval_jacobian(p, (1 / p.lam, 0.0)).eigenvalues)
        assert eig == pytest.approx(sorted([-1.0, 1 / p.lam - p.delta]))

    def test_rotated_identity(self):
        p = ModelParams(0.7, 0.2, 0.3, 0.8, 0.4)
        assert eval_jacobian(p, (0.3, 0.9), rotated=True) == eval_jacobian(p, (0.3, 0.9))

    def test_finite_differences_1000(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            a = rng.uniform(0, 3)
            p = ModelParams(a, rng.uniform(-2 * math.sqrt(a), 3), rng.uniform(0.05, 2), rng.uniform(0.1, 3),
                            rng.uniform(0, 3), rng.uniform(-2, 2))
            x, y = rng.uniform(-3, 3, 2)
            J = eval_jacobian(p, (x, y), rotated=True).as_array()
            h = 1e-6
            fd = np.empty((2, 2))
            for k, (dx, dy) in enumerate(((h, 0.0), (0.0, h))):
                f1 = np.array(eval_rotated_field(p, (x + dx, y + dy)))
                f0 = np.array(eval_rotated_field(p, (x - dx, y - dy)))
                fd[:, k] = (f1 - f0) / (2 * h)
            assert np.max(np.abs(fd - J)) <= 1e-6 * max(1.0, np.max(np.abs(J)))

    @given(model_params(), points)
    def test_eigenvalue_residual(self, p, pt):
        J = eval_jacobian(p, pt, rotated=True)
        for z in J.eigenvalues:
            res = abs(z * z - J.trace * z + J.determinant)
            assert res <= 1e-12 * max(1.0, abs(J.trace) ** 2, abs(J.determinant))

    @given(model_params(), points)
    def test_divergence_is_trace(self, p, pt):
        assert divergence(p, pt) == pytest.approx(eval_jacobian(p, pt, rotated=True).trace, rel=1e-12, abs=1e-12)


class TestRotation:
    def test_examples(self):
        p = ModelParams(0.7, 0.2, 0.3, 0.8, 0.4)
        assert ellipse_residual(p, (0.0, 0.0)) == 0.0
        assert ellipse_residual(p, (1 / p.lam, 0.0)) == pytest.approx(0.0, abs=1e-15)
        da, db, _ = rotation_determinants(p, (2.0, 0.0))
        assert da == 0.0 and db == 0.0

    def test_sign_identity_10k(self):
        rng = np.random.default_rng(3)
        p = ModelParams(0.5, -0.5, 0.2, 0.3, 1.0)
        x, y = rng.uniform(-4, 4, (2, 10_000))
        _, db, _ = rotation_determinants(p, (x, y))
        e = ellipse_residual(p, (x, y))
        mask = e != 0
        assert np.all(np.sign(db[mask]) == np.sign(x[mask] ** 2 * y[mask] * e[mask]))

    @given(model_params(), points)
    def test_dgamma_nonnegative_and_alpha_beta(self, p, pt):
        da, db, dg = rotation_determinants(p, pt)
        assert dg >= 0.0
        assert da == pytest.approx(pt[0] * db, rel=1e-12, abs=1e-300)

    @given(model_params(), st.floats(0.01, 3.0))
    def test_dgamma_zero_at_equilibria(self, p, x):
        # (1/lam, 0) is always an equilibrium; a generic point is not
        xe = 1 / p.lam
        scale = xe * abs((p.alpha * xe + p.beta) * xe + 1.0) + 1.0
        assert rotation_determinants(p, (xe, 0.0))[2] <= (1e-15 * scale) ** 2
        P, Q = eval_field(p, (x, 2.5))
        if abs(P) + abs(Q) > 1e-6:
            assert rotation_determinants(p, (x, 2.5))[2] > 0


class TestInvariants:
    @given(model_params(), points, st.floats(-3, 3))
    def test_equilibrium_preservation(self, p, pt, g):
        # |R|^2 = (1 + g^2)(P^2 + Q^2), so R vanishes exactly where (P, Q) does
        P, Q = eval_field(p, pt)
        R = eval_rotated_field(p.with_(gamma=g), pt)
        assert R[0] ** 2 + R[1] ** 2 == pytest.approx((1 + g * g) * (P * P + Q * Q), rel=1e-12, abs=1e-300)
        for q in ((0.0, 0.0), (1 / p.lam, 0.0)):
            # 1 - lam * (1/lam) rounds to ~eps, amplified by x * A
            x = q[0]
            scale = (1 + abs(g)) * x * abs((p.alpha * x + p.beta) * x + 1.0) + 1.0
            assert eval_rotated_field(p.with_(gamma=g), q) == pytest.approx((0.0, 0.0), abs=1e-15 * scale)

    @given(model_params(gamma=False), st.floats(-5, 5))
    def test_axis_invariance(self, p, s):
        assert eval_field(p, (0.0, s))[0] == 0.0
        assert eval_field(p, (s, 0.0))[1] == 0.0
