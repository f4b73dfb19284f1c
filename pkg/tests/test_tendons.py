import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tacter import kernels
from tacter.rod import FramedState, integrate_step
from tacter.tendons import (
    INNER, OUTER, DegeneratePathError, TendonRoute, apply_termination_jump, distributed_wrench,
    route_table, tendon_path_derivatives, terminal_wrench,
)

small = st.floats(-0.5, 0.5)
vec = st.tuples(small, small, small).map(np.array)
offset = st.tuples(st.floats(-3, 3), st.floats(-3, 3))
tension = st.one_of(st.just(0.0), st.floats(1e-6, 50.0))
E3 = np.array([0.0, 0.0, 1.0])


def route(offset=(0.0, 0.7), lam=1.0):
    return TendonRoute(offset, lam, INNER, 10.0)


class TestPathDerivatives:
    def test_straight(self):
        p1, p2 = tendon_path_derivatives(np.zeros(3), E3, np.zeros(3), np.zeros(3), route())
        np.testing.assert_array_equal(p1, E3)
        np.testing.assert_array_equal(p2, np.zeros(3))

    def test_bending_about_d1(self):
        kappa, a = 0.2, 0.7
        p1, _ = tendon_path_derivatives([kappa, 0, 0], E3, np.zeros(3), np.zeros(3), route((0.0, a)))
        # (kappa e1) x (a e2) = kappa a e3
        np.testing.assert_allclose(p1, [0.0, 0.0, 1.0 + kappa * a], atol=1e-15)

    def test_against_finite_differences(self, rng):
        # strains vary polynomially in s; integrate the frame and difference the tendon curve
        cu = rng.normal(scale=0.05, size=(3, 3))
        cv = rng.normal(scale=0.02, size=(3, 3)) + np.array([[0, 0, 1.0], [0, 0, 0], [0, 0, 0]])
        r = route((0.4, -0.6))

        def strains(s):
            basis = np.array([1.0, s, s * s])
            return basis @ cu, basis @ cv, np.array([0.0, 1.0, 2 * s]) @ cu, np.array([0.0, 1.0, 2 * s]) @ cv

        def rates(state):
            u, v, _, _ = strains(state.y[0])
            return u, v, np.array([1.0])

        h, s0 = 1e-3, 0.6
        n_steps = int(round((s0 + h) / h))
        state = FramedState(np.eye(3), np.zeros(3), np.zeros(1))
        pts, frames = [], []
        for k in range(n_steps + 1):
            pts.append(state.P + state.R @ r.r_arm)
            frames.append(state.R)
            state = integrate_step(state, rates, h)
        i = int(round(s0 / h))
        R = frames[i]
        d1 = R.T @ (pts[i + 1] - pts[i - 1]) / (2 * h)
        d2 = R.T @ (pts[i + 1] - 2 * pts[i] + pts[i - 1]) / h**2
        u, v, du, dv = strains(s0)
        p1, p2 = tendon_path_derivatives(u, v, du, dv, r)
        np.testing.assert_allclose(p1, d1, atol=5e-6)
        np.testing.assert_allclose(p2, d2, atol=5e-5)


class TestDistributedWrench:
    def test_zero_tension(self):
        w = distributed_wrench(route(lam=0.0), [0.1, 0.2, 1.0], [0.3, -0.1, 0.2])
        np.testing.assert_array_equal(w.f, 0.0)
        np.testing.assert_array_equal(w.tau, 0.0)

    def test_straight_path_no_load(self):
        w = distributed_wrench(route(lam=5.0), E3, np.zeros(3))
        np.testing.assert_array_equal(w.f, 0.0)

    def test_centerline_tendon_on_arc(self):
        kappa, lam = 0.3, 4.0
        r = route((0.0, 0.0), lam)
        p1, p2 = tendon_path_derivatives([kappa, 0, 0], E3, np.zeros(3), np.zeros(3), r)
        w = distributed_wrench(r, p1, p2)
        assert np.linalg.norm(w.f) == pytest.approx(lam * kappa, rel=1e-14)
        # pulls toward the centre of curvature, which lies on -d2 for u = kappa d1
        np.testing.assert_allclose(w.f / np.linalg.norm(w.f), [0, -1, 0], atol=1e-15)

    def test_degenerate_path(self):
        with pytest.raises(DegeneratePathError):
            distributed_wrench(route(), np.zeros(3), np.ones(3))

    @given(vec, vec, vec, vec, offset, tension)
    def test_force_normal_to_path(self, u, v, du, dv, off, lam):
        v = v + E3
        r = route(off, lam)
        p1, p2 = tendon_path_derivatives(u, v, du, dv, r)
        w = distributed_wrench(r, p1, p2)
        assert abs(w.f @ p1) <= 1e-12 * max(np.linalg.norm(w.f) * np.linalg.norm(p1), 1e-300) + 1e-14

    @given(vec, vec, vec, vec, offset, tension)
    def test_moment_is_force_at_offset(self, u, v, du, dv, off, lam):
        r = route(off, lam)
        p1, p2 = tendon_path_derivatives(u, v + E3, du, dv, r)
        w = distributed_wrench(r, p1, p2)
        np.testing.assert_array_equal(w.tau, np.cross(r.r_arm, w.f))

    @given(vec, vec, vec, vec, offset, st.floats(0.1, 10.0), st.floats(0.1, 10.0))
    def test_homogeneous_in_tension(self, u, v, du, dv, off, lam, k):
        a, b = route(off, lam), route(off, k * lam)
        p1, p2 = tendon_path_derivatives(u, v + E3, du, dv, a)
        wa, wb = distributed_wrench(a, p1, p2), distributed_wrench(b, p1, p2)
        np.testing.assert_allclose(wb.f, k * wa.f, rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(wb.tau, k * wa.tau, rtol=1e-12, atol=1e-14)

    @given(vec, vec, vec, vec, offset, tension, offset, tension)
    def test_matches_kernel_affine_form(self, u, v, du, dv, off1, lam1, off2, lam2):
        v = v + E3
        routes = [route(off1, lam1), route(off2, lam2)]
        f = np.zeros(3)
        tau = np.zeros(3)
        for r in routes:
            if r.tension == 0:
                continue
            w = distributed_wrench(r, *tendon_path_derivatives(u, v, du, dv, r))
            f += w.f
            tau += w.tau
        Cmu, Cmv, cm, Cfu, Cfv, cf, status = kernels.tendon_terms(u, v, route_table(routes))
        assert status == kernels.STATUS_OK
        scale = 1.0 + np.abs(f).max() + np.abs(tau).max()
        np.testing.assert_allclose(Cfu @ du + Cfv @ dv + cf, f, atol=1e-11 * scale)
        np.testing.assert_allclose(Cmu @ du + Cmv @ dv + cm, tau, atol=1e-11 * scale)


class TestTerminalWrench:
    def test_straight_unit_tension(self):
        F, M = terminal_wrench(route((0.0, 0.7), 1.0), E3)
        np.testing.assert_array_equal(F, [0.0, 0.0, -1.0])
        np.testing.assert_allclose(M, [-0.7, 0.0, 0.0], atol=1e-16)

    def test_zero_tension(self):
        F, M = terminal_wrench(route(lam=0.0), [0.1, 0.0, 1.0])
        np.testing.assert_array_equal(F, 0.0)
        np.testing.assert_array_equal(M, 0.0)

    @given(vec, offset, tension)
    def test_linear_in_tension(self, p1, off, lam):
        p1 = p1 + E3
        F1, M1 = terminal_wrench(route(off, lam), p1)
        F2, M2 = terminal_wrench(route(off, 2 * lam), p1)
        np.testing.assert_array_equal(F2, 2 * F1)
        np.testing.assert_array_equal(M2, 2 * M1)

    @given(vec, offset, tension)
    def test_matches_kernel(self, u, off, lam):
        r = route(off, lam)
        p1, _ = tendon_path_derivatives(u, E3, np.zeros(3), np.zeros(3), r)
        F, M = terminal_wrench(r, p1)
        Fk, Mk, status = kernels.terminal_loads(u, E3, route_table([r]))
        np.testing.assert_allclose(Fk, F, atol=1e-13)
        np.testing.assert_allclose(Mk, M, atol=1e-13)


class TestJump:
    def test_free_tip(self):
        n, m = apply_termination_jump(np.zeros(3), np.zeros(3), [0, 0, -1.0], np.zeros(3))
        np.testing.assert_array_equal(n, [0, 0, -1.0])

    def test_continuity_without_tendon(self):
        n, m = apply_termination_jump([1.0, 2, 3], [4.0, 5, 6], np.zeros(3), np.zeros(3))
        np.testing.assert_array_equal(n, [1, 2, 3])
        np.testing.assert_array_equal(m, [4, 5, 6])


class TestRoute:
    def test_rejects_negative_tension(self):
        with pytest.raises(ValueError):
            TendonRoute((0, 1), -1.0, OUTER, 1.0)

    def test_rejects_unknown_owner(self):
        with pytest.raises(ValueError):
            TendonRoute((0, 1), 1.0, "middle", 1.0)

    def test_table(self):
        table = route_table([route((0.1, 0.2), 3.0)])
        np.testing.assert_array_equal(table, [[0.1, 0.2, 3.0]])
        assert route_table([]).shape == (0, 3)
