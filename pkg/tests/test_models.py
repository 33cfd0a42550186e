import numpy as np
import pytest

from ila.errors import BehindCameraError, InvalidInputError
from ila.models import (
    CameraIntrinsics,
    GpsSatellite,
    Keyframe,
    MotionModel,
    NavState,
    VisionLandmark,
    gps_jacobian,
    gps_predict,
    motion_predict,
    point_in_keyframe,
    project,
    relative_transform,
    rotation_matrix,
    unproject,
    vision_jacobians,
    vision_predict,
    warp,
    warp_point,
    wrap_angle,
)
from ila.pzono import PZonotope


class SinusoidField:
    """Twice-differentiable pixel-space intensity: one sinusoid plus a ramp."""

    def __init__(self, amp=10.0, kx=0.05, ky=0.03, phase=0.3, ramp=(0.02, 0.01), offset=50.0):
        self.amp, self.kx, self.ky, self.phase = amp, kx, ky, phase
        self.ramp = np.asarray(ramp, dtype=float)
        self.offset = offset

    def value(self, uv):
        u, v = uv
        return self.offset + self.amp * np.sin(self.kx * u + self.ky * v + self.phase) + self.ramp @ [u, v]

    def gradient(self, uv):
        u, v = uv
        c = self.amp * np.cos(self.kx * u + self.ky * v + self.phase)
        return np.array([c * self.kx + self.ramp[0], c * self.ky + self.ramp[1]])


class ConstantField:
    def value(self, uv):
        return 42.0

    def gradient(self, uv):
        return np.zeros(2)


INTR = CameraIntrinsics(fx=100.0, fy=100.0, cx=50.0, cy=50.0)


def make_keyframe(pixels, inv_depths, field=None, state=None):
    state = state or NavState(np.zeros(3), np.zeros(3), 0.0)
    field = field or SinusoidField()
    intens = [field.value(p) for p in pixels]
    return Keyframe(state, np.asarray(pixels, float), np.asarray(inv_depths, float), intens)


def make_landmark(pixel, inv_depth, kf):
    pos = unproject(INTR, pixel, inv_depth)
    return VisionLandmark("L0", pos, PZonotope.point(pos), np.asarray(pixel, float))


class TestNavState:
    def test_wrap(self):
        s = NavState(np.zeros(3), [0.0, 0.0, 3 * np.pi], 0.0)
        assert abs(s.orientation[2] - np.pi) < 1e-12

    def test_vector_roundtrip(self):
        v = np.array([1, 2, 3, 0.1, -0.2, 0.3, 4.0])
        assert np.allclose(NavState.from_vector(v).as_vector(), v)


class TestGps:
    def test_pseudorange_example(self):
        sat = GpsSatellite("G1", [2.02e7, 0, 0], 0.0, 10.0, 90.0)
        state = NavState(np.zeros(3), np.zeros(3), 10.0)
        assert gps_predict(state, sat) == pytest.approx(20_200_010.0)

    def test_shift_along_los(self):
        sat = GpsSatellite("G1", [2.02e7, 0, 0], 0.0, 10.0, 90.0)
        s0 = NavState(np.zeros(3), np.zeros(3), 0.0)
        s1 = NavState([100.0, 0.0, 0.0], np.zeros(3), 0.0)
        assert gps_predict(s0, sat) - gps_predict(s1, sat) == pytest.approx(100.0)

    def test_clock_cancellation(self):
        sat = GpsSatellite("G1", [2.02e7, 0, 0], 7.5, 10.0, 90.0)
        state = NavState(np.zeros(3), np.zeros(3), 7.5)
        assert gps_predict(state, sat) == pytest.approx(2.02e7)

    def test_jacobian_axis_aligned(self):
        sat = GpsSatellite("G1", [2.02e7, 0, 0], 0.0, 0.0, 90.0)
        state = NavState(np.zeros(3), np.zeros(3), 0.0)
        assert np.allclose(gps_jacobian(state, sat), [-1, 0, 0, 0, 0, 0, 1])

    def test_jacobian_overhead(self):
        sat = GpsSatellite("G1", [0, 0, 2.02e7], 0.0, 90.0, 0.0)
        state = NavState(np.zeros(3), np.zeros(3), 0.0)
        assert np.allclose(gps_jacobian(state, sat), [0, 0, -1, 0, 0, 0, 1])

    def test_jacobian_finite_difference(self):
        # moderate ranges keep the h=1e-6 central difference clear of
        # catastrophic cancellation on the ~range-sized pseudorange value
        rng = np.random.default_rng(1)
        for _ in range(100):
            direction = rng.normal(size=3)
            direction /= np.linalg.norm(direction)
            sat = GpsSatellite("G", direction * rng.uniform(2e3, 2e4), rng.normal() * 10, 0.0, 0.0)
            state = NavState(rng.normal(size=3) * 100, np.zeros(3), rng.normal() * 10)
            jac = gps_jacobian(state, sat)
            fd = np.zeros(7)
            h = 1e-6
            for k in range(7):
                vp = state.as_vector().copy()
                vm = vp.copy()
                vp[k] += h
                vm[k] -= h
                fd[k] = (
                    gps_predict(NavState.from_vector(vp), sat)
                    - gps_predict(NavState.from_vector(vm), sat)
                ) / (2 * h)
            scale = max(1.0, np.abs(jac).max())
            assert np.abs(jac - fd).max() / scale < 1e-5


class TestPinhole:
    def test_project_example(self):
        assert np.allclose(project(INTR, [1.0, 1.0, 2.0]), [100.0, 100.0])

    def test_optical_axis(self):
        for z in (0.5, 2.0, 40.0):
            assert np.allclose(project(INTR, [0, 0, z]), [50.0, 50.0])

    def test_behind_camera(self):
        with pytest.raises(BehindCameraError):
            project(INTR, [0.0, 0.0, 0.0])

    def test_unproject_examples(self):
        assert np.allclose(unproject(INTR, [50, 50], 0.5), [0, 0, 2])
        assert np.allclose(unproject(INTR, [100, 100], 0.5), [1, 1, 2])
        with pytest.raises(InvalidInputError):
            unproject(INTR, [50, 50], 0.0)

    def test_roundtrip(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            uv = rng.uniform(0, 100, size=2)
            inv_d = rng.uniform(0.02, 2.0)
            assert np.abs(project(INTR, unproject(INTR, uv, inv_d)) - uv).max() < 1e-9


class TestWarp:
    def test_identity_transform(self):
        kf = make_keyframe([[30.0, 40.0]], [0.1])
        out = warp(kf.state, kf, [30.0, 40.0], INTR)
        assert np.allclose(out, unproject(INTR, [30.0, 40.0], 0.1))

    def test_pure_translation_moves_closer(self):
        kf = make_keyframe([[50.0, 50.0]], [0.2])
        state = NavState([0.0, 0.0, -1.0], np.zeros(3), 0.0)
        out = warp(state, kf, [50.0, 50.0], INTR)
        assert np.allclose(out, [0.0, 0.0, 4.0])  # was 5 m out, now 1 m closer

    def test_matches_explicit_transform(self):
        rng = np.random.default_rng(3)
        kf = make_keyframe([[20.0, 70.0]], [0.05])
        for _ in range(20):
            state = NavState(rng.normal(size=3), rng.normal(size=3) * 0.2, 0.0)
            p0 = unproject(INTR, [20.0, 70.0], 0.05)
            rot = rotation_matrix(state.orientation)
            expect = rot @ p0 + state.position
            assert np.abs(warp(state, kf, [20.0, 70.0], INTR) - expect).max() < 1e-9

    def test_unknown_pixel(self):
        kf = make_keyframe([[30.0, 40.0]], [0.1])
        with pytest.raises(InvalidInputError):
            warp(kf.state, kf, [31.0, 40.0], INTR)


class TestVisionModel:
    def test_zero_residual_at_keyframe(self):
        field = SinusoidField()
        kf = make_keyframe([[30.0, 40.0], [60.0, 20.0]], [0.1, 0.04], field)
        lm = make_landmark([60.0, 20.0], 0.04, kf)
        val = vision_predict(kf.state, lm, kf, INTR, field)
        assert val == pytest.approx(kf.intensities[1], abs=1e-12)

    def test_constant_field_invariance(self):
        field = ConstantField()
        kf = make_keyframe([[30.0, 40.0]], [0.1], field)
        lm = make_landmark([30.0, 40.0], 0.1, kf)
        rng = np.random.default_rng(4)
        for _ in range(5):
            state = NavState(rng.normal(size=3) * 0.5, rng.normal(size=3) * 0.1, 0.0)
            assert vision_predict(state, lm, kf, INTR, field) == 42.0

    def test_matches_analytic_warp(self):
        field = SinusoidField()
        kf = make_keyframe([[45.0, 55.0]], [0.05], field)
        lm = make_landmark([45.0, 55.0], 0.05, kf)
        state = NavState([0.2, -0.1, 0.3], [0.01, -0.02, 0.03], 0.0)
        expect = field.value(project(INTR, warp(state, kf, [45.0, 55.0], INTR)))
        assert vision_predict(state, lm, kf, INTR, field) == pytest.approx(expect, abs=1e-9)

    def test_constant_field_zero_jacobians(self):
        field = ConstantField()
        kf = make_keyframe([[30.0, 40.0]], [0.1], field)
        lm = make_landmark([30.0, 40.0], 0.1, kf)
        b_x, b_p = vision_jacobians(kf.state, lm, kf, INTR, field)
        assert np.allclose(b_x, 0.0) and np.allclose(b_p, 0.0)

    def test_jacobians_finite_difference(self):
        field = SinusoidField()
        rng = np.random.default_rng(5)
        checked = 0
        while checked < 100:
            pixel = rng.uniform(20, 80, size=2)
            inv_d = rng.uniform(0.02, 0.1)
            kf = make_keyframe([pixel], [inv_d], field)
            lm = make_landmark(pixel, inv_d, kf)
            state = NavState(rng.normal(size=3) * 0.5, rng.normal(size=3) * 0.05, rng.normal())
            b_x, b_p = vision_jacobians(state, lm, kf, INTR, field)
            scale = max(1.0, np.abs(b_x).max(), np.abs(b_p).max())

            fd_x = np.zeros(7)
            for k in range(7):
                h = 1e-6 if k < 3 or k == 6 else 1e-7
                vp = state.as_vector().copy()
                vm = vp.copy()
                vp[k] += h
                vm[k] -= h
                fd_x[k] = (
                    vision_predict(NavState.from_vector(vp), lm, kf, INTR, field)
                    - vision_predict(NavState.from_vector(vm), lm, kf, INTR, field)
                ) / (2 * h)
            fd_p = np.zeros(3)
            for k in range(3):
                h = 1e-6
                pp = np.array(lm.position)
                pm = pp.copy()
                pp[k] += h
                pm[k] -= h
                lmp = VisionLandmark("L", pp, lm.position_set, lm.source_pixel)
                lmm = VisionLandmark("L", pm, lm.position_set, lm.source_pixel)
                fd_p[k] = (
                    vision_predict(state, lmp, kf, INTR, field)
                    - vision_predict(state, lmm, kf, INTR, field)
                ) / (2 * h)
            assert np.abs(b_x - fd_x).max() / scale < 1e-5
            assert np.abs(b_p - fd_p).max() / scale < 1e-5
            checked += 1

    def test_pure_z_sign(self):
        # ramp-only field: gradient(+u) > 0; point left of axis moves left when backing up
        field = SinusoidField(amp=0.0, ramp=(0.5, 0.0))
        kf = make_keyframe([[60.0, 50.0]], [0.1], field)
        lm = make_landmark([60.0, 50.0], 0.1, kf)
        b_x, _ = vision_jacobians(kf.state, lm, kf, INTR, field)
        # moving +z halves depth -> pixel u = cx + fx*x/z grows for x>0 ... derivative wrt z negative
        p0 = unproject(INTR, [60.0, 50.0], 0.1)
        expect_dz = 0.5 * (-INTR.fx * p0[0] / p0[2] ** 2)
        assert b_x[2] == pytest.approx(expect_dz, rel=1e-9)


class TestKeyframeFrame:
    def test_identity_keyframe_is_world(self):
        kf_state = NavState(np.zeros(3), np.zeros(3), 0.0)
        p = np.array([1.0, 2.0, 3.0])
        assert np.allclose(point_in_keyframe(kf_state, p), p)

    def test_consistency_with_relative_transform(self):
        kf_state = NavState([1.0, -2.0, 0.5], [0.1, 0.05, -0.2], 0.0)
        p_world = np.array([3.0, 1.0, 20.0])
        p_kf = point_in_keyframe(kf_state, p_world)
        # warping back with zero relative motion returns the keyframe coordinates
        assert np.allclose(warp_point(kf_state, kf_state, p_kf), p_kf)


class TestMotion:
    def make_model(self, f=None):
        noise = PZonotope(np.zeros(7), np.zeros((7, 0)), np.eye(7) * 0.01)
        return MotionModel(f if f is not None else np.eye(7), noise)

    def test_identity(self):
        model = self.make_model()
        prev = NavState([1, 2, 3], [0.1, 0.2, 0.3], 4.0)
        assert np.allclose(motion_predict(model, prev).as_vector(), prev.as_vector())

    def test_composition(self):
        f = np.eye(7)
        f[0, 6] = 0.001  # small cross-coupling keeps angles in range
        model = self.make_model(f)
        prev = NavState([1, 2, 3], [0.1, 0.2, 0.3], 4.0)
        one = motion_predict(model, motion_predict(model, prev))
        two = NavState.from_vector(f @ f @ prev.as_vector())
        assert np.allclose(one.as_vector(), two.as_vector())


class TestProperties:
    def test_wrap_angle_range(self):
        vals = wrap_angle(np.linspace(-10, 10, 101))
        assert (vals > -np.pi).all() and (vals <= np.pi).all()

    def test_relative_transform_zero(self):
        s = NavState([1, 2, 3], [0.1, -0.2, 0.3], 0.0)
        rot, t = relative_transform(s, s)
        assert np.allclose(rot, np.eye(3)) and np.allclose(t, 0.0)
