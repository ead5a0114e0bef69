"""Controller unit tests: certificate algebra, virtual current, switching law."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from emasim import (
    ConstantSurfaces,
    Controller,
    ControllerGains,
    PlantParams,
    State,
    SurfaceBounds,
    certify_gains,
    control_voltage,
    error_coords,
    sliding_gain,
    virtual_current,
)
from emasim.bounds import mu_lower
from emasim.model import MU_0

NOMINAL_S = 2.0 / (MU_0 * 2.8e10)


def benchmark_plant(frac: float = 0.2) -> PlantParams:
    b = SurfaceBounds(
        s1_lower=NOMINAL_S * (1 - frac), s1_upper=NOMINAL_S * (1 + frac),
        s3_lower=NOMINAL_S * (1 - frac), s3_upper=NOMINAL_S * (1 + frac),
    )
    fringing = ConstantSurfaces(s1=NOMINAL_S, s3=NOMINAL_S, bounds=b, stroke=6e-3)
    return PlantParams(
        rho_x=2.8e10, rho_0=630.0, N=70, lambda_f=5.0, K=120.0, m=0.1, R=0.4,
        fringing=fringing, x0=State(0.001, 0.0, 0.0),
    )


PLANT = benchmark_plant()
GAINS = ControllerGains(alpha1=10.0, alpha2=20000.0, epsilon1=10.0, theta=0.9)


class TestCertificate:
    def test_benchmark_algebra(self):
        cert = certify_gains(GAINS, PLANT, 0.003)
        assert cert.a == pytest.approx(-799.0, abs=0.0)
        assert cert.b == pytest.approx(-40.0, abs=0.0)
        assert cert.q[0] == (-10.0, -399.5)
        assert cert.q[1] == (-399.5, -20040.0)
        det = cert.q[0][0] * cert.q[1][1] - cert.q[0][1] ** 2
        assert det == pytest.approx(40799.75, abs=0.0)
        assert cert.negative_definite and cert.certified

    def test_eigenvalues_match_brute_force(self):
        cert = certify_gains(GAINS, PLANT, 0.003)
        oracle = np.linalg.eigvalsh(np.asarray(cert.q))
        assert cert.eigenvalues[0] == pytest.approx(float(oracle[0]), rel=1e-9)
        assert cert.eigenvalues[1] == pytest.approx(float(oracle[1]), rel=1e-9)
        assert cert.alpha == pytest.approx(float(np.min(np.abs(oracle))), rel=1e-9)
        assert cert.alpha_extreme == pytest.approx(float(np.max(np.abs(oracle))), rel=1e-9)

    def test_delta_and_radius(self):
        cert = certify_gains(GAINS, PLANT, 0.003)
        assert cert.delta == pytest.approx(3.6, rel=1e-12)
        assert cert.radius == pytest.approx(cert.delta / (cert.alpha * 0.9), rel=1e-12)
        assert cert.radius_extreme == pytest.approx(cert.delta / (cert.alpha_extreme * 0.9), rel=1e-12)
        assert cert.radius > cert.radius_extreme > 0.0

    def test_zero_velocity_gain_not_certified(self):
        # alpha2 = 0 keeps the diagonal negative but flips the determinant
        with pytest.raises(ValueError):
            ControllerGains(alpha1=10.0, alpha2=0.0, epsilon1=10.0)
        weak = ControllerGains(alpha1=10.0, alpha2=1.0, epsilon1=10.0)
        cert = certify_gains(weak, PLANT, 0.003)
        det = cert.q[0][0] * cert.q[1][1] - cert.q[0][1] ** 2
        assert det < 0.0
        assert not cert.certified
        assert math.isinf(cert.radius)

    def test_negative_definite_iff_diag_and_det(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            g = ControllerGains(
                alpha1=float(rng.uniform(0.1, 50.0)),
                alpha2=float(rng.uniform(0.1, 40000.0)),
                epsilon1=1.0,
            )
            cert = certify_gains(g, PLANT, 0.003)
            det = cert.q[0][0] * cert.q[1][1] - cert.q[0][1] ** 2
            expected = cert.q[0][0] < 0.0 and det > 0.0
            oracle_nd = bool(np.all(np.linalg.eigvalsh(np.asarray(cert.q)) < 0.0))
            assert cert.negative_definite == expected == oracle_nd


class TestErrorCoords:
    def test_benchmark_initial_state(self):
        z = error_coords(State(0.001, 0.0, 0.0), 0.003, GAINS)
        assert z.z1 == pytest.approx(-0.002, rel=1e-12)
        assert z.z2 == pytest.approx(-0.02, rel=1e-12)

    def test_on_target(self):
        z = error_coords(State(0.003, 0.0, 0.0), 0.003, GAINS)
        assert z.z1 == 0.0 and z.z2 == 0.0

    @given(x2=st.floats(-1.0, 1.0), dx2=st.floats(-1.0, 1.0))
    def test_unit_slope_in_velocity(self, x2, dx2):
        za = error_coords(State(0.001, x2, 0.0), 0.003, GAINS)
        zb = error_coords(State(0.001, x2 + dx2, 0.0), 0.003, GAINS)
        assert zb.z2 - za.z2 == pytest.approx(dx2, rel=1e-12, abs=1e-15)


class TestVirtualCurrent:
    def test_zero_error__zero_current(self):
        z = error_coords(State(0.003, 0.0, 0.0), 0.003, GAINS)
        assert virtual_current(z, 0.003, 0.003, GAINS, PLANT) == 0.0

    def test_direct_evaluation(self):
        # plant crafted so the worst-case mu at the evaluation gap is 0.15:
        # with N = 1, rho_x = 15, rho_0 = 10, mu_lo(0) = 15 / 100 = 0.15
        b = SurfaceBounds(s1_lower=1e-4, s1_upper=1e-4, s3_lower=1e-4, s3_upper=1e-4)
        fr = ConstantSurfaces(s1=1e-4, s3=1e-4, bounds=b, stroke=1e-3)
        plant = PlantParams(rho_x=15.0, rho_0=10.0, N=1, lambda_f=0.0, K=0.0, m=0.1, R=0.4, fringing=fr)
        gains = ControllerGains(alpha1=10.0, alpha2=20000.0, epsilon1=10.0, mu_lower_at="gap")
        assert mu_lower(0.0, plant) == pytest.approx(0.15, rel=1e-12)
        z = error_coords(State(0.0, -0.02, 0.0), 0.0, gains)
        x3d = virtual_current(z, 0.0, 0.0, gains, plant)
        assert x3d**2 == pytest.approx(533.333333333, rel=1e-9)
        assert x3d == pytest.approx(23.094010767, rel=1e-9)

    def test_clamped_when_demand_negative(self):
        z = error_coords(State(0.001, 0.5, 0.0), 0.003, GAINS)  # z2 > 0
        assert z.z2 > 0.0
        assert virtual_current(z, 0.001, 0.003, GAINS, PLANT) == 0.0

    @given(z2=st.floats(-0.5, 0.5), x1=st.floats(0.0, 5e-3))
    def test_nonnegative_and_bounded(self, z2, x1):
        z = error_coords(State(x1, z2 - GAINS.alpha1 * (x1 - 0.003), 0.0), 0.003, GAINS)
        x3d = virtual_current(z, x1, 0.003, GAINS, PLANT)
        assert x3d >= 0.0
        mu_lo = mu_lower(x1 + 0.003, PLANT)
        limit = (2.0 * PLANT.m / mu_lo) * GAINS.alpha2 * abs(z.z2)
        assert x3d**2 <= limit * (1.0 + 1e-9)

    def test_evaluation_gap_modes_differ(self):
        z = error_coords(State(0.001, 0.0, 0.0), 0.003, GAINS)
        shifted = virtual_current(z, 0.001, 0.003, GAINS, PLANT)
        local = virtual_current(
            z, 0.001, 0.003,
            ControllerGains(alpha1=10.0, alpha2=20000.0, epsilon1=10.0, mu_lower_at="gap"),
            PLANT,
        )
        # smaller worst-case mu at the pushed-out gap -> larger demanded current
        assert shifted > local > 0.0


class TestSlidingGain:
    def test_rest_state_equals_margin(self):
        z = error_coords(State(0.003, 0.0, 0.0), 0.003, GAINS)
        assert sliding_gain(State(0.003, 0.0, 0.0), z, GAINS, PLANT) == GAINS.epsilon1

    def test_monotone_in_virtual_current(self):
        from dataclasses import replace

        z = error_coords(State(0.002, 0.0, 5.0), 0.003, GAINS)
        previous = -1.0
        for x3d in (0.0, 2.0, 5.0, 11.0, 23.0):
            value = sliding_gain(
                State(0.002, 0.0, 5.0), replace(z, x3d=x3d, S=5.0 - x3d), GAINS, PLANT
            )
            assert value > previous
            previous = value

    def test_always_at_least_margin(self):
        rng = np.random.default_rng(9)
        for _ in range(200):
            s = State(float(rng.uniform(0, 5e-3)), float(rng.uniform(-1, 1)), float(rng.uniform(-5, 30)))
            ctrl = Controller(GAINS, PLANT)
            _, alpha3, *_ = ctrl.control_values(s.x1, s.x2, s.x3, 0.003)
            assert alpha3 >= GAINS.epsilon1


class TestControlVoltage:
    def test_sign_convention(self):
        ctrl = Controller(GAINS, PLANT)
        # S > 0: real current above the virtual one -> push down
        u_pos, _, _, _, surf, x3d, _ = ctrl.control_values(0.001, 0.0, 150.0, 0.003)
        assert x3d < 150.0 and surf > 0.0 and u_pos < 0.0
        u_neg, _, _, _, surf, _, _ = ctrl.control_values(0.001, 0.0, 0.0, 0.003)
        assert surf < 0.0 and u_neg > 0.0

    def test_zero_surface_zero_voltage(self):
        ctrl = Controller(GAINS, PLANT)
        _, _, _, _, surf, x3d, _ = ctrl.control_values(0.001, 0.0, 0.0, 0.003)
        u, alpha3, *_ = ctrl.control_values(0.001, 0.0, x3d, 0.003)
        assert u == 0.0
        assert control_voltage(State(0.001, 0.0, x3d), 0.003, GAINS, PLANT) == 0.0

    def test_magnitude_bounded_by_gain(self):
        rng = np.random.default_rng(4)
        ctrl = Controller(GAINS, PLANT)
        for _ in range(200):
            u, alpha3, *_ = ctrl.control_values(
                float(rng.uniform(0, 5e-3)), float(rng.uniform(-1, 1)),
                float(rng.uniform(-5, 40)), 0.003,
            )
            assert abs(u) <= alpha3 * (1.0 + 1e-12)

    def test_boundary_layer_smooths_switching(self):
        from dataclasses import replace as rep

        smooth = rep(GAINS, boundary_layer=0.5)
        ctrl = Controller(smooth, PLANT)
        _, _, _, _, surf, x3d, _ = ctrl.control_values(0.001, 0.0, 0.0, 0.003)
        u_inside, alpha3, *_ = ctrl.control_values(0.001, 0.0, x3d - 0.1, 0.003)
        # inside the layer the command is proportional, not saturated
        assert 0.0 < u_inside < alpha3


class TestVirtualCurrentDerivative:
    def test_zero_inside_clamp(self):
        ctrl = Controller(GAINS, PLANT)
        # positive z2 clamps the virtual current; its derivative is defined as 0
        _, _, _, z2, _, x3d, x3d_dot = ctrl.control_values(0.003, 0.5, 0.0, 0.003)
        assert z2 > 0.0 and x3d == 0.0 and x3d_dot == 0.0

    def test_zero_at_stationary_design_point(self):
        # crafted state: zero gap rate (x2 = 0, so the envelope is constant
        # along time) and a position error that makes the design-model z2
        # rate cancel exactly; the chain rule then yields 0
        from dataclasses import replace as rep

        gains = rep(GAINS, mu_lower_at="gap")
        ctrl = Controller(gains, PLANT)
        x1 = 0.002
        # with x2 = 0: z2 = alpha1*z1 and the design rate is
        # -alpha2*alpha1*z1 - (K/m)*x1 = 0  =>  z1 = -(K/m)*x1/(alpha1*alpha2)
        z1 = -(PLANT.K / PLANT.m) * x1 / (gains.alpha1 * gains.alpha2)
        y_r = x1 - z1
        _, _, _, _, _, x3d, x3d_dot = ctrl.control_values(x1, 0.0, 0.0, y_r)
        assert x3d > 0.0
        assert abs(x3d_dot) < 1e-6

    def test_filtered_tracks_smooth_ramp(self):
        # state sweep chosen so the virtual current ramps linearly in time:
        # x1 = y_r = 0 fixes mu_lo; x2(t) = -c*t^2 gives x3d proportional to t
        from dataclasses import replace as rep

        dt = 1e-5
        tau = 1e-4
        gains = rep(GAINS, derivative_mode="filtered", derivative_time_constant=tau, mu_lower_at="gap")
        ctrl = Controller(gains, PLANT, dt=dt)
        mu_lo = mu_lower(0.0, PLANT)
        scale = math.sqrt(2.0 * PLANT.m * GAINS.alpha2 / mu_lo)
        times = np.arange(0.0, 4e-3, dt)
        estimates, truth = [], []
        for t in times:
            x2 = -(t**2)
            _, _, _, _, _, x3d, x3d_dot = ctrl.control_values(0.0, x2, 0.0, 0.0)
            assert x3d == pytest.approx(scale * t, rel=1e-9, abs=1e-12)
            estimates.append(x3d_dot)
            truth.append(scale)
        start = int(2 * tau / dt) + 1
        err = np.asarray(estimates[start:]) - np.asarray(truth[start:])
        rms_rel = math.sqrt(float(np.mean(err**2))) / scale
        assert rms_rel < 0.05

    def test_filtered_mode_requires_dt(self):
        from dataclasses import replace as rep

        with pytest.raises(ValueError):
            Controller(rep(GAINS, derivative_mode="filtered"), PLANT)

    def test_reset_clears_filter_state(self):
        from dataclasses import replace as rep

        gains = rep(GAINS, derivative_mode="filtered")
        ctrl = Controller(gains, PLANT, dt=1e-5)
        first = ctrl.control_values(0.001, 0.0, 0.0, 0.003)
        ctrl.control_values(0.0012, 0.01, 1.0, 0.003)
        ctrl.reset()
        again = ctrl.control_values(0.001, 0.0, 0.0, 0.003)
        assert first == again

    def test_one_shot_wrapper_matches_controller(self):
        s = State(0.0012, 0.03, 2.0)
        from emasim import virtual_current_derivative

        ctrl = Controller(GAINS, PLANT)
        expected = ctrl.control_values(s.x1, s.x2, s.x3, 0.003)[6]
        assert virtual_current_derivative(s, error_coords(s, 0.003, GAINS), 0.003, 0.0, GAINS, PLANT) == expected
        with pytest.raises(ValueError):
            virtual_current_derivative(s, error_coords(s, 0.003, GAINS), 0.003, 0.1, GAINS, PLANT)


class TestControlOutput:
    def test_structured_evaluation_matches_fast_path(self):
        ctrl = Controller(GAINS, PLANT)
        s = State(0.001, 0.0, 0.0)
        out = ctrl.control_values(s.x1, s.x2, s.x3, 0.003)
        structured = ctrl.control(s, 0.003)
        assert structured.u == out[0]
        assert structured.alpha3 == out[1]
        assert (structured.coords.z1, structured.coords.z2) == (out[2], out[3])
        assert structured.coords.S == out[4]
        assert structured.coords.x3d == out[5]
        assert structured.coords.x3d_dot == out[6]
