"""Swing-model coefficients, damping, vector field and portraits."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from vscstab.params import ControllerParams, GridParams, OperatingPoint, PerUnitBase
from vscstab.pll import (
    damping,
    equilibrium_angles,
    integrate_pll,
    pll_portrait,
    pll_rhs,
    prefault_pcc_voltage,
    simulate_first_swing,
    swing_coeffs,
    swing_energy,
    t_e,
    PortraitClass,
)

BASE = PerUnitBase()
GRID = GridParams(scr=4.0, l_sigma_t=0.25)          # stiff PCC, full lump on the line
GRID_SPLIT = GridParams(scr=4.0, l_sigma_t=0.2, z_s=0.05j)
CTRL = ControllerParams(pll_kp=20.0, pll_ki=800.0)
OP = OperatingPoint(i_cd_ref=1.0, i_cq_ref=0.0)


def coeffs(k_f=1.0, phi_f=0.0, grid=GRID, ctrl=CTRL, op=OP):
    return swing_coeffs(BASE, grid, ctrl, op, k_f_mag=k_f, phi_f=phi_f)


class TestPrefaultVoltage:
    def test_zero_current_gives_source_voltage(self):
        op0 = OperatingPoint(i_cd_ref=0.0, i_cq_ref=0.0)
        assert prefault_pcc_voltage(GRID_SPLIT, op0) == 1.0 + 0j

    def test_stiff_pcc_ignores_current(self):
        assert prefault_pcc_voltage(GRID, OP) == 1.0 + 0j

    def test_inductive_source_raises_magnitude(self):
        u = prefault_pcc_voltage(GRID_SPLIT, OP)
        assert abs(u) >= GRID_SPLIT.u_s
        assert abs(u) == pytest.approx(abs(1.0 + 0.05j), abs=1e-15)


class TestSwingCoeffs:
    def test_no_fault_identity(self):
        assert coeffs(k_f=1.0, phi_f=0.0) == coeffs()

    def test_reference_drive_and_equilibria(self):
        c = coeffs()
        assert c.t_m == pytest.approx(0.25, abs=1e-15)
        assert c.t_pll == pytest.approx((BASE.omega_b - 20.0 * 0.25) / 800.0, abs=1e-15)
        delta_a, delta_b = equilibrium_angles(c)
        assert delta_a == pytest.approx(0.253, abs=1e-3)
        assert delta_b == pytest.approx(math.pi - delta_a, abs=1e-15)
        assert delta_b == pytest.approx(2.89, abs=5e-3)

    def test_drive_unaffected_by_reactive_current_without_resistance(self):
        for icq in (-0.5, 0.0, 0.5):
            op = OperatingPoint(i_cd_ref=1.0, i_cq_ref=icq)
            grid = GridParams(scr=4.0, l_sigma_t=0.25, r_sigma_t=0.0)
            assert swing_coeffs(BASE, grid, CTRL, op).t_m == pytest.approx(0.25, abs=1e-15)

    def test_resistive_line_couples_reactive_current(self):
        grid = GridParams(scr=4.0, l_sigma_t=0.2, r_sigma_t=0.1)
        op = OperatingPoint(i_cd_ref=1.0, i_cq_ref=0.5)
        assert swing_coeffs(BASE, grid, CTRL, op).t_m == pytest.approx(0.2 + 0.05, abs=1e-15)

    def test_non_physical_inertia_rejected(self):
        ctrl = ControllerParams(pll_kp=2e3, pll_ki=800.0)
        with pytest.raises(ValueError, match="inertia"):
            swing_coeffs(BASE, GRID, ctrl, OP)

    def test_no_equilibrium_for_deep_dip(self):
        assert equilibrium_angles(coeffs(k_f=0.1)) is None


class TestFeedbackCurve:
    def test_post_fault_curve_is_scaled_and_shifted(self):
        k_f, phi_f = 0.37, -0.3
        pre, post = coeffs(), coeffs(k_f=k_f, phi_f=phi_f)
        assert post.u_eff == pytest.approx(k_f * pre.u_eff, abs=1e-12)
        deltas = np.linspace(-2 * math.pi, 2 * math.pi, 400)
        for d in deltas:
            assert t_e(d, post) == pytest.approx(
                k_f * pre.u_eff * math.sin(d - phi_f), abs=1e-12)
        assert max(t_e(d, post) for d in deltas) == pytest.approx(
            k_f * max(t_e(d, pre) for d in deltas), abs=1e-9)


class TestDamping:
    def test_positive_at_origin(self):
        assert damping(0.0, coeffs()) > 0.0

    def test_negative_at_pi(self):
        assert damping(math.pi, coeffs()) < 0.0

    def test_sign_change_near_quarter_turn(self):
        c = coeffs()
        # the current term shifts the crossing a hair below pi/2
        assert damping(math.pi / 2 - 0.01, c) > 0.0
        assert damping(math.pi / 2 + 0.01, c) < 0.0
        for d in np.linspace(math.pi / 2 + 0.01, 3 * math.pi / 2 - 0.01, 100):
            assert damping(d, c) < 0.0


class TestVectorField:
    def test_zero_at_equilibrium(self):
        c = coeffs()
        delta_a, _ = equilibrium_angles(c)
        ddw, ddl = pll_rhs((0.0, delta_a), c)
        assert abs(ddw) < 1e-10
        assert ddl == 0.0

    def test_rhs_vanishes_on_equilibrium_set(self):
        c = coeffs(k_f=0.6, phi_f=-0.2)
        delta_a, delta_b = equilibrium_angles(c)
        for k in (-2, -1, 0, 1, 2):
            for d in (delta_a, delta_b):
                rhs = pll_rhs((0.0, d + 2 * math.pi * k), c)
                assert math.hypot(*rhs) < 1e-10

    def test_periodicity_in_angle(self):
        c = coeffs()
        for dw, dl in ((0.05, 0.3), (-0.02, 2.0), (0.1, -1.0)):
            a = pll_rhs((dw, dl), c)
            b = pll_rhs((dw, dl + 2 * math.pi), c)
            assert a[0] == pytest.approx(b[0], abs=1e-12)
            assert a[1] == b[1]

    @given(dw=st.floats(-0.3, 0.3), dl=st.floats(-10, 10))
    def test_constant_damping_matches_frozen_coefficient(self, dw, dl):
        c = coeffs()
        frozen = damping(dl, c)
        assert pll_rhs((dw, dl), c)[0] == pytest.approx(
            pll_rhs((dw, dl), c, constant_damping=frozen)[0], abs=1e-12)


class TestEnergy:
    def test_undamped_energy_conserved(self):
        c = coeffs()
        delta_a, _ = equilibrium_angles(c)
        res = integrate_pll((0.0, delta_a + 0.5), [(1.0, c)], dt=1e-4,
                            constant_damping=0.0)
        e = np.array([swing_energy((w, d), c) for w, d in res.x])
        assert np.max(np.abs(e - e[0])) < 1e-6


class TestFirstSwing:
    def test_short_fault_recovers_long_fault_slips(self):
        pre, post = coeffs(), coeffs(k_f=0.2)
        assert simulate_first_swing(pre, post, 0.100).stable
        long = simulate_first_swing(pre, post, 0.500)
        assert not long.stable
        assert long.slipped

    def test_no_dip_never_destabilizes(self):
        pre = coeffs()
        res = simulate_first_swing(pre, pre, 2.0)
        assert res.stable
        assert res.d_omega_clear == 0.0


class TestPortrait:
    def test_large_speed_diverges_only_with_angle_dependent_damping(self):
        # the frozen-damping approximation hides the runaway of large states
        c = coeffs()
        delta_a, _ = equilibrium_angles(c)
        ic_w, ic_d = np.array([0.2]), np.array([delta_a])
        angle = pll_portrait(c, ic_w, ic_d, constant_damping=False)
        const = pll_portrait(c, ic_w, ic_d, constant_damping=True)
        assert angle.classes[0] is PortraitClass.DIVERGED
        assert const.classes[0] in (PortraitClass.CONVERGED_TO_TARGET,
                                    PortraitClass.CONVERGED_ELSEWHERE)

    def test_small_states_converge_to_principal_equilibrium(self):
        c = coeffs()
        delta_a, _ = equilibrium_angles(c)
        por = pll_portrait(c, np.array([0.0, 0.02]), np.array([delta_a - 0.4, delta_a + 0.4]))
        assert all(cls is PortraitClass.CONVERGED_TO_TARGET for cls in por.classes)
        assert all(s == 0 for s in por.slips)

    def test_shifted_wells_counted_as_slips(self):
        c = coeffs()
        delta_a, _ = equilibrium_angles(c)
        por = pll_portrait(c, np.array([0.0]), np.array([delta_a + 2 * math.pi]),
                           constant_damping=True)
        assert por.classes[0] is PortraitClass.CONVERGED_ELSEWHERE
        assert por.slips[0] == 1
