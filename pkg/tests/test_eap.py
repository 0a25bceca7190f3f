"""Equal-area margins: areas, critical clearing angle/time, and the simulation oracle."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vscstab.config import load_preset
from vscstab.eap import (
    CcaStatus,
    area,
    brute_force_cct,
    cct_sweep,
    estimate_cct,
    margin_report,
    solve_cca,
)
from vscstab.numerics import BracketError
from vscstab.pll import SwingCoeffs, equilibrium_angles, swing_coeffs


def make_curve(t_m=0.25, u_eff=1.0, phi=0.0, t_pll=0.3864490816987242):
    return SwingCoeffs(t_pll=t_pll, t_m=t_m, u_eff=u_eff, phi=phi,
                       kp_over_ki=0.025, omega_b=100.0 * math.pi, l_i=0.25)


class TestArea:
    def test_empty_interval(self):
        assert area(1.0, 1.0, 0.25, make_curve()) == 0.0

    def test_pure_sine_half_period(self):
        curve = make_curve(t_m=0.0, u_eff=0.7)
        assert area(0.0, math.pi, 0.0, curve) == pytest.approx(-1.4, abs=1e-12)

    def test_reversed_interval_rejected(self):
        with pytest.raises(ValueError):
            area(1.0, 0.0, 0.25, make_curve())

    @settings(max_examples=60, deadline=None)
    @given(
        a=st.floats(-2 * math.pi, 2 * math.pi),
        width=st.floats(0.0, 2 * math.pi),
        t_m=st.floats(-1.0, 1.0),
        u=st.floats(0.0, 1.5),
        phi=st.floats(-math.pi / 2, 0.0),
    )
    def test_matches_adaptive_quadrature(self, a, width, t_m, u, phi):
        from scipy.integrate import quad
        curve = make_curve(t_m=t_m, u_eff=u, phi=phi)
        closed = area(a, a + width, t_m, curve)
        numeric, _ = quad(lambda d: t_m - u * math.sin(d - phi), a, a + width,
                          limit=200)
        assert closed == pytest.approx(numeric, abs=1e-10)


class TestSolveCca:
    def test_no_dip_always_stable(self):
        pre = make_curve()
        assert solve_cca(pre, pre).status is CcaStatus.ALWAYS_STABLE

    def test_bolted_fault_closed_form(self):
        # with the feedback fully collapsed the balance has an explicit root:
        # cos(cca) = cos(delta_b) + (t_m/u) * (delta_b - delta_a)
        pre, post = make_curve(), make_curve(u_eff=0.0)
        res = solve_cca(pre, post)
        assert res.status is CcaStatus.FOUND
        expected = math.acos(math.cos(res.delta_b)
                             + 0.25 * (res.delta_b - res.delta_a))
        assert res.delta_cca == pytest.approx(expected, abs=1e-9)

    def test_partial_dip_closed_form(self):
        # general closed form of the area balance for a phase-free dip
        k_f = 0.2
        pre, post = make_curve(), make_curve(u_eff=0.2)
        res = solve_cca(pre, post)
        da, db = res.delta_a, res.delta_b
        expected = math.acos(
            (k_f * math.cos(da) - math.cos(db) - 0.25 * (db - da)) / (k_f - 1.0))
        assert res.delta_cca == pytest.approx(expected, abs=1e-9)

    def test_cca_ordering_and_area_balance(self):
        res = solve_cca(make_curve(), make_curve(u_eff=0.2))
        assert res.delta_a < res.delta_cca < res.delta_b
        assert res.s_accel == pytest.approx(res.s_decel_max, abs=1e-8)

    def test_shallow_dip_with_during_fault_equilibrium_rides_through(self):
        # the faulted curve still balances the drive, the swing peaks early
        res = solve_cca(make_curve(), make_curve(u_eff=0.26))
        assert res.status is CcaStatus.ALWAYS_STABLE

    def test_residual_monotone_where_post_below_pre(self):
        pre, post = make_curve(), make_curve(u_eff=0.15)
        res = solve_cca(pre, post)
        deltas = np.linspace(res.delta_a, res.delta_b, 200)
        r = [area(res.delta_a, d, pre.t_m, post) + area(d, res.delta_b, pre.t_m, pre)
             for d in deltas]
        assert all(b >= a - 1e-12 for a, b in zip(r, r[1:]))


class TestEstimate:
    def test_reference_case_value(self):
        # hand-derived from the closed-form balance at a 0.2 retained voltage:
        # cca = 2.25048 rad, accelerating area 0.180091, inertia 0.386449
        t = estimate_cct(2.2504789516002894, 0.25268025514207865,
                         0.18009126479189086, 0.3864490816987242, 100 * math.pi)
        assert t == pytest.approx(0.17513, abs=2e-5)
        assert 0.135 <= t <= 0.225

    def test_vanishing_swept_angle(self):
        t = estimate_cct(0.2527, 0.2527, 0.18, 0.386, 100 * math.pi)
        assert t == 0.0

    def test_no_accelerating_area_sentinel(self):
        assert math.isinf(estimate_cct(1.0, 0.25, 0.0, 0.386, 100 * math.pi))

    def test_monotone_in_swept_angle(self):
        args = (0.18, 0.386, 100 * math.pi)
        prev = 0.0
        for cca in np.linspace(0.3, 2.8, 10):
            t = estimate_cct(cca, 0.2527, *args)
            assert t > prev
            prev = t


class TestBruteForce:
    def test_reference_bracket(self, default_params):
        cct = brute_force_cct(default_params, 0.2, t_lo=0.05, t_hi=0.5)
        assert 0.100 < cct < 0.300

    def test_probe_consistency_around_oracle(self, default_params):
        rep = margin_report(default_params, 0.2, with_oracle=True)
        probes = dict(rep.first_swing_stable_at)
        assert probes[0.9 * rep.t_cct_oracle] == "stable"
        assert probes[1.1 * rep.t_cct_oracle] == "unstable"

    def test_no_dip_always_stable(self, default_params):
        assert math.isinf(brute_force_cct(default_params, 1.0, t_lo=0.05, t_hi=0.4))

    def test_invalid_bracket_reports_verdicts(self, default_params):
        with pytest.raises(BracketError, match="unstable"):
            brute_force_cct(default_params, 0.0, t_lo=0.35, t_hi=0.5)

    def test_estimate_within_thirty_percent_of_oracle(self):
        cfg = load_preset("fig6a")
        cells = cct_sweep(cfg.params, [10.0, 20.0], [0.0, 0.1, 0.15],
                          with_oracle=True)
        for c in cells:
            assert abs(c.t_cct_est - c.t_cct_oracle) <= 0.30 * c.t_cct_oracle, \
                f"bw={c.bandwidth_hz} k_f={c.k_f}: {c.t_cct_est} vs {c.t_cct_oracle}"


class TestSweep:
    def test_single_cell_matches_direct_solve(self, default_params):
        from dataclasses import replace
        from vscstab.params import pll_gains_from_bandwidth
        cells = cct_sweep(default_params, [20.0], [0.2])
        kp, ki = pll_gains_from_bandwidth(20.0)
        params = replace(default_params,
                         ctrl=replace(default_params.ctrl, pll_kp=kp, pll_ki=ki))
        rep = margin_report(params, 0.2)
        assert cells[0].t_cct_est == rep.t_cct_estimate
        assert cells[0].delta_cca == rep.delta_cca

    def test_cct_strictly_decreasing_in_bandwidth(self):
        cfg = load_preset("fig6a")
        cells = cct_sweep(cfg.params, [5.0, 10.0, 15.0, 20.0, 25.0], [0.1])
        ests = [c.t_cct_est for c in cells]
        assert all(a > b for a, b in zip(ests, ests[1:]))

    def test_dip_sensitivity_shrinks_at_high_bandwidth(self):
        cfg = load_preset("fig6a")
        dips = [0.0, 0.05, 0.1, 0.15]
        lo = [c.t_cct_est for c in cct_sweep(cfg.params, [5.0], dips)]
        hi = [c.t_cct_est for c in cct_sweep(cfg.params, [20.0], dips)]
        assert max(hi) - min(hi) < max(lo) - min(lo)

    def test_sentinels_propagate(self, default_params):
        cells = cct_sweep(default_params, [20.0], [1.0])
        assert cells[0].verdict == CcaStatus.ALWAYS_STABLE.value
        assert math.isinf(cells[0].t_cct_est)


class TestMarginReport:
    def test_ordering_invariant(self, default_params):
        rep = margin_report(default_params, 0.2)
        assert rep.delta_a < rep.delta_cca < rep.delta_b
        assert abs(rep.s_accel - rep.s_decel_max) < 1e-8

    def test_serializable(self, default_params):
        import json
        rep = margin_report(default_params, 1.0)
        payload = json.loads(json.dumps(rep.to_dict()))
        assert payload["status"] == "ALWAYS_STABLE"
        assert payload["t_cct_estimate"] is None

    def test_drive_mismatch_rejected(self):
        with pytest.raises(ValueError, match="drives must match"):
            solve_cca(make_curve(t_m=0.25), make_curve(t_m=0.3))
