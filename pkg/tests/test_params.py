"""Parameter construction, validation and the retained-voltage factor."""

import cmath
import math

import pytest
from hypothesis import given, strategies as st

from vscstab.params import (
    ControllerParams,
    FaultSpec,
    GridParams,
    OperatingPoint,
    PerUnitBase,
    SystemParams,
    fault_factor,
    pll_gains_from_bandwidth,
    pq_gains_from_bandwidth,
    validate_params,
)


def make_params(**grid_kw) -> SystemParams:
    grid = GridParams(scr=grid_kw.pop("scr", 4.0),
                      l_sigma_t=grid_kw.pop("l_sigma_t", 0.25), **grid_kw)
    return SystemParams(base=PerUnitBase(), grid=grid,
                        ctrl=ControllerParams(pll_kp=20.0, pll_ki=800.0),
                        op=OperatingPoint())


class TestConstruction:
    def test_omega_b_exact(self):
        base = PerUnitBase(s_base=2e6, u_base=690.0, f_base=50.0)
        assert base.omega_b == 2.0 * math.pi * 50.0

    def test_nameplate_values_with_scr_4_are_valid(self):
        params = make_params()
        report = validate_params(params)
        assert report.ok
        assert params.grid.l_sigma == 0.25

    def test_l_sigma_times_scr_is_one(self):
        for scr in (0.5, 1.0, 2.5, 4.0, 10.0):
            grid = GridParams(scr=scr, l_sigma_t=0.0)
            assert grid.l_sigma * scr == pytest.approx(1.0, abs=1e-15)


class TestValidation:
    def test_zero_scr_reported(self):
        report = validate_params(make_params(scr=0.0, l_sigma_t=0.0))
        assert "scr > 0" in report.violations

    def test_lump_ordering_violation(self):
        report = validate_params(make_params(l_sigma_t=0.3))
        assert any("l_sigma >= l_sigma_t" in v for v in report.violations)

    def test_negative_integral_gain(self):
        params = make_params()
        bad = SystemParams(base=params.base, grid=params.grid,
                           ctrl=ControllerParams(pll_kp=20.0, pll_ki=-1.0),
                           op=params.op)
        assert "pll_ki > 0" in validate_params(bad).violations

    def test_freq_limit_must_exceed_one(self):
        params = make_params()
        bad = SystemParams(base=params.base, grid=params.grid, ctrl=params.ctrl,
                           op=OperatingPoint(freq_limit=1.0))
        assert "freq_limit > 1.0" in validate_params(bad).violations

    def test_fault_ordering(self):
        fault = FaultSpec(k_f_mag=0.2, t_apply=2.0, t_clear=1.0)
        report = validate_params(make_params(), fault)
        assert "t_clear > t_apply" in report.violations

    def test_fault_factor_consistency_checked(self):
        params = make_params(z_s=0.05j)
        good = FaultSpec(k_f_mag=2.0 / 3.0, phi_f=0.0, t_apply=2.0, t_clear=2.1,
                         z_f=0.1j)
        assert validate_params(params, good).ok
        bad = FaultSpec(k_f_mag=0.5, phi_f=0.0, t_apply=2.0, t_clear=2.1, z_f=0.1j)
        assert not validate_params(params, bad).ok


class TestFaultFactor:
    def test_bolted_fault(self):
        assert fault_factor(0j, 0.05j) == (0.0, 0.0)

    def test_both_inductive_no_phase_shift(self):
        mag, phi = fault_factor(0.1j, 0.05j)
        assert mag == pytest.approx(2.0 / 3.0, abs=1e-15)
        assert phi == pytest.approx(0.0, abs=1e-15)

    def test_resistive_branch_phase_in_band(self):
        # resistive short-circuit branch against an inductive source
        _, phi = fault_factor(0.1 + 0j, 0.05j)
        assert -math.pi / 2 < phi <= 0.0

    def test_degenerate_divisor(self):
        with pytest.raises(ValueError, match="ill-posed"):
            fault_factor(0.1j, -0.1j)

    @given(
        zf=st.complex_numbers(min_magnitude=1e-3, max_magnitude=10, allow_nan=False,
                              allow_infinity=False),
        zs=st.complex_numbers(min_magnitude=1e-3, max_magnitude=10, allow_nan=False,
                              allow_infinity=False),
        c=st.complex_numbers(min_magnitude=1e-2, max_magnitude=100, allow_nan=False,
                             allow_infinity=False),
    )
    def test_scale_invariance(self, zf, zs, c):
        if abs(zf + zs) < 1e-6 * max(abs(zf), abs(zs)):
            return
        mag1, phi1 = fault_factor(zf, zs)
        mag2, phi2 = fault_factor(c * zf, c * zs)
        assert mag2 == pytest.approx(mag1, rel=1e-9, abs=1e-12)
        assert cmath.exp(1j * phi2) == pytest.approx(cmath.exp(1j * phi1), abs=1e-9)

    @given(
        mags=st.lists(st.floats(min_value=1e-3, max_value=10), min_size=2,
                      max_size=2, unique=True),
        angle=st.floats(min_value=-math.pi / 2, max_value=math.pi / 2),
    )
    def test_monotone_in_branch_magnitude_at_common_angle(self, mags, angle):
        zs = cmath.rect(0.05, angle)
        lo, hi = sorted(mags)
        mag_lo, _ = fault_factor(cmath.rect(lo, angle), zs)
        mag_hi, _ = fault_factor(cmath.rect(hi, angle), zs)
        assert mag_hi >= mag_lo - 1e-12


class TestGainMappings:
    def test_pll_anchor_pairing(self):
        assert pll_gains_from_bandwidth(20.0) == (20.0, 800.0)

    def test_pll_monotone(self):
        gains = [pll_gains_from_bandwidth(b) for b in (5, 10, 15, 20, 25)]
        assert all(g2 > g1 for (g1, _), (g2, _) in zip(gains, gains[1:]))
        assert all(g2 > g1 for (_, g1), (_, g2) in zip(gains, gains[1:]))

    def test_pq_first_order_pole(self):
        kp, ki = pq_gains_from_bandwidth(10.0)
        assert ki == pytest.approx(2.0 * math.pi * 10.0)
        assert kp == 0.1
