"""Integrator and root-finder kernels against analytic solutions."""

import math

import numpy as np
import pytest

from vscstab.numerics import (
    BracketError,
    IntegratorConfig,
    bisect,
    rk4_integrate,
)


class TestRk4:
    def test_zero_field_constant(self):
        res = rk4_integrate(lambda t, x: np.zeros_like(x), [1.0, -2.0],
                            IntegratorConfig(dt=0.01, t_end=1.0))
        assert np.all(res.x == np.array([1.0, -2.0]))

    def test_exponential_decay(self):
        res = rk4_integrate(lambda t, x: -x, [1.0],
                            IntegratorConfig(dt=1e-3, t_end=1.0))
        assert res.x[-1][0] == pytest.approx(math.exp(-1.0), abs=1e-9)

    def test_order_four_on_decay(self):
        errs = []
        for dt in (0.02, 0.01):
            res = rk4_integrate(lambda t, x: -x, [1.0],
                                IntegratorConfig(dt=dt, t_end=1.0))
            errs.append(abs(res.x[-1][0] - math.exp(-1.0)))
        order = math.log2(errs[0] / errs[1])
        assert 3.5 < order < 4.5

    def test_order_four_on_pendulum_period(self):
        # release from rest; after one exact period the state must return
        amp = 2.0
        a, b = 1.0, math.cos(amp / 2.0)
        for _ in range(40):
            a, b = 0.5 * (a + b), math.sqrt(a * b)
        period = 2.0 * math.pi / a
        errs = []
        for n in (128, 256):
            res = rk4_integrate(lambda t, x: np.array([x[1], -math.sin(x[0])]),
                                [amp, 0.0],
                                IntegratorConfig(dt=period / n, t_end=period))
            errs.append(np.linalg.norm(res.x[-1] - np.array([amp, 0.0])))
        order = math.log2(errs[0] / errs[1])
        assert 3.5 < order < 4.5

    def test_event_applied_at_snapped_time(self):
        events = [(0.5, lambda x: x + 10.0)]
        res = rk4_integrate(lambda t, x: np.zeros_like(x), [0.0],
                            IntegratorConfig(dt=0.1, t_end=1.0), events=events)
        idx = np.searchsorted(res.t, 0.5)
        assert res.x[idx - 1][0] == 0.0
        assert res.x[idx][0] == 10.0
        assert res.x[-1][0] == 10.0

    def test_unsorted_events_rejected(self):
        events = [(0.5, lambda x: x), (0.2, lambda x: x)]
        with pytest.raises(ValueError, match="sorted"):
            rk4_integrate(lambda t, x: x, [1.0],
                          IntegratorConfig(dt=0.1, t_end=1.0), events=events)

    def test_blowup_stops_early(self):
        res = rk4_integrate(lambda t, x: 10.0 * x, [1.0],
                            IntegratorConfig(dt=0.1, t_end=10.0, blowup_norm=100.0))
        assert res.blew_up
        assert res.t_blowup is not None
        assert res.t[-1] < 10.0

    def test_record_stride(self):
        res = rk4_integrate(lambda t, x: -x, [1.0],
                            IntegratorConfig(dt=0.01, t_end=1.0, record_every=10))
        assert len(res.t) == 11
        assert res.t[-1] == pytest.approx(1.0)


class TestBisect:
    def test_linear_root(self):
        assert bisect(lambda x: x - 0.5, 0.0, 1.0, 1e-12) == pytest.approx(0.5, abs=1e-12)

    def test_drive_balance_angle(self):
        # sin(delta) = 0.25 at 0.2527 rad, the reference equilibrium angle
        root = bisect(lambda d: math.sin(d) - 0.25, 0.0, math.pi / 2, 1e-12)
        assert root == pytest.approx(0.25268025514207865, abs=1e-11)
        assert root == pytest.approx(0.253, abs=1e-3)

    def test_iteration_budget(self):
        calls = {"n": 0}

        def f(x):
            calls["n"] += 1
            return x - math.pi / 10

        lo, hi, tol = 0.0, 1.0, 1e-6
        root = bisect(f, lo, hi, tol)
        budget = math.ceil(math.log2((hi - lo) / tol)) + 2   # + endpoint evals
        assert calls["n"] <= budget
        assert abs(root - math.pi / 10) <= tol

    def test_endpoint_roots_returned(self):
        assert bisect(lambda x: x, 0.0, 1.0, 1e-9) == 0.0
        assert bisect(lambda x: x - 1.0, 0.0, 1.0, 1e-9) == 1.0

    def test_invalid_bracket_reports_values(self):
        with pytest.raises(BracketError) as err:
            bisect(lambda x: x + 2.0, 0.0, 1.0, 1e-9)
        assert "f(lo)=2" in str(err.value)
        assert "f(hi)=3" in str(err.value)
