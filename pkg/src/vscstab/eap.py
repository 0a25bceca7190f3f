"""Equal-area stability margins: critical clearing angle and time.

During a voltage dip the angle-feedback curve drops from ``u_pre*sin(delta)``
to ``k_f*u_pre*sin(delta - phi_f)`` while the drive ``t_m`` stays put, so the
state accelerates and accumulates the area

    S_I(delta_c) = integral from delta_a to delta_c of (t_m - t_e_post)

After clearing at angle ``delta_c`` the pre-fault curve is restored and at most

    S_II_max(delta_c) = integral from delta_c to delta_b of (t_e_pre - t_m)

can be absorbed before the angle reaches the unstable equilibrium ``delta_b``.
The critical clearing angle is the root of ``S_I - S_II_max`` (monotone in
``delta_c`` whenever the faulted curve lies below the pre-fault one), found by
bisection to 1e-10 rad. The undamped energy balance converts the accelerating
area into a clearing speed, and a mean-speed factor ``k0 = 2/3`` turns the
swept angle into the clearing-time estimate

    t_cct = ((delta_cca - delta_a) / k0) * sqrt(t_pll / (2 * S_I * omega_b))

A clearing-time bisection over full nonlinear simulations (angle-dependent
damping, first-swing verdict) serves as the independent oracle for that
estimate; both live in the margin report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

from . import pll
from .numerics import BracketError, bisect
from .params import SystemParams, pll_gains_from_bandwidth
from .pll import SwingCoeffs, simulate_first_swing, swing_coeffs

K0_MEAN_SPEED = 2.0 / 3.0
CCA_TOL_RAD = 1e-10
CCT_TOL_S = 1e-3


class CcaStatus(str, Enum):
    FOUND = "FOUND"
    NO_MARGIN = "NO_MARGIN"
    ALWAYS_STABLE = "ALWAYS_STABLE"


@dataclass(frozen=True)
class CcaResult:
    status: CcaStatus
    delta_a: float
    delta_b: float
    delta_cca: float | None = None
    s_accel: float | None = None
    s_decel_max: float | None = None


@dataclass
class MarginReport:
    delta_a: float
    delta_b: float
    delta_cca: float | None
    s_accel: float | None
    s_decel_max: float | None
    t_cct_estimate: float          # math.inf when no finite clearing time destabilizes
    t_cct_oracle: float | None = None
    first_swing_stable_at: list[tuple[float, str]] = field(default_factory=list)
    status: str = CcaStatus.FOUND.value

    def to_dict(self) -> dict:
        def _num(x):
            if x is None or (isinstance(x, float) and not math.isfinite(x)):
                return None
            return x
        return {
            "delta_a": self.delta_a,
            "delta_b": self.delta_b,
            "delta_cca": _num(self.delta_cca),
            "s_accel": _num(self.s_accel),
            "s_decel_max": _num(self.s_decel_max),
            "t_cct_estimate": _num(self.t_cct_estimate),
            "t_cct_oracle": _num(self.t_cct_oracle),
            "first_swing_stable_at": [[t, v] for t, v in self.first_swing_stable_at],
            "status": self.status,
        }


def area(delta_from: float, delta_to: float, t_m: float, curve: SwingCoeffs) -> float:
    """Closed-form ``integral of (t_m - u_eff*sin(delta - phi))`` over the interval."""
    if delta_to < delta_from:
        raise ValueError("need delta_from <= delta_to")
    u, ph = curve.u_eff, curve.phi
    return (t_m * (delta_to - delta_from)
            + u * (math.cos(delta_to - ph) - math.cos(delta_from - ph)))


def _during_fault_reach(pre_a: float, pre_b: float, t_m: float,
                        post: SwingCoeffs) -> float:
    """Largest angle the undamped during-fault swing can reach within [a, b].

    If the faulted curve re-balances the drive inside the window, the swing
    peaks where the accumulated accelerating area returns to zero; beyond that
    angle no clearing can happen on the first swing.
    """
    s_end = area(pre_a, pre_b, t_m, post)
    if s_end > 0.0:
        return pre_b
    # accelerating area peaks at the first during-fault balance angle
    ratio = t_m / post.u_eff if post.u_eff > 0 else math.inf
    if abs(ratio) > 1.0:
        return pre_b
    balance = math.asin(ratio) + post.phi
    while balance < pre_a:
        balance += 2.0 * math.pi
    if balance >= pre_b:
        return pre_b
    if area(pre_a, balance, t_m, post) <= 0.0:
        return balance
    return bisect(lambda d: area(pre_a, d, t_m, post), balance, pre_b, CCA_TOL_RAD)


def solve_cca(pre: SwingCoeffs, post: SwingCoeffs) -> CcaResult:
    """Critical clearing angle from the accelerating/decelerating area balance.

    Outcomes: FOUND with the interior root; ALWAYS_STABLE when the accumulated
    accelerating area never exceeds what the restored curve can absorb (e.g.
    no voltage dip at all); NO_MARGIN when even instant clearing cannot hold
    the first swing.
    """
    if abs(pre.t_m - post.t_m) > 1e-9:
        raise ValueError("pre- and post-fault drives must match (constant current)")
    t_m = pre.t_m
    eq = pll.equilibrium_angles(pre)
    if eq is None:
        raise ValueError("no pre-fault equilibrium: t_m exceeds the feedback peak")
    delta_a, delta_b = eq

    def residual(delta_c: float) -> float:
        return area(delta_a, delta_c, t_m, post) + area(delta_c, delta_b, t_m, pre)

    reach = _during_fault_reach(delta_a, delta_b, t_m, post)
    if reach <= delta_a or residual(reach) <= 0.0:
        return CcaResult(CcaStatus.ALWAYS_STABLE, delta_a, delta_b)
    if residual(delta_a) >= 0.0:
        return CcaResult(CcaStatus.NO_MARGIN, delta_a, delta_b)

    delta_cca = bisect(residual, delta_a, reach, CCA_TOL_RAD)
    s_accel = area(delta_a, delta_cca, t_m, post)
    s_decel = -area(delta_cca, delta_b, t_m, pre)
    return CcaResult(CcaStatus.FOUND, delta_a, delta_b, delta_cca, s_accel, s_decel)


def estimate_cct(delta_cca: float, delta_a: float, s_accel: float,
                 t_pll: float, omega_b: float, k0: float = K0_MEAN_SPEED) -> float:
    """Clearing-time estimate from the undamped energy balance.

    The clearing speed follows from ``0.5 * t_pll * omega_b * d_omega**2 =
    S_I`` and the swept angle from the mean-speed approximation
    ``delta_cca - delta_a ~= k0 * omega_b * d_omega_clear * t_cct``.
    Returns ``inf`` when there is no accelerating area.
    """
    if t_pll <= 0.0:
        raise ValueError("t_pll > 0 required")
    if s_accel <= 0.0:
        return math.inf
    return ((delta_cca - delta_a) / k0) * math.sqrt(t_pll / (2.0 * s_accel * omega_b))


def brute_force_cct(params: SystemParams, k_f_mag: float, phi_f: float = 0.0,
                    t_lo: float = 0.02, t_hi: float = 0.8,
                    tol: float = CCT_TOL_S, dt: float = 1e-4,
                    observe: float = 5.0) -> float:
    """Bisection on the clearing time over full nonlinear first-swing runs.

    Independent of the equal-area path: every probe integrates the swing model
    with angle-dependent damping and applies the pole-slip / zero-crossing
    verdict. Returns ``inf`` when no clearing time (up to a widened bracket)
    destabilizes the system; raises :class:`BracketError` when the short end
    of the bracket is already unstable.
    """
    pre = swing_coeffs(params.base, params.grid, params.ctrl, params.op)
    post = swing_coeffs(params.base, params.grid, params.ctrl, params.op,
                        k_f_mag=k_f_mag, phi_f=phi_f)

    def stable(tc: float) -> bool:
        return simulate_first_swing(pre, post, tc, dt=dt, observe=observe).stable

    hi = t_hi
    for _ in range(3):
        if not stable(hi):
            break
        hi *= 2.0
    else:
        return math.inf

    lo = t_lo
    for _ in range(3):
        if stable(lo):
            break
        lo *= 0.5
    else:
        raise BracketError(
            f"unstable already at t_clear={lo:g}s (and stable nowhere below); "
            f"verdicts: lo=unstable, hi={hi:g}s=unstable"
        )

    return bisect(lambda tc: -1.0 if stable(tc) else 1.0, lo, hi, tol)


def margin_report(params: SystemParams, k_f_mag: float, phi_f: float = 0.0,
                  with_oracle: bool = False, dt: float = 1e-4) -> MarginReport:
    """Assemble the full stability-margin record for one fault depth."""
    pre = swing_coeffs(params.base, params.grid, params.ctrl, params.op)
    post = swing_coeffs(params.base, params.grid, params.ctrl, params.op,
                        k_f_mag=k_f_mag, phi_f=phi_f)
    cca = solve_cca(pre, post)
    if cca.status is CcaStatus.FOUND:
        t_est = estimate_cct(cca.delta_cca, cca.delta_a, cca.s_accel,
                             pre.t_pll, pre.omega_b)
    else:
        t_est = math.inf if cca.status is CcaStatus.ALWAYS_STABLE else 0.0
    report = MarginReport(
        delta_a=cca.delta_a, delta_b=cca.delta_b, delta_cca=cca.delta_cca,
        s_accel=cca.s_accel, s_decel_max=cca.s_decel_max,
        t_cct_estimate=t_est, status=cca.status.value,
    )
    if with_oracle and cca.status is CcaStatus.FOUND:
        oracle = brute_force_cct(params, k_f_mag, phi_f, dt=dt)
        report.t_cct_oracle = oracle
        if math.isfinite(oracle):
            for tc in (0.9 * oracle, 1.1 * oracle):
                res = simulate_first_swing(pre, post, tc, dt=dt)
                report.first_swing_stable_at.append(
                    (tc, "stable" if res.stable else "unstable"))
    return report


@dataclass(frozen=True)
class SweepCell:
    bandwidth_hz: float
    k_f: float
    delta_a: float
    delta_cca: float | None
    s_accel: float | None
    t_cct_est: float
    t_cct_oracle: float | None
    verdict: str


def cct_sweep(params: SystemParams, bandwidths_hz: list[float],
              dips: list[float], phi_f: float = 0.0,
              with_oracle: bool = False, dt: float = 1e-4) -> list[SweepCell]:
    """Clearing-time margins over a (bandwidth, dip-depth) grid.

    Each bandwidth is mapped to PI gains through
    :func:`vscstab.params.pll_gains_from_bandwidth`; cells are independent, so
    the table is deterministic regardless of evaluation order.
    """
    cells: list[SweepCell] = []
    for bw in bandwidths_hz:
        kp, ki = pll_gains_from_bandwidth(bw)
        ctrl = replace(params.ctrl, pll_kp=kp, pll_ki=ki, pll_bandwidth_hz=bw)
        p = replace(params, ctrl=ctrl)
        for k_f in dips:
            rep = margin_report(p, k_f, phi_f, with_oracle=with_oracle, dt=dt)
            cells.append(SweepCell(
                bandwidth_hz=bw, k_f=k_f, delta_a=rep.delta_a,
                delta_cca=rep.delta_cca, s_accel=rep.s_accel,
                t_cct_est=rep.t_cct_estimate, t_cct_oracle=rep.t_cct_oracle,
                verdict=rep.status,
            ))
    return cells
