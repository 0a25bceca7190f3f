"""Time-domain scenario engine: swing dynamics + power loop + limits + fault events.

Couples the unwrapped tracking state ``(d_omega, delta)`` with, in the outer-
loop modes, the power-regulator integrators ``(x_d, x_q)``. The network is
quasi-static: converter currents equal the (limited) references, the PCC
voltage holds its pre-fault phasor magnitude and is only rescaled/shifted by
the retained-voltage factor while the fault is on. Fault application and
clearing are snapped to integration grid points, so a run is bit-deterministic
for a given configuration.

Modes
-----
CONST_CURRENT_REFS   references frozen at the operating point (limited once)
PQ_OUTER_LOOP        PI regulation of P and Q produces the references
Q_REF_ZERO           P regulated, q-axis reference forced to zero

The current limiter clamps the reference magnitude each evaluation; D_AXIS
priority keeps the active current and trims the reactive one first,
PROPORTIONAL preserves the vector direction. The tracked frequency is hard-
clamped to ``freq_clamp`` after every step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .numerics import NumericalBlowUp, bisect
from .params import ConfigError, FaultSpec, SystemParams, validate_params
from .pcl import AlgebraicLoopError, steady_current_solutions
from .pll import prefault_pcc_voltage


class Mode(str, Enum):
    CONST_CURRENT_REFS = "CONST_CURRENT_REFS"
    PQ_OUTER_LOOP = "PQ_OUTER_LOOP"
    Q_REF_ZERO = "Q_REF_ZERO"


class LimiterPriority(str, Enum):
    D_AXIS = "D_AXIS"
    PROPORTIONAL = "PROPORTIONAL"


class SyncClass(str, Enum):
    SYNCHRONIZED = "SYNCHRONIZED"
    LOST_SYNC = "LOST_SYNC"
    MARGINAL = "MARGINAL"


@dataclass(frozen=True)
class LimiterSpec:
    i_max: float = 1.1
    priority: LimiterPriority = LimiterPriority.D_AXIS
    freq_clamp: float = 1.1

    def __post_init__(self) -> None:
        if self.i_max <= 0:
            raise ValueError("i_max > 0 required")
        if self.freq_clamp <= 1.0:
            raise ValueError("freq_clamp > 1 required")


@dataclass(frozen=True)
class Scenario:
    params: SystemParams
    fault: FaultSpec
    mode: Mode = Mode.CONST_CURRENT_REFS
    t_end: float = 4.0
    dt: float = 1e-4
    limiter: LimiterSpec = LimiterSpec()


@dataclass
class Trajectory:
    t: np.ndarray
    delta: np.ndarray
    d_omega: np.ndarray
    i_cd_ref: np.ndarray
    i_cq_ref: np.ndarray
    p: np.ndarray
    q: np.ndarray
    u_pcc: np.ndarray
    limiter_active: np.ndarray
    events: list[tuple[float, str]]
    delta_eq: float                  # pre-fault equilibrium angle, reference for slips


@dataclass(frozen=True)
class SyncVerdict:
    classification: SyncClass
    slips: int
    peak_freq_pu: float
    peak_delta_rad: float

    def to_dict(self) -> dict:
        return {
            "classification": self.classification.value,
            "slips": self.slips,
            "peak_freq_pu": self.peak_freq_pu,
            "peak_delta_rad": self.peak_delta_rad,
        }


@dataclass(frozen=True)
class DeltaReport:
    """Head-to-head difference between a Q-regulated and a zero-q-reference run."""

    max_freq_diff: float
    max_delta_diff: float
    peak_freq_dev: float
    freq_diff_ratio: float     # max_freq_diff / peak_freq_dev


def apply_current_limit(i_d: float, i_q: float,
                        spec: LimiterSpec) -> tuple[float, float, bool]:
    """Clamp a reference pair to the magnitude limit; returns (d, q, clamped)."""
    mag = math.hypot(i_d, i_q)
    if mag <= spec.i_max:
        return i_d, i_q, False
    if spec.priority is LimiterPriority.PROPORTIONAL:
        s = spec.i_max / mag
        return i_d * s, i_q * s, True
    d = max(-spec.i_max, min(spec.i_max, i_d))
    room = math.sqrt(max(spec.i_max ** 2 - d * d, 0.0))
    q = max(-room, min(room, i_q))
    return d, q, True


def _poc_power(i_d: float, i_q: float, delta: float, u_eff: float, phi: float,
               x_line: float, r_line: float) -> tuple[float, float]:
    """Terminal power against the retained PCC voltage through the line lump."""
    mag2 = i_d * i_d + i_q * i_q
    c = math.cos(delta - phi)
    s = math.sin(delta - phi)
    p = r_line * mag2 + u_eff * (i_d * c - i_q * s)
    q = x_line * mag2 - u_eff * (i_d * s + i_q * c)
    return p, q


def _steady_operating_point(p_ref: float, q_ref: float, u: float, x_line: float,
                            r_line: float, q_zero: bool) -> tuple[float, float, float]:
    """Pre-fault ``(i_d, i_q, delta)`` meeting the setpoints with the loop locked."""
    if r_line == 0.0 and not q_zero:
        for i_d, i_q, theta in steady_current_solutions(p_ref, q_ref, u, x_line):
            if math.cos(theta) > 0.0:
                return i_d, i_q, theta
        raise ConfigError("power transfer infeasible: no steady operating point")

    def residuals(v: np.ndarray) -> np.ndarray:
        i_d, i_q = float(v[0]), float(v[1])
        arg = (x_line * i_d + r_line * i_q) / u
        if abs(arg) > 1.0:
            return np.array([1e3 * arg, 1e3 * arg])
        delta = math.asin(arg)
        p, q = _poc_power(i_d, i_q, delta, u, 0.0, x_line, r_line)
        if q_zero:
            return np.array([p - p_ref, i_q])
        return np.array([p - p_ref, q - q_ref])

    v = np.array([p_ref / u, 0.0 if q_zero else -q_ref / u])
    for _ in range(80):
        f = residuals(v)
        if max(abs(f[0]), abs(f[1])) < 1e-12:
            break
        h = 1e-8
        j00 = (residuals(v + [h, 0])[0] - f[0]) / h
        j01 = (residuals(v + [0, h])[0] - f[0]) / h
        j10 = (residuals(v + [h, 0])[1] - f[1]) / h
        j11 = (residuals(v + [0, h])[1] - f[1]) / h
        det = j00 * j11 - j01 * j10
        if det == 0.0:
            raise ConfigError("steady operating point solve is singular")
        v = v - np.array([(j11 * f[0] - j01 * f[1]) / det,
                          (-j10 * f[0] + j00 * f[1]) / det])
    else:
        raise ConfigError("steady operating point solve did not converge")
    i_d, i_q = float(v[0]), float(v[1])
    delta = math.asin((x_line * i_d + r_line * i_q) / u)
    return i_d, i_q, delta


def run_scenario(scn: Scenario) -> Trajectory:
    """Fixed-step RK4 run of a fault scenario; see the module docstring.

    Raises :class:`ConfigError` on an invalid configuration and
    :class:`NumericalBlowUp` (with the last good time) if the state leaves the
    finite range.
    """
    params, fault, lim = scn.params, scn.fault, scn.limiter
    report = validate_params(params, fault)
    if not report.ok:
        raise ConfigError("invalid scenario parameters: " + "; ".join(report.violations))
    if fault.t_clear is None:
        raise ConfigError("scenario needs fault.t_clear")
    if scn.dt <= 0:
        raise ConfigError("dt > 0 required")
    if not scn.t_end > fault.t_clear:
        raise ConfigError("t_end > fault.t_clear required")

    grid, ctrl, op, base = params.grid, params.ctrl, params.op, params.base
    dt = scn.dt
    n_steps = int(round(scn.t_end / dt))
    n_apply = int(round(fault.t_apply / dt))
    n_clear = int(round(fault.t_clear / dt))
    if not 0 <= n_apply < n_clear <= n_steps:
        raise ConfigError("fault events must fall inside the run, in order")

    u0 = abs(prefault_pcc_voltage(grid, op))
    k_f, phi_f = fault.k_f_mag, fault.phi_f
    x_line = grid.omega_s * grid.l_sigma_t
    r_line = grid.r_sigma_t
    omega_b = base.omega_b
    kp_pll, ki_pll = ctrl.pll_kp, ctrl.pll_ki
    kp_pq, ki_pq = ctrl.pq_kp, ctrl.pq_ki
    l_sigma = grid.l_sigma
    koi = kp_pll / ki_pll
    dw_max = lim.freq_clamp - 1.0
    p_ref, q_ref = op.p_ref, op.q_ref
    q_zero = scn.mode is Mode.Q_REF_ZERO
    outer = scn.mode is not Mode.CONST_CURRENT_REFS

    sin, cos = math.sin, math.cos

    # pre-fault equilibrium
    if outer:
        i_d0, i_q0, delta0 = _steady_operating_point(p_ref, q_ref, u0, x_line,
                                                     r_line, q_zero)
        i_d0, i_q0, _ = apply_current_limit(i_d0, i_q0, lim)
        x_d, x_q = i_d0, -i_q0
        const_refs = None
    else:
        rd, rq, lim0 = apply_current_limit(op.i_cd_ref, op.i_cq_ref, lim)
        t_m0 = x_line * rd + r_line * rq
        if abs(t_m0) > u0:
            raise ConfigError("no synchronization equilibrium: drive exceeds feedback peak")
        delta0 = math.asin(t_m0 / u0)
        const_refs = (rd, rq, lim0)
        x_d = x_q = 0.0

    warm = [i_d0, i_q0] if outer else None

    def raw_refs(i_d: float, i_q: float, delta: float, u_eff: float,
                 phi: float) -> tuple[float, float]:
        p, q = _poc_power(i_d, i_q, delta, u_eff, phi, x_line, r_line)
        rd = xd_xq_raw[0] + kp_pq * (p_ref - p)
        rq = 0.0 if q_zero else (-xd_xq_raw[1] - kp_pq * (q_ref - q))
        return rd, rq

    xd_xq_raw = [0.0, 0.0]

    def _boundary_solve(delta: float, u_eff: float,
                        phi: float) -> tuple[float, float, bool]:
        """Outer-loop algebra with the limit engaged, solved on the boundary.

        The d-axis-priority clamp is expansive near the (i_max, 0) corner, so
        plain iteration may cycle there; the fixed point then either sits at a
        corner or on the arc with the q component saturated, both 1-D problems.
        """
        imax = lim.i_max
        if lim.priority is LimiterPriority.PROPORTIONAL:
            def resid(ang: float) -> float:
                rd, rq = raw_refs(imax * math.cos(ang), imax * math.sin(ang),
                                  delta, u_eff, phi)
                d = math.atan2(rq, rd) - ang
                return (d + math.pi) % (2.0 * math.pi) - math.pi
            grid_a = [(-math.pi) + k * (2.0 * math.pi / 72) for k in range(73)]
            vals = [resid(a) for a in grid_a]
            for a0, a1, f0, f1 in zip(grid_a[:-1], grid_a[1:], vals[:-1], vals[1:]):
                if f0 == 0.0 or (f0 * f1 < 0.0 and abs(f0) + abs(f1) < math.pi):
                    ang = a0 if f0 == 0.0 else bisect(resid, a0, a1, 1e-13)
                    i_d, i_q = imax * math.cos(ang), imax * math.sin(ang)
                    rd, rq = raw_refs(i_d, i_q, delta, u_eff, phi)
                    if math.hypot(rd, rq) >= imax - 1e-9:
                        return i_d, i_q, True
        else:
            for sd in (1.0, -1.0):
                rd, rq = raw_refs(sd * imax, 0.0, delta, u_eff, phi)
                if sd * rd >= imax - 1e-12:
                    return sd * imax, 0.0, True
            for sq in (1.0, -1.0):
                def g(d: float) -> float:
                    room = math.sqrt(max(imax * imax - d * d, 0.0))
                    rd, _ = raw_refs(d, sq * room, delta, u_eff, phi)
                    return max(-imax, min(imax, rd)) - d
                grid_d = [-imax + k * (2.0 * imax / 80) for k in range(81)]
                vals = [g(d) for d in grid_d]
                for d0, d1, f0, f1 in zip(grid_d[:-1], grid_d[1:], vals[:-1], vals[1:]):
                    if f0 == 0.0 or f0 * f1 < 0.0:
                        d = d0 if f0 == 0.0 else bisect(g, d0, d1, 1e-13)
                        room = math.sqrt(max(imax * imax - d * d, 0.0))
                        rd, rq = raw_refs(d, sq * room, delta, u_eff, phi)
                        if sq * rq >= room - 1e-9 and abs(rd) <= imax + 1e-9:
                            return d, sq * room, True
        raise AlgebraicLoopError(
            f"algebraic loop divergence in the outer power loop at delta={delta:.4g}")

    def pq_refs(xd: float, xq: float, delta: float, u_eff: float,
                phi: float) -> tuple[float, float, bool]:
        if kp_pq == 0.0:
            return apply_current_limit(xd, 0.0 if q_zero else -xq, lim)
        xd_xq_raw[0], xd_xq_raw[1] = xd, xq
        i_d, i_q = warm
        for _ in range(100):
            rd, rq = raw_refs(i_d, i_q, delta, u_eff, phi)
            ld, lq, act = apply_current_limit(rd, rq, lim)
            err = max(abs(ld - i_d), abs(lq - i_q))
            i_d += 0.8 * (ld - i_d)
            i_q += 0.8 * (lq - i_q)
            if err < 1e-12:
                warm[0], warm[1] = ld, lq
                return ld, lq, act
        ld, lq, act = _boundary_solve(delta, u_eff, phi)
        warm[0], warm[1] = ld, lq
        return ld, lq, act

    def rhs(state: tuple[float, ...], u_eff: float, phi: float) -> tuple[float, ...]:
        if outer:
            dw, dl, xd, xq = state
            rd, rq, _ = pq_refs(xd, xq, dl, u_eff, phi)
            p, q = _poc_power(rd, rq, dl, u_eff, phi, x_line, r_line)
        else:
            dw, dl = state[0], state[1]
            rd, rq, _ = const_refs
        t_m = x_line * rd + r_line * rq
        t_pll = (omega_b - kp_pll * l_sigma * rd) / ki_pll
        d = koi * (u_eff * cos(dl - phi) * omega_b - l_sigma * rd)
        ddw = (-d * dw + t_m - u_eff * sin(dl - phi)) / t_pll
        ddl = omega_b * dw
        if outer:
            return ddw, ddl, ki_pq * (p_ref - p), ki_pq * (q_ref - q) if not q_zero else 0.0
        return ddw, ddl

    dim = 4 if outer else 2
    state = (0.0, delta0, x_d, x_q)[:dim]

    n_rec = n_steps + 1
    t_arr = np.arange(n_rec) * dt
    delta_arr = np.empty(n_rec)
    dw_arr = np.empty(n_rec)
    id_arr = np.empty(n_rec)
    iq_arr = np.empty(n_rec)
    p_arr = np.empty(n_rec)
    q_arr = np.empty(n_rec)
    u_arr = np.empty(n_rec)
    act_arr = np.zeros(n_rec, dtype=bool)

    def record(i: int, st: tuple[float, ...], u_eff: float, phi: float) -> None:
        dw_arr[i], delta_arr[i] = st[0], st[1]
        if outer:
            rd, rq, act = pq_refs(st[2], st[3], st[1], u_eff, phi)
        else:
            rd, rq, act = const_refs
        p, q = _poc_power(rd, rq, st[1], u_eff, phi, x_line, r_line)
        id_arr[i], iq_arr[i] = rd, rq
        p_arr[i], q_arr[i] = p, q
        u_arr[i] = u_eff
        act_arr[i] = act

    for n in range(n_steps + 1):
        faulted = n_apply <= n < n_clear
        u_eff = k_f * u0 if faulted else u0
        phi = phi_f if faulted else 0.0
        record(n, state, u_eff, phi)
        if n == n_steps:
            break

        k1 = rhs(state, u_eff, phi)
        s2 = tuple(state[j] + 0.5 * dt * k1[j] for j in range(dim))
        k2 = rhs(s2, u_eff, phi)
        s3 = tuple(state[j] + 0.5 * dt * k2[j] for j in range(dim))
        k3 = rhs(s3, u_eff, phi)
        s4 = tuple(state[j] + dt * k3[j] for j in range(dim))
        k4 = rhs(s4, u_eff, phi)
        new = [state[j] + (dt / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
               for j in range(dim)]
        new[0] = max(-dw_max, min(dw_max, new[0]))
        if not all(math.isfinite(v) for v in new) or abs(new[0]) > 1e3:
            raise NumericalBlowUp(f"numerical blow-up at t={n * dt:.6f}s", t_last=n * dt)
        state = tuple(new)

    events = [(n_apply * dt, "fault_applied"), (n_clear * dt, "fault_cleared")]
    return Trajectory(
        t=t_arr, delta=delta_arr, d_omega=dw_arr, i_cd_ref=id_arr, i_cq_ref=iq_arr,
        p=p_arr, q=q_arr, u_pcc=u_arr, limiter_active=act_arr,
        events=events, delta_eq=delta0,
    )


TWO_PI = 2.0 * math.pi


def classify_sync(traj: Trajectory, angle_tol: float = 0.05,
                  freq_tol: float = 1e-3) -> SyncVerdict:
    """First-swing verdict for a finished run.

    LOST_SYNC on any pole slip (angle excursion beyond a full turn from the
    pre-fault equilibrium); SYNCHRONIZED when the run ends back at the
    equilibrium with a settled frequency; MARGINAL otherwise. The trajectory
    must extend at least one second past fault clearing.
    """
    t_clear = next(t for t, label in traj.events if label == "fault_cleared")
    if traj.t[-1] < t_clear + 1.0 - 1e-9:
        raise ValueError("trajectory must extend >= 1 s beyond fault clearing")
    excursion = float(np.max(np.abs(traj.delta - traj.delta_eq)))
    peak_freq = 1.0 + float(np.max(np.abs(traj.d_omega)))
    slips = int(excursion // TWO_PI)
    if slips >= 1:
        cls = SyncClass.LOST_SYNC
    elif (abs(traj.delta[-1] - traj.delta_eq) < angle_tol
          and abs(traj.d_omega[-1]) < freq_tol):
        cls = SyncClass.SYNCHRONIZED
    else:
        cls = SyncClass.MARGINAL
    return SyncVerdict(classification=cls, slips=slips,
                       peak_freq_pu=peak_freq, peak_delta_rad=excursion)


def compare_q_control(base: Scenario) -> DeltaReport:
    """Run a scenario with and without reactive-power regulation and diff the traces.

    The base scenario must be in PQ_OUTER_LOOP mode; the comparison run forces
    the q-axis reference to zero. Reported, not judged: the caller decides
    what difference counts as negligible.
    """
    if base.mode is not Mode.PQ_OUTER_LOOP:
        raise ValueError("compare_q_control needs a PQ_OUTER_LOOP base scenario")
    with_q = run_scenario(base)
    without_q = run_scenario(replace(base, mode=Mode.Q_REF_ZERO))
    freq_diff = float(np.max(np.abs(with_q.d_omega - without_q.d_omega)))
    delta_diff = float(np.max(np.abs(with_q.delta - without_q.delta)))
    peak = max(float(np.max(np.abs(with_q.d_omega))),
               float(np.max(np.abs(without_q.d_omega))))
    ratio = freq_diff / peak if peak > 0 else 0.0
    return DeltaReport(max_freq_diff=freq_diff, max_delta_diff=delta_diff,
                       peak_freq_dev=peak, freq_diff_ratio=ratio)
