"""Swing-like model of the synchronization loop with the power loop held steady.

With the inner current loop instantaneous and the current references frozen,
the PI-driven phase tracking of the grid voltage reduces to a second-order
system in the per-unit frequency deviation ``d_omega`` and the tracking angle
``delta`` (kept unwrapped so pole slips stay observable):

    t_pll * d(d_omega)/dt = -D(delta) * d_omega + t_m - t_e(delta)
    d(delta)/dt           = omega_b * d_omega

    t_e(delta) = u_eff * sin(delta - phi)
    D(delta)   = (kp/ki) * (u_eff * cos(delta - phi) * omega_b - l_sigma * i_cd_ref)
    t_pll      = (omega_b - kp * l_sigma * i_cd_ref) / ki
    t_m        = omega_s * l_sigma_t * i_cd_ref + r_sigma_t * i_cq_ref

This mirrors the motion equation of a synchronous machine, except that the
"torques" here are voltages: ``t_m`` is the constant drive set by the injected
current through the line lump, and ``t_e`` is the angle feedback through the
retained PCC voltage. A short circuit only rescales and shifts the feedback
curve: ``u_eff -> k_f * u_eff``, ``phi -> phi_f``. The damping coefficient is
angle-dependent and turns negative on the band where ``cos(delta - phi) < 0``
(up to the small current term), which is what lets large excursions run away
even though small ones are well damped.

The angle is referenced to the PCC voltage, so applying or clearing a fault
changes only the coefficient set, never the state. The (small) angle of the
pre-fault PCC voltage is absorbed into the delta origin; only its magnitude
enters the curves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .numerics import IntegratorConfig, OdeResult, rk4_integrate
from .params import ControllerParams, GridParams, OperatingPoint, PerUnitBase

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class PllState:
    d_omega: float   # per-unit frequency deviation
    delta: float     # tracking angle, rad, unwrapped


@dataclass(frozen=True)
class SwingCoeffs:
    """Frozen coefficient set of the swing-like model for one network condition."""

    t_pll: float
    t_m: float
    u_eff: float
    phi: float
    kp_over_ki: float
    omega_b: float
    l_i: float        # l_sigma * i_cd_ref, the current term inside D(delta)


def prefault_pcc_voltage(grid: GridParams, op: OperatingPoint) -> complex:
    """Pre-fault PCC voltage phasor ``u_s + i_ref * z_s`` in the tracking frame.

    Only the magnitude feeds the swing coefficients; the angle is absorbed into
    the delta origin. With a stiff PCC (``z_s = 0``) this is just ``u_s``.
    """
    i_ref = complex(op.i_cd_ref, op.i_cq_ref)
    return grid.u_s + i_ref * grid.z_s


def swing_coeffs(base: PerUnitBase, grid: GridParams, ctrl: ControllerParams,
                 op: OperatingPoint, k_f_mag: float = 1.0,
                 phi_f: float = 0.0) -> SwingCoeffs:
    """Build the coefficient set; defaults give the pre-fault condition.

    Pass the retained-voltage factor ``(k_f_mag, phi_f)`` for the faulted
    condition; ``k_f_mag = 1, phi_f = 0`` reproduces the pre-fault set exactly.
    Raises ``ValueError`` when the inertia analog comes out non-positive.
    """
    t_pll = (base.omega_b - ctrl.pll_kp * grid.l_sigma * op.i_cd_ref) / ctrl.pll_ki
    if t_pll <= 0.0:
        raise ValueError("non-physical inertia analog: t_pll <= 0")
    u0 = abs(prefault_pcc_voltage(grid, op))
    t_m = grid.omega_s * grid.l_sigma_t * op.i_cd_ref + grid.r_sigma_t * op.i_cq_ref
    return SwingCoeffs(
        t_pll=t_pll,
        t_m=t_m,
        u_eff=k_f_mag * u0,
        phi=phi_f,
        kp_over_ki=ctrl.pll_kp / ctrl.pll_ki,
        omega_b=base.omega_b,
        l_i=grid.l_sigma * op.i_cd_ref,
    )


def t_e(delta: float, coeffs: SwingCoeffs) -> float:
    """Angle-feedback curve ``u_eff * sin(delta - phi)``."""
    return coeffs.u_eff * math.sin(delta - coeffs.phi)


def damping(delta: float, coeffs: SwingCoeffs) -> float:
    """Angle-dependent damping; positive near the stable equilibrium, negative
    on the band where the cosine term flips sign."""
    return coeffs.kp_over_ki * (
        coeffs.u_eff * math.cos(delta - coeffs.phi) * coeffs.omega_b - coeffs.l_i
    )


def pll_rhs(state: tuple[float, float], coeffs: SwingCoeffs,
            constant_damping: float | None = None) -> tuple[float, float]:
    """Vector field of the swing model.

    ``constant_damping=None`` uses the full angle-dependent coefficient;
    passing a float freezes D at that value (the small-excursion
    approximation, normally evaluated at the trajectory's initial angle).
    """
    d_omega, delta = state
    d = damping(delta, coeffs) if constant_damping is None else constant_damping
    dd_omega = (-d * d_omega + coeffs.t_m - coeffs.u_eff * math.sin(delta - coeffs.phi)) / coeffs.t_pll
    return dd_omega, coeffs.omega_b * d_omega


def equilibrium_angles(coeffs: SwingCoeffs) -> tuple[float, float] | None:
    """Principal stable/unstable equilibrium pair ``(delta_a, delta_b)``.

    ``None`` when the drive exceeds the feedback peak (``t_m > u_eff``), i.e.
    no synchronized operating point exists for this condition.
    """
    if coeffs.u_eff <= 0.0:
        return None
    ratio = coeffs.t_m / coeffs.u_eff
    if abs(ratio) > 1.0:
        return None
    a = math.asin(ratio)
    return a + coeffs.phi, math.pi - a + coeffs.phi


def swing_energy(state: tuple[float, float], coeffs: SwingCoeffs) -> float:
    """Energy-like quantity conserved along undamped trajectories.

    ``E = 0.5 * t_pll * omega_b * d_omega**2 + V(delta)`` with the potential
    ``V(delta) = -u_eff * cos(delta - phi) - t_m * delta``.
    """
    d_omega, delta = state
    kinetic = 0.5 * coeffs.t_pll * coeffs.omega_b * d_omega ** 2
    potential = -coeffs.u_eff * math.cos(delta - coeffs.phi) - coeffs.t_m * delta
    return kinetic + potential


def integrate_pll(x0: tuple[float, float],
                  schedule: list[tuple[float, SwingCoeffs]],
                  dt: float,
                  constant_damping: float | None = None,
                  record_every: int = 1) -> OdeResult:
    """Integrate through a piecewise-constant coefficient schedule.

    ``schedule`` is a list of ``(duration, coeffs)`` segments; durations are
    snapped to the step grid. Used for fault-on/fault-off studies and as the
    reference path the scenario engine is checked against.
    """
    t_parts: list[np.ndarray] = []
    x_parts: list[np.ndarray] = []
    x = np.asarray(x0, dtype=float)
    t_offset = 0.0
    for duration, coeffs in schedule:
        def rhs(_t: float, s: np.ndarray, c=coeffs) -> np.ndarray:
            return np.array(pll_rhs((s[0], s[1]), c, constant_damping))

        cfg = IntegratorConfig(dt=dt, t_end=duration, record_every=record_every)
        res = rk4_integrate(rhs, x, cfg)
        if t_parts:
            t_parts.append(res.t[1:] + t_offset)
            x_parts.append(res.x[1:])
        else:
            t_parts.append(res.t + t_offset)
            x_parts.append(res.x)
        if res.blew_up:
            return OdeResult(t=np.concatenate(t_parts), x=np.concatenate(x_parts),
                             blew_up=True, t_blowup=res.t_blowup + t_offset
                             if res.t_blowup is not None else None)
        x = res.x[-1]
        t_offset += res.t[-1]
    return OdeResult(t=np.concatenate(t_parts), x=np.concatenate(x_parts))


@dataclass(frozen=True)
class FirstSwingResult:
    stable: bool
    slipped: bool
    t_zero_cross: float | None   # time (from fault application) when d_omega first returned to <= 0
    d_omega_clear: float         # frequency deviation at the clearing instant


def simulate_first_swing(pre: SwingCoeffs, post: SwingCoeffs, t_clear: float,
                         dt: float = 1e-4, observe: float = 5.0,
                         slip_threshold: float = TWO_PI) -> FirstSwingResult:
    """Fault-on/fault-off run from the pre-fault equilibrium, verdict only.

    Stable means: no pole slip (``|delta - delta_a| > slip_threshold``) at any
    time, and the frequency deviation returns to cross zero within ``observe``
    seconds after clearing. Scalar fast path used by the clearing-time oracle.
    """
    eq = equilibrium_angles(pre)
    if eq is None:
        raise ValueError("no pre-fault equilibrium: t_m exceeds the feedback peak")
    delta_a = eq[0]

    sin, cos = math.sin, math.cos
    omega_b = pre.omega_b

    def step(dw: float, dl: float, c: SwingCoeffs) -> tuple[float, float]:
        tp, tm, u, ph, koi, li = c.t_pll, c.t_m, c.u_eff, c.phi, c.kp_over_ki, c.l_i
        k1w = (-(koi * (u * cos(dl - ph) * omega_b - li)) * dw + tm - u * sin(dl - ph)) / tp
        k1l = omega_b * dw
        w2, l2 = dw + 0.5 * dt * k1w, dl + 0.5 * dt * k1l
        k2w = (-(koi * (u * cos(l2 - ph) * omega_b - li)) * w2 + tm - u * sin(l2 - ph)) / tp
        k2l = omega_b * w2
        w3, l3 = dw + 0.5 * dt * k2w, dl + 0.5 * dt * k2l
        k3w = (-(koi * (u * cos(l3 - ph) * omega_b - li)) * w3 + tm - u * sin(l3 - ph)) / tp
        k3l = omega_b * w3
        w4, l4 = dw + dt * k3w, dl + dt * k3l
        k4w = (-(koi * (u * cos(l4 - ph) * omega_b - li)) * w4 + tm - u * sin(l4 - ph)) / tp
        k4l = omega_b * w4
        return (dw + (dt / 6.0) * (k1w + 2.0 * k2w + 2.0 * k3w + k4w),
                dl + (dt / 6.0) * (k1l + 2.0 * k2l + 2.0 * k3l + k4l))

    dw, dl = 0.0, delta_a
    n_fault = int(round(t_clear / dt))
    for _ in range(n_fault):
        dw, dl = step(dw, dl, post)
        if abs(dl - delta_a) > slip_threshold:
            return FirstSwingResult(False, True, None, dw)
    dw_clear = dw

    n_obs = int(round(observe / dt))
    for n in range(n_obs):
        dw, dl = step(dw, dl, pre)
        if abs(dl - delta_a) > slip_threshold:
            return FirstSwingResult(False, True, None, dw_clear)
        if dw <= 0.0:
            return FirstSwingResult(True, False, t_clear + (n + 1) * dt, dw_clear)
    return FirstSwingResult(False, False, None, dw_clear)


class PortraitClass(str, Enum):
    CONVERGED_TO_TARGET = "CONVERGED_TO_TARGET"
    CONVERGED_ELSEWHERE = "CONVERGED_ELSEWHERE"
    DIVERGED = "DIVERGED"
    UNDECIDED = "UNDECIDED"


@dataclass
class PllPortrait:
    d_omega0: np.ndarray
    delta0: np.ndarray
    classes: list[PortraitClass]
    slips: np.ndarray
    finals: np.ndarray             # (N, 2) final states
    trajectories: np.ndarray | None = None   # (n_rec, N, 2) when recording


def pll_portrait(coeffs: SwingCoeffs,
                 d_omega0s: np.ndarray,
                 delta0s: np.ndarray,
                 constant_damping: bool = False,
                 horizon: float = 5.0,
                 dt: float = 1e-3,
                 settle_tol: float = 1e-3,
                 angle_tol: float = 0.05,
                 slip_cap: int = 10,
                 record_every: int | None = None) -> PllPortrait:
    """Classify a grid of initial states of the swing model (vectorized).

    ``constant_damping=True`` freezes D per trajectory at its own initial
    angle (the small-excursion approximation); otherwise the full
    angle-dependent coefficient is used. A point is DIVERGED once its angle
    excursion exceeds ``slip_cap`` full turns; settled points are split into
    the principal equilibrium (``slips == 0``) versus a 2*pi-shifted one.
    """
    eq = equilibrium_angles(coeffs)
    if eq is None:
        raise ValueError("no equilibrium for this coefficient set; portrait undefined")
    delta_a = eq[0]

    dw0, dl0 = np.meshgrid(np.asarray(d_omega0s, float), np.asarray(delta0s, float),
                           indexing="ij")
    dw = dw0.ravel().copy()
    dl = dl0.ravel().copy()
    n = dw.size

    tp, tm, u, ph = coeffs.t_pll, coeffs.t_m, coeffs.u_eff, coeffs.phi
    koi, li, wb = coeffs.kp_over_ki, coeffs.l_i, coeffs.omega_b
    d_const = koi * (u * np.cos(dl - ph) * wb - li) if constant_damping else None

    def rhs(dw_a: np.ndarray, dl_a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if d_const is None:
            d = koi * (u * np.cos(dl_a - ph) * wb - li)
        else:
            d = d_const
        return (-d * dw_a + tm - u * np.sin(dl_a - ph)) / tp, wb * dw_a

    n_steps = int(round(horizon / dt))
    active = np.ones(n, dtype=bool)
    excursion = np.abs(dl - delta_a)
    cap = slip_cap * TWO_PI
    rec: list[np.ndarray] = []
    if record_every:
        rec.append(np.stack([dw, dl], axis=1))

    for step_i in range(n_steps):
        k1w, k1l = rhs(dw, dl)
        k2w, k2l = rhs(dw + 0.5 * dt * k1w, dl + 0.5 * dt * k1l)
        k3w, k3l = rhs(dw + 0.5 * dt * k2w, dl + 0.5 * dt * k2l)
        k4w, k4l = rhs(dw + dt * k3w, dl + dt * k3l)
        dw_new = dw + (dt / 6.0) * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
        dl_new = dl + (dt / 6.0) * (k1l + 2.0 * k2l + 2.0 * k3l + k4l)
        dw = np.where(active, dw_new, dw)
        dl = np.where(active, dl_new, dl)
        excursion = np.maximum(excursion, np.abs(dl - delta_a))
        active &= excursion <= cap
        if record_every and (step_i + 1) % record_every == 0:
            rec.append(np.stack([dw, dl], axis=1))

    k_near = np.round((dl - delta_a) / TWO_PI)
    dist = np.abs(dl - delta_a - TWO_PI * k_near)
    settled = active & (np.abs(dw) < settle_tol) & (dist < angle_tol)
    diverged = ~active

    classes: list[PortraitClass] = []
    slips = np.zeros(n, dtype=int)
    for i in range(n):
        if diverged[i]:
            classes.append(PortraitClass.DIVERGED)
            slips[i] = int(excursion[i] // TWO_PI)
        elif settled[i]:
            slips[i] = int(abs(k_near[i]))
            classes.append(PortraitClass.CONVERGED_TO_TARGET if slips[i] == 0
                           else PortraitClass.CONVERGED_ELSEWHERE)
        else:
            classes.append(PortraitClass.UNDECIDED)
            slips[i] = int(excursion[i] // TWO_PI)

    return PllPortrait(
        d_omega0=dw0.ravel(), delta0=dl0.ravel(), classes=classes, slips=slips,
        finals=np.stack([dw, dl], axis=1),
        trajectories=np.array(rec) if record_every else None,
    )
