"""Power-control-loop dynamics with the synchronization loop held steady.

With the tracking frequency locked to the grid, the PI power regulators and
the algebraic network form a second-order system in the integrator states
``(x_d, x_q)``:

    dx_d/dt = ki * (p_ref - P)        i_cd =  x_d + kp * (p_ref - P)
    dx_q/dt = ki * (q_ref - Q)        i_cq = -x_q - kp * (q_ref - Q)

    P = u_s * cos(theta0) * i_cd - u_s * sin(theta0) * i_cq
    Q = omega_s * l_sigma * (i_cd**2 + i_cq**2)
        - (u_s * cos(theta0) * i_cq + u_s * sin(theta0) * i_cd)

Active power is linear in the currents; reactive power is not, which is what
limits the region of attraction of the operating point. The output equations
are implicit (P and Q depend on the currents they produce), and are resolved
by a damped fixed-point iteration seeded at ``(x_d, -x_q)`` with tolerance
1e-12 and at most 100 iterations; a failure raises
:class:`AlgebraicLoopError` rather than returning garbage.

``theta0``, the steady angle between the terminal voltage and the source, is
held at its pre-disturbance value throughout an analysis; at the operating
point it obeys the alignment relation ``u_s * sin(theta0) =
omega_s * l_sigma * i_cd`` (zero q-axis terminal voltage).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .numerics import bisect
from .params import ControllerParams, GridParams, SystemParams

FIXED_POINT_TOL = 1e-12
FIXED_POINT_MAX_ITER = 100
FIXED_POINT_RELAX = 0.8


class AlgebraicLoopError(RuntimeError):
    """The implicit output-current solve failed to converge."""


@dataclass(frozen=True)
class PclState:
    x_d: float
    x_q: float


@dataclass(frozen=True)
class PclOutputs:
    """Converter currents with the powers they actually produce."""

    i_cd: float
    i_cq: float
    p: float
    q: float


def pq_from_currents(i_cd: float, i_cq: float, theta_0: float,
                     grid: GridParams) -> tuple[float, float]:
    """Active/reactive power at the converter terminal for given dq currents."""
    u, w, l = grid.u_s, grid.omega_s, grid.l_sigma
    c, s = math.cos(theta_0), math.sin(theta_0)
    p = u * (c * i_cd - s * i_cq)
    q = w * l * (i_cd * i_cd + i_cq * i_cq) - u * (c * i_cq + s * i_cd)
    return p, q


def solve_output_currents(x_d: float, x_q: float, p_ref: float, q_ref: float,
                          theta_0: float, grid: GridParams, ctrl: ControllerParams,
                          tol: float = FIXED_POINT_TOL,
                          max_iter: int = FIXED_POINT_MAX_ITER) -> tuple[float, float]:
    """Resolve the implicit PI output equations for the actual currents.

    Damped fixed point on the map ``(i_d, i_q) -> (x_d + kp*(p_ref - P),
    -x_q - kp*(q_ref - Q))``; with zero proportional gain the outputs are the
    integrator states directly.
    """
    kp = ctrl.pq_kp
    i_d, i_q = x_d, -x_q
    if kp == 0.0:
        return i_d, i_q
    for _ in range(max_iter):
        p, q = pq_from_currents(i_d, i_q, theta_0, grid)
        nd = x_d + kp * (p_ref - p)
        nq = -x_q - kp * (q_ref - q)
        err = max(abs(nd - i_d), abs(nq - i_q))
        i_d += FIXED_POINT_RELAX * (nd - i_d)
        i_q += FIXED_POINT_RELAX * (nq - i_q)
        if err < tol:
            return i_d, i_q
    raise AlgebraicLoopError(
        f"algebraic loop divergence at state ({x_d:.6g}, {x_q:.6g})")


def pcl_outputs(state: tuple[float, float], setpoints: tuple[float, float],
                theta_0: float, grid: GridParams, ctrl: ControllerParams) -> PclOutputs:
    i_d, i_q = solve_output_currents(state[0], state[1], setpoints[0], setpoints[1],
                                     theta_0, grid, ctrl)
    p, q = pq_from_currents(i_d, i_q, theta_0, grid)
    return PclOutputs(i_cd=i_d, i_cq=i_q, p=p, q=q)


def pcl_rhs(state: tuple[float, float], setpoints: tuple[float, float],
            theta_0: float, grid: GridParams, ctrl: ControllerParams) -> tuple[float, float]:
    """Integrator-state derivatives at the resolved output currents."""
    out = pcl_outputs(state, setpoints, theta_0, grid, ctrl)
    return ctrl.pq_ki * (setpoints[0] - out.p), ctrl.pq_ki * (setpoints[1] - out.q)


def steady_current_solutions(p_ref: float, q_ref: float, u: float,
                             x: float) -> list[tuple[float, float, float]]:
    """All isolated ``(i_d, i_q, theta)`` solving the power and alignment relations.

    Solves ``P = p_ref``, ``Q = q_ref`` jointly with ``u*sin(theta) = x*i_d``
    for a purely reactive lump ``x``. The alignment relation turns Q into a
    quadratic in ``i_q`` alone and P into a one-dimensional root problem per
    branch (sign of cos(theta), sign of the quadratic root), swept densely and
    polished by bisection. The degenerate circulating-current families at zero
    power transfer (branches where P vanishes identically) are excluded.
    """
    if u <= 0.0:
        return []
    if x == 0.0:
        return [(p_ref / u, -q_ref / u, 0.0)]

    sols: list[tuple[float, float, float]] = []
    i_d_max = u / x

    def try_branch(cos_sign: float, root_sign: float) -> None:
        def f(i_d: float) -> float | None:
            arg = u * u - (x * i_d) ** 2
            if arg < 0.0:
                return None
            c = cos_sign * math.sqrt(arg)
            disc = c * c + 4.0 * x * q_ref
            if disc < 0.0:
                return None
            i_q = (c + root_sign * math.sqrt(disc)) / (2.0 * x)
            return i_d * (c - x * i_q) - p_ref

        n_scan = 2001
        grid_pts = np.linspace(-i_d_max, i_d_max, n_scan)
        vals = [f(g) for g in grid_pts]
        finite = [v for v in vals if v is not None]
        if finite and max(abs(v) for v in finite) < 1e-9:
            return   # flat-zero branch: a continuum, not isolated roots
        for a, b, fa, fb in zip(grid_pts[:-1], grid_pts[1:], vals[:-1], vals[1:]):
            if fa is None or fb is None:
                continue
            if fa == 0.0:
                root = a
            elif fa * fb < 0.0:
                root = bisect(lambda g: f(g), a, b, 1e-13)
            else:
                continue
            arg = u * u - (x * root) ** 2
            c = cos_sign * math.sqrt(max(arg, 0.0))
            disc = c * c + 4.0 * x * q_ref
            i_q = (c + root_sign * math.sqrt(max(disc, 0.0))) / (2.0 * x)
            theta = math.atan2(x * root, c)
            sols.append((root, i_q, theta))

    for cos_sign in (1.0, -1.0):
        for root_sign in (1.0, -1.0):
            try_branch(cos_sign, root_sign)

    # dedupe and keep only exact solutions of the original system
    out: list[tuple[float, float, float]] = []
    seen: set[tuple[float, float]] = set()
    for i_d, i_q, theta in sols:
        key = (round(i_d, 9), round(i_q, 9))
        if key in seen:
            continue
        p = u * (math.cos(theta) * i_d - math.sin(theta) * i_q)
        q = x * (i_d * i_d + i_q * i_q) - u * (math.cos(theta) * i_q + math.sin(theta) * i_d)
        if abs(p - p_ref) < 1e-9 and abs(q - q_ref) < 1e-9:
            seen.add(key)
            out.append((i_d, i_q, theta))
    out.sort(key=lambda t: (abs(complex(t[0], t[1])), t[0]))
    return out


def pcl_equilibria(p_ref: float, q_ref: float,
                   grid: GridParams) -> list[tuple[float, float, float]]:
    """Operating points ``(i_cd, i_cq, theta_0)`` reaching the power setpoints.

    Empty list means the requested transfer is infeasible for this grid
    strength. Solutions are sorted by current magnitude; the first one with
    ``cos(theta_0) > 0`` is the practical operating point.
    """
    return steady_current_solutions(p_ref, q_ref, grid.u_s,
                                    grid.omega_s * grid.l_sigma)


def target_equilibrium(p_ref: float, q_ref: float,
                       grid: GridParams) -> tuple[float, float, float]:
    """The lowest-current operating point on the principal angle branch."""
    for i_d, i_q, theta in pcl_equilibria(p_ref, q_ref, grid):
        if math.cos(theta) > 0.0:
            return i_d, i_q, theta
    raise ValueError("power transfer infeasible: no equilibrium for these setpoints")


class BasinClass(str, Enum):
    CONVERGED_TO_TARGET = "CONVERGED_TO_TARGET"
    CONVERGED_ELSEWHERE = "CONVERGED_ELSEWHERE"
    DIVERGED = "DIVERGED"
    UNDECIDED = "UNDECIDED"


@dataclass
class BasinMap:
    initials: np.ndarray            # (N, 2) integrator states
    classes: list[BasinClass]
    finals: np.ndarray              # (N, 2)
    target_state: tuple[float, float]
    theta_0: float
    trajectories: np.ndarray | None = None   # (n_rec, N, 2) when recording

    def fraction(self, cls: BasinClass) -> float:
        return sum(1 for c in self.classes if c is cls) / len(self.classes)


def _solve_outputs_batch(xd: np.ndarray, xq: np.ndarray, p_ref: float, q_ref: float,
                         cos_t: float, sin_t: float, u: float, wl: float,
                         kp: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized closed-form output solve; returns (i_d, i_q, solvable_mask).

    Eliminating the (linear) active-power row leaves a quadratic in ``i_q``;
    of its two roots, the damped fixed point of :func:`solve_output_currents`
    converges exactly to the one with negative residual slope, so that root is
    taken directly here (the two paths are cross-checked in the test suite).
    Points whose quadratic has no real root have no output solution and are
    reported unsolvable.
    """
    if kp == 0.0:
        return xd.copy(), -xq, np.ones_like(xd, dtype=bool)
    den = 1.0 + kp * u * cos_t
    a = (xd + kp * p_ref) / den              # i_d = a + b*i_q after the P row
    b = kp * u * sin_t / den
    qa = kp * wl * (1.0 + b * b)
    qb = 2.0 * kp * wl * a * b - kp * u * (cos_t + sin_t * b) - 1.0
    qc = -xq - kp * q_ref + kp * wl * a * a - kp * u * sin_t * a
    disc = qb * qb - 4.0 * qa * qc
    ok = disc >= 0.0
    sq = np.sqrt(np.where(ok, disc, 0.0))
    # root with negative residual slope (the attracting one), in stable form
    i_q = np.where(qb <= 0.0,
                   2.0 * qc / np.where(-qb + sq != 0.0, -qb + sq, 1.0),
                   (-qb - sq) / (2.0 * qa))
    i_d = a + b * i_q
    return i_d, i_q, ok


def classify_basin(initials: np.ndarray, params: SystemParams,
                   horizon: float = 5.0, tol: float = 1e-3, dt: float = 1e-3,
                   blowup_norm: float = 10.0,
                   record_every: int | None = None) -> BasinMap:
    """Classify integrator-state initial conditions against the target operating point.

    Vectorized RK4 over the whole ensemble. A point is DIVERGED once its state
    norm exceeds ``blowup_norm`` (or its output solve stops converging);
    otherwise it is CONVERGED_TO_TARGET when it ends within ``tol`` of the
    target state with a residual derivative norm below ``tol``,
    CONVERGED_ELSEWHERE when only the derivative test passes, and UNDECIDED
    when the horizon ran out first.
    """
    grid, ctrl, op = params.grid, params.ctrl, params.op
    i_d_eq, i_q_eq, theta0 = target_equilibrium(op.p_ref, op.q_ref, grid)
    target = (i_d_eq, -i_q_eq)

    pts = np.asarray(initials, dtype=float)
    xd = pts[:, 0].copy()
    xq = pts[:, 1].copy()
    n = xd.size

    u, wl, kp, ki = grid.u_s, grid.omega_s * grid.l_sigma, ctrl.pq_kp, ctrl.pq_ki
    cos_t, sin_t = math.cos(theta0), math.sin(theta0)
    p_ref, q_ref = op.p_ref, op.q_ref

    def rhs(xd_a: np.ndarray, xq_a: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        i_d, i_q, ok = _solve_outputs_batch(xd_a, xq_a, p_ref, q_ref,
                                            cos_t, sin_t, u, wl, kp)
        p = u * (cos_t * i_d - sin_t * i_q)
        q = wl * (i_d * i_d + i_q * i_q) - u * (cos_t * i_q + sin_t * i_d)
        return ki * (p_ref - p), ki * (q_ref - q), ok

    n_steps = int(round(horizon / dt))
    alive = np.ones(n, dtype=bool)
    rec: list[np.ndarray] = []
    if record_every:
        rec.append(np.stack([xd, xq], axis=1))

    for step_i in range(n_steps):
        k1d, k1q, ok1 = rhs(xd, xq)
        k2d, k2q, ok2 = rhs(xd + 0.5 * dt * k1d, xq + 0.5 * dt * k1q)
        k3d, k3q, ok3 = rhs(xd + 0.5 * dt * k2d, xq + 0.5 * dt * k2q)
        k4d, k4q, ok4 = rhs(xd + dt * k3d, xq + dt * k3q)
        nd = xd + (dt / 6.0) * (k1d + 2.0 * k2d + 2.0 * k3d + k4d)
        nq = xq + (dt / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
        step_ok = ok1 & ok2 & ok3 & ok4 & np.isfinite(nd) & np.isfinite(nq)
        xd = np.where(alive & step_ok, nd, xd)
        xq = np.where(alive & step_ok, nq, xq)
        alive &= step_ok & (np.hypot(xd, xq) <= blowup_norm)
        if record_every and (step_i + 1) % record_every == 0:
            rec.append(np.stack([xd, xq], axis=1))
        if not alive.any():
            break

    classes: list[BasinClass] = [BasinClass.DIVERGED] * n
    if alive.any():
        dd, dq, ok = rhs(xd, xq)
        deriv_norm = np.hypot(dd, dq)
        dist = np.hypot(xd - target[0], xq - target[1])
        for i in range(n):
            if not alive[i]:
                continue
            if not ok[i]:
                classes[i] = BasinClass.DIVERGED
            elif deriv_norm[i] < tol and dist[i] < tol:
                classes[i] = BasinClass.CONVERGED_TO_TARGET
            elif deriv_norm[i] < tol:
                classes[i] = BasinClass.CONVERGED_ELSEWHERE
            else:
                classes[i] = BasinClass.UNDECIDED

    return BasinMap(
        initials=pts, classes=classes, finals=np.stack([xd, xq], axis=1),
        target_state=target, theta_0=theta0,
        trajectories=np.array(rec) if record_every else None,
    )


def states_from_currents(currents: np.ndarray, params: SystemParams) -> np.ndarray:
    """Integrator states whose resolved outputs equal the given initial currents.

    Inverse of the output map (explicit, since P and Q are direct functions of
    the currents): ``x_d = i_d - kp*(p_ref - P)``, ``x_q = -i_q - kp*(q_ref - Q)``.
    Phase portraits drawn in the current plane use this to seed
    :func:`classify_basin`, whose initial conditions are integrator states.
    """
    grid, ctrl, op = params.grid, params.ctrl, params.op
    _, _, theta0 = target_equilibrium(op.p_ref, op.q_ref, grid)
    pts = np.asarray(currents, dtype=float)
    i_d, i_q = pts[:, 0], pts[:, 1]
    u, wl = grid.u_s, grid.omega_s * grid.l_sigma
    c, s = math.cos(theta0), math.sin(theta0)
    p = u * (c * i_d - s * i_q)
    q = wl * (i_d * i_d + i_q * i_q) - u * (c * i_q + s * i_d)
    x_d = i_d - ctrl.pq_kp * (op.p_ref - p)
    x_q = -i_q - ctrl.pq_kp * (op.q_ref - q)
    return np.stack([x_d, x_q], axis=1)


def grid_initials(lo: float = -1.5, hi: float = 1.5, n: int = 41) -> np.ndarray:
    """Regular (n*n, 2) grid of integrator states, x-major row order."""
    axis = np.linspace(lo, hi, n)
    xs, ys = np.meshgrid(axis, axis, indexing="ij")
    return np.stack([xs.ravel(), ys.ravel()], axis=1)


def disk_initials(center: tuple[float, float], radius: float, n: int,
                  seed: int = 0) -> np.ndarray:
    """Uniform random sample of n integrator states inside a disk."""
    rng = np.random.default_rng(seed)
    r = radius * np.sqrt(rng.uniform(0.0, 1.0, n))
    phi = rng.uniform(0.0, 2.0 * math.pi, n)
    return np.stack([center[0] + r * np.cos(phi), center[1] + r * np.sin(phi)], axis=1)
