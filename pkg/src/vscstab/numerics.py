"""Shared numerical kernels: fixed-step RK4 with event snapping, and bisection.

Fixed-step integration (rather than adaptive) keeps every run bit-deterministic
and lets fault events land exactly on grid points. Adaptive quadrature is used
only on the test side, as an independent oracle against closed-form integrals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np


class BracketError(ValueError):
    """The endpoints handed to the bisection do not bracket a root."""


class NumericalBlowUp(RuntimeError):
    """A simulation left the finite/physical range; carries the last good time."""

    def __init__(self, message: str, t_last: float):
        super().__init__(message)
        self.t_last = t_last


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float
    t_end: float
    record_every: int = 1
    blowup_norm: float = 1e6

    def __post_init__(self) -> None:
        if self.dt <= 0:
            raise ValueError("dt > 0 required")
        if self.record_every < 1:
            raise ValueError("record_every >= 1 required")
        if self.blowup_norm <= 0:
            raise ValueError("blowup_norm > 0 required")


@dataclass
class OdeResult:
    t: np.ndarray
    x: np.ndarray                 # shape (n_records, dim)
    blew_up: bool = False
    t_blowup: float | None = None


def rk4_step(rhs: Callable[[float, np.ndarray], np.ndarray],
             t: float, x: np.ndarray, dt: float) -> np.ndarray:
    k1 = rhs(t, x)
    k2 = rhs(t + 0.5 * dt, x + 0.5 * dt * k1)
    k3 = rhs(t + 0.5 * dt, x + 0.5 * dt * k2)
    k4 = rhs(t + dt, x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_integrate(rhs: Callable[[float, np.ndarray], np.ndarray],
                  x0: Sequence[float] | np.ndarray,
                  cfg: IntegratorConfig,
                  events: Iterable[tuple[float, Callable[[np.ndarray], np.ndarray]]] = (),
                  post_step: Callable[[np.ndarray], np.ndarray] | None = None) -> OdeResult:
    """Classical 4th-order fixed-step integration with state maps at grid times.

    ``events`` is a sorted iterable of ``(time, state_map)``; each map is
    applied exactly once, at the grid point nearest its time, before the step
    leaving that point. The recorded sample at an event time is the post-event
    state. ``post_step`` (if given) is applied to the state after every step,
    e.g. for hard clamps. Integration stops early, with a flag, when the state
    norm exceeds ``cfg.blowup_norm`` or turns non-finite.
    """
    x = np.asarray(x0, dtype=float).copy()
    n_steps = int(round(cfg.t_end / cfg.dt))
    ev = [(int(round(t_ev / cfg.dt)), fn) for t_ev, fn in events]
    if any(ev[i][0] > ev[i + 1][0] for i in range(len(ev) - 1)):
        raise ValueError("events must be sorted by time")
    ev_i = 0

    rec_t = [0.0]
    rec_x = [x.copy()]
    blew_up = False
    t_blowup: float | None = None

    for n in range(n_steps + 1):
        t = n * cfg.dt
        while ev_i < len(ev) and ev[ev_i][0] == n:
            x = np.asarray(ev[ev_i][1](x), dtype=float)
            ev_i += 1
            if rec_t and rec_t[-1] == t:
                rec_x[-1] = x.copy()
        if n == n_steps:
            break
        x_new = rk4_step(rhs, t, x, cfg.dt)
        if post_step is not None:
            x_new = np.asarray(post_step(x_new), dtype=float)
        if not np.all(np.isfinite(x_new)) or float(np.linalg.norm(x_new)) > cfg.blowup_norm:
            blew_up = True
            t_blowup = t
            break
        x = x_new
        if (n + 1) % cfg.record_every == 0 or n + 1 == n_steps:
            rec_t.append(t + cfg.dt)
            rec_x.append(x.copy())

    return OdeResult(t=np.array(rec_t), x=np.array(rec_x),
                     blew_up=blew_up, t_blowup=t_blowup)


def bisect(f: Callable[[float], float], lo: float, hi: float, tol: float) -> float:
    """Root of a scalar sign-changing function; returns the bracket midpoint.

    Converges in exactly ``ceil(log2((hi - lo) / tol))`` midpoint evaluations.
    Endpoints that are exact roots are returned directly. Raises
    :class:`BracketError` (with the endpoint values) when no sign change exists.
    """
    if not hi > lo:
        raise ValueError("need hi > lo")
    f_lo = f(lo)
    if f_lo == 0.0:
        return lo
    f_hi = f(hi)
    if f_hi == 0.0:
        return hi
    if f_lo * f_hi > 0.0:
        raise BracketError(f"no sign change on [{lo:g}, {hi:g}]: f(lo)={f_lo:g}, f(hi)={f_hi:g}")
    n = max(0, math.ceil(math.log2((hi - lo) / tol)))
    for _ in range(n):
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if f_mid == 0.0:
            return mid
        if f_lo * f_mid < 0.0:
            hi = mid
        else:
            lo, f_lo = mid, f_mid
        if hi - lo <= tol:
            break
    return 0.5 * (lo + hi)
