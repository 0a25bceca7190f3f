"""Per-unit system description: bases, network lumps, controller gains, setpoints.

All dynamic models in this package work purely in per-unit quantities. The
base values exist so configuration files can mirror the nameplate data of the
study system (2 MW / 690 V / 50 Hz by default) and so results can be converted
back to SI at the I/O boundary.

Conventions
-----------
* ``l_sigma`` is the total per-unit inductance between the converter terminal
  (point of connection, PoC) and the Thevenin source. It encodes grid strength
  through ``l_sigma = 1 / scr`` and is derived on construction, never set.
* ``l_sigma_t`` / ``r_sigma_t`` are the line lumps between the PoC and the
  point of common coupling (PCC) where short circuits are applied; ``z_s`` is
  the remaining source impedance behind the PCC. A physically consistent
  configuration satisfies
  ``j * omega_s * l_sigma ~= (r_sigma_t + j * omega_s * l_sigma_t) + z_s``.
* A short circuit of impedance ``z_f`` at the PCC retains the voltage
  ``k_f * U_pcc`` with the complex factor ``k_f = z_f / (z_f + z_s)``.
  Configurations may state the retained-voltage factor ``(k_f_mag, phi_f)``
  directly instead of giving ``z_f``.

Construction never raises on bad physics; :func:`validate_params` collects the
violated invariants into a report so a CLI can show all problems at once.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

TWO_PI = 2.0 * math.pi


class ConfigError(ValueError):
    """A configuration could not be parsed or failed validation."""


@dataclass(frozen=True)
class PerUnitBase:
    """Base quantities of the per-unit system.

    ``omega_b = 2*pi*f_base`` is derived and always exact.
    """

    s_base: float = 2.0e6    # VA
    u_base: float = 690.0    # V, line voltage
    f_base: float = 50.0     # Hz
    omega_b: float = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "omega_b", TWO_PI * self.f_base)


@dataclass(frozen=True)
class GridParams:
    """Network seen from the converter, in per-unit.

    ``l_sigma`` is tied to the short-circuit ratio (``l_sigma = 1/scr``) and is
    computed on construction.
    """

    scr: float
    l_sigma_t: float
    r_sigma_t: float = 0.0
    z_s: complex = 0j
    u_s: float = 1.0
    omega_s: float = 1.0
    l_sigma: float = field(init=False)

    def __post_init__(self) -> None:
        l = 1.0 / self.scr if self.scr > 0.0 else math.inf
        object.__setattr__(self, "l_sigma", l)
        object.__setattr__(self, "z_s", complex(self.z_s))


@dataclass(frozen=True)
class ControllerParams:
    """PI gains of the synchronization loop and of the power (PQ) loop.

    Gains are the source of truth. The optional bandwidth entries are
    informational; helpers below map a bandwidth to gains when a configuration
    gives only the bandwidth.
    """

    pll_kp: float
    pll_ki: float
    pq_kp: float = 0.1
    pq_ki: float = 20.0
    pll_bandwidth_hz: float | None = None
    pq_bandwidth_hz: float | None = None


@dataclass(frozen=True)
class OperatingPoint:
    """Power setpoints, current references and protection limits."""

    p_ref: float = 0.5
    q_ref: float = 0.0
    i_cd_ref: float = 1.0
    i_cq_ref: float = 0.0
    i_max: float = 1.1
    freq_limit: float = 1.1   # pu clamp on the tracked frequency


@dataclass(frozen=True)
class TableExtras:
    """Nameplate entries kept for configuration fidelity; unused by the models."""

    v_dc: float | None = None
    f_sw: float | None = None
    l_f: float | None = None
    l_t: float | None = None


@dataclass(frozen=True)
class SystemParams:
    """Everything a dynamic model needs, bundled."""

    base: PerUnitBase
    grid: GridParams
    ctrl: ControllerParams
    op: OperatingPoint
    extras: TableExtras = TableExtras()


@dataclass(frozen=True)
class FaultSpec:
    """Symmetrical short circuit applied at the PCC.

    The retained-voltage factor ``(k_f_mag, phi_f)`` is the polar form of
    ``z_f / (z_f + z_s)``. When ``z_f`` is given, consistency with the factor
    is checked by :func:`validate_params`; when it is ``None`` the factor is
    taken at face value. ``t_clear`` may be ``None`` for clearing-time sweeps.
    """

    k_f_mag: float
    phi_f: float = 0.0
    t_apply: float = 2.0
    t_clear: float | None = None
    z_f: complex | None = None


@dataclass(frozen=True)
class ValidationReport:
    """List of violated invariants; empty means the parameter set is usable."""

    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations


def fault_factor(z_f: complex, z_s: complex) -> tuple[float, float]:
    """Polar decomposition of the retained-voltage factor ``z_f / (z_f + z_s)``.

    Returns ``(magnitude, phase_rad)``. A bolted fault (``z_f = 0``) gives
    ``(0.0, 0.0)``. Raises ``ValueError`` for a degenerate divisor.
    """
    den = z_f + z_s
    scale = max(abs(z_f), abs(z_s), 1.0)
    if abs(den) <= 1e-15 * scale:
        raise ValueError("ill-posed fault circuit: z_f + z_s is (numerically) zero")
    ratio = z_f / den
    if ratio == 0:
        return 0.0, 0.0
    return abs(ratio), cmath.phase(ratio)


def pll_gains_from_bandwidth(f_bw_hz: float) -> tuple[float, float]:
    """Map a nominal synchronization bandwidth to PI gains.

    Uses ``kp = f_bw`` and ``ki = 2 * f_bw**2`` (per-unit input voltage
    normalized to 1), anchored so that 20 Hz maps to (20, 800). Bandwidth
    sweeps use this mapping; explicit gains always take precedence.
    """
    return float(f_bw_hz), 2.0 * float(f_bw_hz) ** 2


def pq_gains_from_bandwidth(f_bw_hz: float, kp: float = 0.1) -> tuple[float, float]:
    """Map a power-loop bandwidth to PI gains by a first-order loop fit.

    With an (approximately) unit static plant gain in per unit, the integral
    gain sets the closed-loop pole, so ``ki = 2*pi*f_bw``; the proportional
    gain is kept small and is passed through unchanged.
    """
    return kp, TWO_PI * float(f_bw_hz)


def limited_current(i_d: float, i_q: float, i_max: float) -> tuple[float, float]:
    """Proportionally scale a current pair onto the magnitude limit."""
    mag = math.hypot(i_d, i_q)
    if mag <= i_max or mag == 0.0:
        return i_d, i_q
    s = i_max / mag
    return i_d * s, i_q * s


def validate_params(params: SystemParams, fault: FaultSpec | None = None) -> ValidationReport:
    """Collect every violated invariant of a parameter set (and optional fault)."""
    v: list[str] = []
    base, grid, ctrl, op = params.base, params.grid, params.ctrl, params.op

    if base.s_base <= 0:
        v.append("s_base > 0")
    if base.u_base <= 0:
        v.append("u_base > 0")
    if base.f_base <= 0:
        v.append("f_base > 0")

    if grid.scr <= 0:
        v.append("scr > 0")
    if grid.u_s < 0:
        v.append("u_s >= 0")
    if grid.omega_s <= 0:
        v.append("omega_s > 0")
    if grid.l_sigma_t < 0:
        v.append("l_sigma_t >= 0")
    if grid.r_sigma_t < 0:
        v.append("r_sigma_t >= 0")
    if math.isfinite(grid.l_sigma) and grid.l_sigma + 1e-12 < grid.l_sigma_t:
        v.append("l_sigma >= l_sigma_t (the PoC-side lump contains the line lump)")

    if ctrl.pll_kp < 0:
        v.append("pll_kp >= 0")
    if ctrl.pll_ki <= 0:
        v.append("pll_ki > 0")
    if ctrl.pq_kp < 0:
        v.append("pq_kp >= 0")
    if ctrl.pq_ki <= 0:
        v.append("pq_ki > 0")

    if op.i_max <= 0:
        v.append("i_max > 0")
    if op.freq_limit <= 1.0:
        v.append("freq_limit > 1.0")
    ld, lq = limited_current(op.i_cd_ref, op.i_cq_ref, op.i_max)
    if math.hypot(ld, lq) > op.i_max + 1e-9:
        v.append("sqrt(i_cd_ref**2 + i_cq_ref**2) <= i_max after limiting")

    if fault is not None:
        if fault.t_clear is not None and not fault.t_clear > fault.t_apply:
            v.append("t_clear > t_apply")
        if not 0.0 <= fault.k_f_mag <= 1.0 + 1e-12:
            v.append("0 <= k_f_mag <= 1 for passive impedances")
        if not -math.pi <= fault.phi_f <= math.pi:
            v.append("phi_f within (-pi, pi]")
        if fault.z_f is not None:
            try:
                mag, ph = fault_factor(complex(fault.z_f), grid.z_s)
            except ValueError as exc:
                v.append(str(exc))
            else:
                if abs(mag - fault.k_f_mag) > 1e-9 or abs(ph - fault.phi_f) > 1e-9:
                    v.append(
                        "(k_f_mag, phi_f) must equal the polar form of z_f/(z_f + z_s); "
                        f"z_f gives ({mag:.12g}, {ph:.12g})"
                    )

    return ValidationReport(tuple(v))
