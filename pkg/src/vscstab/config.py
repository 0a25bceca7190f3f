"""JSON configuration loading, defaulting and round-trippable snapshots.

A configuration file mirrors the nameplate table plus the grid, controller,
operating-point, fault and scenario blocks. Every preset shipped under
``presets/`` is fully resolved; user files may omit blocks and rely on the
defaults below. ``resolved_snapshot`` emits the post-default tree, which
reloads to an identical configuration (that snapshot is what run manifests
embed).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

from .params import (
    ConfigError,
    ControllerParams,
    FaultSpec,
    GridParams,
    OperatingPoint,
    PerUnitBase,
    SystemParams,
    TableExtras,
    pll_gains_from_bandwidth,
    pq_gains_from_bandwidth,
    validate_params,
)
from .scenario import LimiterSpec, LimiterPriority, Mode, Scenario


@dataclass(frozen=True)
class SweepSpec:
    bandwidths_hz: tuple[float, ...] = ()
    k_f: tuple[float, ...] = ()
    pq_bandwidths_hz: tuple[float, ...] = ()


@dataclass(frozen=True)
class PortraitSpec:
    x_min: float = -1.5
    x_max: float = 1.5
    n: int = 41
    horizon: float = 5.0
    dt: float = 1e-3


@dataclass(frozen=True)
class ResolvedConfig:
    params: SystemParams
    scenario: Scenario
    sweep: SweepSpec = SweepSpec()
    portrait: PortraitSpec = PortraitSpec()

    @property
    def fault(self) -> FaultSpec:
        return self.scenario.fault


def _get(d: dict, key: str, default: Any = None) -> Any:
    return d.get(key, default) if isinstance(d, dict) else default


def _complex_from(v: Any, where: str) -> complex:
    if v is None:
        return 0j
    if isinstance(v, (int, float)):
        return complex(v, 0.0)
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(float(v[0]), float(v[1]))
    raise ConfigError(f"{where}: expected [re, im] pair, got {v!r}")


def _build(raw: dict) -> ResolvedConfig:
    base_d = _get(raw, "base", {}) or {}
    base = PerUnitBase(
        s_base=float(_get(base_d, "s_base", 2.0e6)),
        u_base=float(_get(base_d, "u_base", 690.0)),
        f_base=float(_get(base_d, "f_base", 50.0)),
    )

    table_d = _get(raw, "table", {}) or {}
    extras = TableExtras(
        v_dc=_get(table_d, "v_dc"),
        f_sw=_get(table_d, "f_sw"),
        l_f=_get(table_d, "l_f"),
        l_t=_get(table_d, "l_t"),
    )

    grid_d = _get(raw, "grid", {}) or {}
    if "scr" not in grid_d:
        raise ConfigError("grid.scr is required")
    scr = float(grid_d["scr"])
    l_sigma_t = _get(grid_d, "l_sigma_t")
    grid = GridParams(
        scr=scr,
        l_sigma_t=float(l_sigma_t) if l_sigma_t is not None else (1.0 / scr if scr > 0 else 0.0),
        r_sigma_t=float(_get(grid_d, "r_sigma_t", 0.0)),
        z_s=_complex_from(_get(grid_d, "z_s"), "grid.z_s"),
        u_s=float(_get(grid_d, "u_s", 1.0)),
        omega_s=float(_get(grid_d, "omega_s", 1.0)),
    )

    ctrl_d = _get(raw, "controllers", {}) or {}
    pll_bw = _get(ctrl_d, "pll_bandwidth_hz")
    pq_bw = _get(ctrl_d, "pq_bandwidth_hz")
    if "pll_kp" in ctrl_d and "pll_ki" in ctrl_d:
        pll_kp, pll_ki = float(ctrl_d["pll_kp"]), float(ctrl_d["pll_ki"])
    elif pll_bw is not None:
        pll_kp, pll_ki = pll_gains_from_bandwidth(float(pll_bw))
    else:
        raise ConfigError("controllers: give pll_kp/pll_ki or pll_bandwidth_hz")
    if "pq_kp" in ctrl_d and "pq_ki" in ctrl_d:
        pq_kp, pq_ki = float(ctrl_d["pq_kp"]), float(ctrl_d["pq_ki"])
    elif pq_bw is not None:
        pq_kp, pq_ki = pq_gains_from_bandwidth(float(pq_bw),
                                               kp=float(_get(ctrl_d, "pq_kp", 0.1)))
    else:
        pq_kp, pq_ki = 0.1, 20.0
    ctrl = ControllerParams(
        pll_kp=pll_kp, pll_ki=pll_ki, pq_kp=pq_kp, pq_ki=pq_ki,
        pll_bandwidth_hz=float(pll_bw) if pll_bw is not None else None,
        pq_bandwidth_hz=float(pq_bw) if pq_bw is not None else None,
    )

    op_d = _get(raw, "operating_point", {}) or {}
    op = OperatingPoint(
        p_ref=float(_get(op_d, "p_ref", 0.5)),
        q_ref=float(_get(op_d, "q_ref", 0.0)),
        i_cd_ref=float(_get(op_d, "i_cd_ref", 1.0)),
        i_cq_ref=float(_get(op_d, "i_cq_ref", 0.0)),
        i_max=float(_get(op_d, "i_max", 1.1)),
        freq_limit=float(_get(op_d, "freq_limit", 1.1)),
    )

    params = SystemParams(base=base, grid=grid, ctrl=ctrl, op=op, extras=extras)

    fault_d = _get(raw, "fault", {}) or {}
    z_f = _get(fault_d, "z_f")
    z_f_c = _complex_from(z_f, "fault.z_f") if z_f is not None else None
    if "k_f_mag" in fault_d:
        k_f_mag = float(fault_d["k_f_mag"])
        phi_f = float(_get(fault_d, "phi_f", 0.0))
    elif z_f_c is not None:
        from .params import fault_factor
        k_f_mag, phi_f = fault_factor(z_f_c, grid.z_s)
    else:
        k_f_mag, phi_f = 1.0, 0.0
    fault = FaultSpec(
        k_f_mag=k_f_mag, phi_f=phi_f,
        t_apply=float(_get(fault_d, "t_apply", 2.0)),
        t_clear=(float(fault_d["t_clear"]) if _get(fault_d, "t_clear") is not None else None),
        z_f=z_f_c,
    )

    scn_d = _get(raw, "scenario", {}) or {}
    lim_d = _get(scn_d, "limiter", {}) or {}
    limiter = LimiterSpec(
        i_max=float(_get(lim_d, "i_max", op.i_max)),
        priority=LimiterPriority(_get(lim_d, "priority", "D_AXIS")),
        freq_clamp=float(_get(lim_d, "freq_clamp", op.freq_limit)),
    )
    default_t_end = (fault.t_clear + 2.0) if fault.t_clear is not None else 4.0
    scenario = Scenario(
        params=params, fault=fault,
        mode=Mode(_get(scn_d, "mode", "CONST_CURRENT_REFS")),
        t_end=float(_get(scn_d, "t_end", default_t_end)),
        dt=float(_get(scn_d, "dt", 1e-4)),
        limiter=limiter,
    )

    sweep_d = _get(raw, "sweep", {}) or {}
    sweep = SweepSpec(
        bandwidths_hz=tuple(float(b) for b in _get(sweep_d, "bandwidths_hz", ())),
        k_f=tuple(float(k) for k in _get(sweep_d, "k_f", ())),
        pq_bandwidths_hz=tuple(float(b) for b in _get(sweep_d, "pq_bandwidths_hz", ())),
    )

    por_d = _get(raw, "portrait", {}) or {}
    portrait = PortraitSpec(
        x_min=float(_get(por_d, "x_min", -1.5)),
        x_max=float(_get(por_d, "x_max", 1.5)),
        n=int(_get(por_d, "n", 41)),
        horizon=float(_get(por_d, "horizon", 5.0)),
        dt=float(_get(por_d, "dt", 1e-3)),
    )

    report = validate_params(params, fault)
    if not report.ok:
        raise ConfigError("invalid configuration: " + "; ".join(report.violations))
    return ResolvedConfig(params=params, scenario=scenario, sweep=sweep, portrait=portrait)


def load_config(source: str | Path | dict) -> ResolvedConfig:
    """Parse, default and validate a configuration file (or already-parsed dict)."""
    if isinstance(source, dict):
        return _build(source)
    path = Path(source)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}: parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return _build(raw)


def resolved_snapshot(cfg: ResolvedConfig) -> dict:
    """Fully-resolved configuration tree; reloading it reproduces the run."""
    p, scn = cfg.params, cfg.scenario

    def _c(z: complex | None):
        return None if z is None else [z.real, z.imag]

    return {
        "base": {"s_base": p.base.s_base, "u_base": p.base.u_base,
                 "f_base": p.base.f_base},
        "table": {"v_dc": p.extras.v_dc, "f_sw": p.extras.f_sw,
                  "l_f": p.extras.l_f, "l_t": p.extras.l_t},
        "grid": {"scr": p.grid.scr, "l_sigma_t": p.grid.l_sigma_t,
                 "r_sigma_t": p.grid.r_sigma_t, "z_s": _c(p.grid.z_s),
                 "u_s": p.grid.u_s, "omega_s": p.grid.omega_s},
        "controllers": {"pll_kp": p.ctrl.pll_kp, "pll_ki": p.ctrl.pll_ki,
                        "pq_kp": p.ctrl.pq_kp, "pq_ki": p.ctrl.pq_ki,
                        "pll_bandwidth_hz": p.ctrl.pll_bandwidth_hz,
                        "pq_bandwidth_hz": p.ctrl.pq_bandwidth_hz},
        "operating_point": {"p_ref": p.op.p_ref, "q_ref": p.op.q_ref,
                            "i_cd_ref": p.op.i_cd_ref, "i_cq_ref": p.op.i_cq_ref,
                            "i_max": p.op.i_max, "freq_limit": p.op.freq_limit},
        "fault": {"k_f_mag": cfg.fault.k_f_mag, "phi_f": cfg.fault.phi_f,
                  "t_apply": cfg.fault.t_apply, "t_clear": cfg.fault.t_clear,
                  "z_f": _c(cfg.fault.z_f)},
        "scenario": {"mode": scn.mode.value, "t_end": scn.t_end, "dt": scn.dt,
                     "limiter": {"i_max": scn.limiter.i_max,
                                 "priority": scn.limiter.priority.value,
                                 "freq_clamp": scn.limiter.freq_clamp}},
        "sweep": {"bandwidths_hz": list(cfg.sweep.bandwidths_hz),
                  "k_f": list(cfg.sweep.k_f),
                  "pq_bandwidths_hz": list(cfg.sweep.pq_bandwidths_hz)},
        "portrait": {"x_min": cfg.portrait.x_min, "x_max": cfg.portrait.x_max,
                     "n": cfg.portrait.n, "horizon": cfg.portrait.horizon,
                     "dt": cfg.portrait.dt},
    }


PRESET_NAMES = ("paper_default", "fig2a", "fig2c", "fig3", "fig4b",
                "fig6a", "fig6b", "fig8a", "fig8b")


def preset_path(name: str) -> Path:
    if name not in PRESET_NAMES:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESET_NAMES)}")
    with resources.as_file(resources.files(__package__) / "presets" / f"{name}.json") as p:
        return Path(p)


def load_preset(name: str) -> ResolvedConfig:
    return load_config(preset_path(name))
